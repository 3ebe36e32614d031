//! The `eventnet` command line.
//!
//! ```text
//! eventnet run <suite> [--config f.toml] [--manifest m.toml] [overrides] [--jobs N] [--out DIR]
//! eventnet plot <results-dir> [--out DIR]
//! eventnet gradcheck [--seeds N]
//! eventnet gen-fixtures [--out DIR] [--steps N] [--seed K]
//! ```
//!
//! Settings resolve as command-line flags over the config file over the
//! built-in defaults. `run` writes to `--out`, else to
//! `$EVENTNET_OUT/<suite>`, else to `results/<suite>`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::de::{DeserializeOwned, IntoDeserializer};

use crate::cells::OptimizerKind;
use crate::error::{Error, Result};
use crate::event_world::{make_schedule, make_stream, write_stream_csv, CiMode, GateMode, OrderMode, ScheduleOptions, StreamOptions};
use crate::gradcheck;
use crate::harness::{run_suite_with_progress, write_suite, RunManifest, RunRecord, Suite, TrainConfig, UpdatePolicy};
use crate::models::ContextInput;
use crate::numerics::Rng;
use crate::plot;

pub const OUT_ENV: &str = "EVENTNET_OUT";

#[derive(Debug, Parser)]
#[command(name = "eventnet", version, about = "Surprise-gated event compression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Train and evaluate every condition of a suite over all seeds.
    Run(RunArgs),
    /// Render SVG figures from a results directory.
    Plot {
        dir: PathBuf,
        /// Defaults to <dir>/plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Export event streams as CSV fixtures.
    GenFixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// table1, table2, table3 or table4. Optional with --manifest.
    pub suite: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rerun the suite and config recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    T::deserialize(s.into_deserializer()).map_err(|e: serde::de::value::Error| e.to_string())
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "steps")]
    pub steps_per_epoch: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// fixed(n) or random(lo,hi).
    #[arg(long)]
    pub update: Option<UpdatePolicy>,
    #[arg(long, value_parser = parse_enum::<OptimizerKind>)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub test_iterations: Option<usize>,
    #[arg(long)]
    pub test_steps: Option<usize>,
    #[arg(long, value_parser = parse_enum::<ContextInput>)]
    pub context_input: Option<ContextInput>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(epochs, steps_per_epoch, seeds, lr, update, optimizer, test_iterations, test_steps, context_input);
    }
}

/// Resolves suite and config from a manifest or suite name, config file and
/// overrides.
pub fn resolve(args: &RunArgs) -> Result<(Suite, TrainConfig)> {
    let (suite, mut cfg) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::read(path)?;
            let suite = m.suite()?;
            if let Some(s) = &args.suite {
                if s.parse::<Suite>()? != suite {
                    return Err(Error::Config(format!("suite `{s}` does not match manifest suite `{suite}`")));
                }
            }
            (suite, m.config)
        }
        None => {
            let name = args
                .suite
                .as_deref()
                .ok_or_else(|| Error::Config("a suite name or --manifest is required".into()))?;
            let suite: Suite = name.parse()?;
            let cfg = match &args.config {
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    TrainConfig::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => TrainConfig::default(),
            };
            (suite, cfg)
        }
    };
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok((suite, cfg))
}

fn default_out(suite: Suite) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(base) if !base.is_empty() => PathBuf::from(base).join(suite.name()),
        _ => PathBuf::from("results").join(suite.name()),
    }
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let (suite, cfg) = resolve(args)?;
    let out = args.out.clone().unwrap_or_else(|| default_out(suite));
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let total = suite.conditions().len() * cfg.seeds.len();
    let done = Mutex::new(0usize);
    let report = |r: &RunRecord| {
        let mut n = done.lock().unwrap();
        *n += 1;
        eprintln!(
            "[{}/{total}] {} seed {}: final {:.4} test {:.4}{}",
            *n,
            r.row.condition,
            r.row.seed,
            r.row.final_error,
            r.row.test_error,
            if r.row.diverged { " (diverged)" } else { "" }
        );
    };
    let progress: Option<&(dyn Fn(&RunRecord) + Sync)> = if args.quiet { None } else { Some(&report) };
    let result = run_suite_with_progress(suite, &cfg, jobs, progress)?;
    let manifest = write_suite(&result, &out)?;
    if !args.quiet {
        eprintln!("wrote {} files to {}", manifest.files.len() + 1, out.display());
        print!("{}", fs::read_to_string(out.join("table.csv"))?);
    }
    Ok(())
}

fn cmd_gradcheck(seeds: u64) -> Result<bool> {
    let mut merged: Vec<gradcheck::GradCheckReport> = Vec::new();
    for seed in 1..=seeds.max(1) {
        let reports = gradcheck::run_all(seed)?;
        if merged.is_empty() {
            merged = reports;
        } else {
            merged = merged.iter().zip(&reports).map(|(a, b)| a.clone().merge(b)).collect();
        }
    }
    let mut stdout = std::io::stdout().lock();
    let mut ok = true;
    for r in &merged {
        writeln!(
            stdout,
            "{:<12} max_rel {:.3e}  max_abs {:.3e}  entries {:>6}  {}",
            r.component,
            r.max_rel_error,
            r.max_abs_error,
            r.entries,
            if r.passed() { "pass" } else { "FAIL" }
        )?;
        ok &= r.passed();
    }
    Ok(ok)
}

/// Writes one stream per (order, context mode, gate mode) combination.
pub fn gen_fixtures(out: &Path, steps: usize, seed: u64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let orders = [("fixed", OrderMode::Fixed), ("random", OrderMode::Random)];
    let cis = [("no-ci", CiMode::None), ("in-tune", CiMode::InTune), ("early-switch", CiMode::EarlySwitch)];
    let mut written = Vec::new();
    for (oname, order) in orders {
        for (cname, ci_mode) in cis {
            for gate_mode in GateMode::ALL {
                let mut rng = Rng::new(seed);
                let schedule = make_schedule(&mut rng, steps, ScheduleOptions { order, no_repeat: false })?;
                let opts = StreamOptions {
                    ci_mode,
                    gate_mode,
                    ..StreamOptions::default()
                };
                let stream = make_stream(&mut rng, &schedule, &opts)?;
                let path = out.join(format!("{oname}_{cname}_{}_seed{seed}.csv", gate_mode.name()));
                write_stream_csv(&stream, fs::File::create(&path)?)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Runs the CLI and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Plot { dir, out } => {
            let out = out.clone().unwrap_or_else(|| dir.join("plots"));
            plot::plot_results(dir, &out).map(|files| {
                for f in files {
                    println!("{}", f.display());
                }
                true
            })
        }
        Command::Gradcheck { seeds } => cmd_gradcheck(*seeds),
        Command::GenFixtures { out, steps, seed } => gen_fixtures(out, *steps, *seed).map(|files| {
            println!("wrote {} streams to {}", files.len(), out.display());
            true
        }),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn main() -> ! {
    std::process::exit(run(Cli::parse()))
}
