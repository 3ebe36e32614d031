//! Result files of a suite run and their aggregation.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.toml                  suite, code hash, resolved config, file list
//! results.csv                    one row per (condition, seed)
//! summary.csv                    per-condition mean / stdev / median
//! distances.csv                  per-condition cluster distances
//! centers.csv                    per-seed gate-output centers
//! table.csv                      the published table layout
//! runs/<cond>__seed<k>.csv       per-epoch training error
//! traces/<cond>__seed<k>.csv     per-step test traces (hierarchies)
//! checkpoints/<cond>__seed<k>.bin
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so every
//! aggregate can be recomputed exactly from `results.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event_world::EventType;
use crate::numerics::{mean_std, median};

use super::cluster::{pair_name, PAIRS};
use super::config::TrainConfig;
use super::suite::{Suite, SuiteResult};

/// Hash of the library sources this binary was built from.
pub const CODE_HASH: &str = env!("EVENTNET_CODE_HASH");

/// Per-seed outcome, the row type of `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub condition: String,
    pub seed: u64,
    /// Mean training MAE over the last `final_epochs` epochs.
    pub final_error: f64,
    pub test_error: f64,
    pub diverged: bool,
    /// Cluster-center distances in pair order, hierarchies only.
    pub distances: Option<[f64; 6]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stdev: f64,
    pub median: f64,
}

impl Stat {
    /// Statistics over the finite values; NaN where undefined.
    pub fn of(values: &[f64]) -> Stat {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Stat {
                mean: f64::NAN,
                stdev: f64::NAN,
                median: f64::NAN,
            };
        }
        let (mean, stdev) = mean_std(&v);
        Stat {
            mean,
            stdev: if v.len() < 2 { f64::NAN } else { stdev },
            median: median(&v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub n: usize,
    pub n_diverged: usize,
    pub final_error: Stat,
    pub test_error: Stat,
    pub distances: Option<[Stat; 6]>,
}

/// Groups rows by condition (first-appearance order) and aggregates.
/// Diverged runs are counted and excluded from the statistics.
pub fn summarize(rows: &[RunRow]) -> Vec<ConditionSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.condition.as_str()) {
            order.push(&r.condition);
        }
    }
    order
        .into_iter()
        .map(|name| {
            let group: Vec<&RunRow> = rows.iter().filter(|r| r.condition == name).collect();
            let ok: Vec<&&RunRow> = group.iter().filter(|r| !r.diverged).collect();
            let finals: Vec<f64> = ok.iter().map(|r| r.final_error).collect();
            let tests: Vec<f64> = ok.iter().map(|r| r.test_error).collect();
            let dists: Vec<[f64; 6]> = ok.iter().filter_map(|r| r.distances).collect();
            let distances = (!dists.is_empty()).then(|| {
                std::array::from_fn(|i| Stat::of(&dists.iter().map(|d| d[i]).collect::<Vec<_>>()))
            });
            ConditionSummary {
                condition: name.to_string(),
                n: group.len(),
                n_diverged: group.len() - ok.len(),
                final_error: Stat::of(&finals),
                test_error: Stat::of(&tests),
                distances,
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

fn parse_num(s: &str) -> std::result::Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

pub fn run_file_stem(condition: &str, seed: u64) -> String {
    format!("{}__seed{seed}", condition.replace('/', "_"))
}

fn results_header() -> Vec<String> {
    let mut h: Vec<String> = ["condition", "seed", "final_error", "test_error", "diverged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(PAIRS.iter().map(|&p| pair_name(p)));
    h
}

pub fn write_results_csv(rows: &[RunRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(results_header())?;
    for r in rows {
        let mut rec = vec![
            r.condition.clone(),
            r.seed.to_string(),
            num(r.final_error),
            num(r.test_error),
            r.diverged.to_string(),
        ];
        match r.distances {
            Some(d) => rec.extend(d.iter().map(|&v| num(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `results.csv` back into rows.
pub fn read_results_csv(path: &Path) -> Result<Vec<RunRow>> {
    let data_err = |msg: String| Error::Data {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let expected = results_header();
    for col in &expected {
        if !header.contains(col) {
            return Err(data_err(format!("missing column `{col}`")));
        }
    }
    let idx = |name: &str| header.iter().position(|h| h == name).unwrap();
    let cols: Vec<usize> = expected.iter().map(|c| idx(c)).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(cols[i]).unwrap_or("");
        let at = |msg: String| data_err(format!("row {}: {msg}", line + 2));
        let dist_fields: Vec<&str> = (5..11).map(field).collect();
        let distances = if dist_fields.iter().all(|f| f.is_empty()) {
            None
        } else {
            let mut d = [0.0; 6];
            for (slot, f) in d.iter_mut().zip(&dist_fields) {
                *slot = parse_num(f).map_err(at)?;
            }
            Some(d)
        };
        rows.push(RunRow {
            condition: field(0).to_string(),
            seed: field(1).parse().map_err(|_| at(format!("bad seed `{}`", field(1))))?,
            final_error: parse_num(field(2)).map_err(at)?,
            test_error: parse_num(field(3)).map_err(at)?,
            diverged: field(4).parse().map_err(|_| at(format!("bad diverged flag `{}`", field(4))))?,
            distances,
        });
    }
    Ok(rows)
}

fn write_summary_csv(summaries: &[ConditionSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "condition",
        "n",
        "n_diverged",
        "mean",
        "stdev",
        "median",
        "test_mean",
        "test_stdev",
        "test_median",
    ])?;
    for s in summaries {
        w.write_record([
            s.condition.clone(),
            s.n.to_string(),
            s.n_diverged.to_string(),
            num(s.final_error.mean),
            num(s.final_error.stdev),
            num(s.final_error.median),
            num(s.test_error.mean),
            num(s.test_error.stdev),
            num(s.test_error.median),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_distances_csv(summaries: &[ConditionSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "pair", "mean", "stdev"])?;
    for s in summaries {
        if let Some(d) = &s.distances {
            for (st, &p) in d.iter().zip(&PAIRS) {
                w.write_record([s.condition.clone(), pair_name(p), num(st.mean), num(st.stdev)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn split_name(name: &str) -> (&str, &str) {
    match name.split_once('/') {
        Some((col, row)) => (col, row),
        None => ("error", name),
    }
}

/// Writes the summaries in the layout of the published table.
fn write_table_csv(suite: Suite, summaries: &[ConditionSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if suite == Suite::Table2 {
        w.write_record(["gate_status", "mean_error", "stdev_error", "pair", "mean_distance", "stdev_distance"])?;
        for s in summaries {
            let base = [s.condition.clone(), num(s.final_error.mean), num(s.final_error.stdev)];
            match &s.distances {
                Some(d) => {
                    for (st, &p) in d.iter().zip(&PAIRS) {
                        let mut rec = base.to_vec();
                        rec.extend([pair_name(p), num(st.mean), num(st.stdev)]);
                        w.write_record(&rec)?;
                    }
                }
                None => {
                    let mut rec = base.to_vec();
                    rec.extend(["".into(), "".into(), "".into()]);
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        return Ok(());
    }
    let mut cols: Vec<&str> = Vec::new();
    let mut rows: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), &ConditionSummary> = BTreeMap::new();
    for s in summaries {
        let (c, r) = split_name(&s.condition);
        if !cols.contains(&c) {
            cols.push(c);
        }
        if !rows.contains(&r) {
            rows.push(r);
        }
        cells.insert((c, r), s);
    }
    let first = if suite == Suite::Table1 { "condition" } else { "gate_status" };
    let mut header = vec![first.to_string()];
    for c in &cols {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_stdev"));
    }
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.to_string()];
        for c in &cols {
            match cells.get(&(*c, *r)) {
                Some(s) => rec.extend([num(s.final_error.mean), num(s.final_error.stdev)]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_curve_csv(curve: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mean_error"])?;
    for (i, v) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

fn write_trace_csv(trace: &[crate::models::StepTrace], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let k = trace.first().map_or(0, |s| s.gate.len());
    let kc = trace.first().map_or(0, |s| s.compression.len());
    let mut header = vec!["t".to_string(), "event".to_string()];
    header.extend((0..k).map(|i| format!("gate_h{i}")));
    header.extend((0..kc).map(|i| format!("compression{i}")));
    header.extend(["prediction".to_string(), "target".to_string()]);
    w.write_record(&header)?;
    for s in trace {
        let mut rec = vec![s.t.to_string(), s.event.name().to_string()];
        rec.extend(s.gate.iter().map(|&v| num(v)));
        rec.extend(s.compression.iter().map(|&v| num(v)));
        rec.extend([num(s.prediction), num(s.target)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_centers_csv(result: &SuiteResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let k = result
        .runs
        .iter()
        .find_map(|r| r.centers.as_ref().map(|c| c[0].len()))
        .unwrap_or(0);
    let mut header = vec!["condition".to_string(), "seed".to_string(), "event".to_string()];
    header.extend((0..k).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for r in &result.runs {
        if let Some(centers) = &r.centers {
            for e in EventType::ALL {
                let mut rec = vec![r.row.condition.clone(), r.row.seed.to_string(), e.name().to_string()];
                rec.extend(centers[e.index()].iter().map(|&v| num(v)));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Snapshot of what produced a results directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub suite: String,
    pub code_hash: String,
    pub seeds: Vec<u64>,
    /// Every emitted file, relative to the output directory.
    pub files: Vec<String>,
    pub config: TrainConfig,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)?;
        let m: RunManifest = toml::from_str(&text).map_err(|e| Error::Data {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn suite(&self) -> Result<Suite> {
        self.suite.parse()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

/// Writes every result file of a suite run into `dir` and returns the
/// manifest. Output depends only on the result, never on worker count.
pub fn write_suite(result: &SuiteResult, dir: &Path) -> Result<RunManifest> {
    for sub in ["runs", "traces", "checkpoints"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let mut files: Vec<PathBuf> = Vec::new();
    let rows: Vec<RunRow> = result.runs.iter().map(|r| r.row.clone()).collect();
    let summaries = summarize(&rows);

    let mut emit = |name: &str| {
        files.push(PathBuf::from(name));
        dir.join(name)
    };
    write_results_csv(&rows, &emit("results.csv"))?;
    write_summary_csv(&summaries, &emit("summary.csv"))?;
    write_distances_csv(&summaries, &emit("distances.csv"))?;
    write_centers_csv(result, &emit("centers.csv"))?;
    write_table_csv(result.suite, &summaries, &emit("table.csv"))?;
    for r in &result.runs {
        let stem = run_file_stem(&r.row.condition, r.row.seed);
        write_curve_csv(&r.curve, &emit(&format!("runs/{stem}.csv")))?;
        if !r.trace.is_empty() {
            write_trace_csv(&r.trace, &emit(&format!("traces/{stem}.csv")))?;
        }
        fs::write(emit(&format!("checkpoints/{stem}.bin")), &r.checkpoint)?;
    }
    let mut files: Vec<String> = files.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
    files.sort();
    let manifest = RunManifest {
        suite: result.suite.name().to_string(),
        code_hash: CODE_HASH.to_string(),
        seeds: result.config.seeds.clone(),
        files,
        config: result.config.clone(),
    };
    fs::write(dir.join("manifest.toml"), manifest.to_toml_string())?;
    Ok(manifest)
}
