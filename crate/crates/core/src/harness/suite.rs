use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cells::save_params;
use crate::error::{Error, Result};
use crate::event_world::{CiMode, GateMode, OrderMode};
use crate::models::{ContextSource, StepTrace};

use super::cluster::cluster_analysis;
use super::config::{Condition, ModelKind, TrainConfig, UpdatePolicy};
use super::results::RunRow;
use super::train::{evaluate, train_one};

/// The four published result tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Table1,
    Table2,
    Table3,
    Table4,
}

const GATES: [GateMode; 4] = [
    GateMode::AlwaysClosed,
    GateMode::AlwaysOpen,
    GateMode::OpenAtSwitch,
    GateMode::Gradual,
];

const TABLE4_GATES: [GateMode; 3] = [GateMode::AlwaysClosed, GateMode::AlwaysOpen, GateMode::OpenAtSwitch];

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Table1, Suite::Table2, Suite::Table3, Suite::Table4];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Table1 => "table1",
            Suite::Table2 => "table2",
            Suite::Table3 => "table3",
            Suite::Table4 => "table4",
        }
    }

    /// Conditions in table order. Names are `column/row`, except table2
    /// whose rows are bare gate statuses.
    pub fn conditions(self) -> Vec<Condition> {
        let hierarchy = |name: String, gate: GateMode| {
            Condition::new(name, ModelKind::Hierarchy).ci(CiMode::EarlySwitch).gate(gate)
        };
        match self {
            Suite::Table1 => {
                let mut out = Vec::new();
                for (col, model) in [("lstm", ModelKind::Lstm), ("mlp", ModelKind::Mlp)] {
                    let base = |row: &str| Condition::new(format!("{col}/{row}"), model);
                    out.push(base("no-ci"));
                    out.push(base("ci-fixed").ci(CiMode::InTune));
                    out.push(base("ci-random").ci(CiMode::InTune).order(OrderMode::Random));
                    out.push(base("ci-early").ci(CiMode::EarlySwitch));
                }
                out
            }
            Suite::Table2 => GATES.iter().map(|&g| hierarchy(g.name().into(), g)).collect(),
            Suite::Table3 => {
                let policies = [
                    UpdatePolicy::Fixed(35),
                    UpdatePolicy::Random { lo: 20, hi: 50 },
                    UpdatePolicy::Random { lo: 10, hi: 30 },
                ];
                policies
                    .iter()
                    .flat_map(|p| GATES.iter().map(move |&g| hierarchy(format!("{}/{}", p.slug(), g.name()), g).update(*p)))
                    .collect()
            }
            Suite::Table4 => {
                let mut out = Vec::new();
                for &g in &TABLE4_GATES {
                    out.push(hierarchy(format!("surp-to-lstmc/{}", g.name()), g).context_source(ContextSource::Surprise));
                }
                for &g in &TABLE4_GATES {
                    out.push(hierarchy(format!("in-tune-ci/{}", g.name()), g).ci(CiMode::InTune));
                }
                for &g in &TABLE4_GATES {
                    let mut c = hierarchy(format!("mlpf/{}", g.name()), g);
                    c.model = ModelKind::HierarchyMlpf;
                    out.push(c);
                }
                out
            }
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.into()))
    }
}

/// Everything one (condition, seed) run produces.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub row: RunRow,
    pub curve: Vec<f64>,
    /// Per-event gate-output centers over the test traces.
    pub centers: Option<[Vec<f64>; 4]>,
    /// Steps of the first `trace_sequences` test sequences.
    pub trace: Vec<StepTrace>,
    pub checkpoint: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub suite: Suite,
    pub config: TrainConfig,
    pub conditions: Vec<Condition>,
    /// Ordered by (condition, seed).
    pub runs: Vec<RunRecord>,
}

/// Trains and evaluates one condition for one seed.
pub fn run_condition(cfg: &TrainConfig, cond: &Condition, seed: u64) -> Result<RunRecord> {
    let (model, log) = train_one(cfg, cond, seed)?;
    let mut checkpoint = Vec::new();
    save_params(model.params(), &mut checkpoint)?;
    let mut row = RunRow {
        condition: cond.name.clone(),
        seed,
        final_error: log.final_error(cfg.final_epochs),
        test_error: f64::NAN,
        diverged: log.diverged,
        distances: None,
    };
    let mut centers = None;
    let mut trace = Vec::new();
    if !log.diverged {
        let ev = evaluate(&model, cfg, cond, seed)?;
        row.test_error = ev.mae;
        if !ev.traces.is_empty() {
            if let Ok(rep) = cluster_analysis(&ev.traces) {
                row.distances = Some(rep.distances);
                centers = Some(rep.centers);
            }
            let keep = cfg.trace_sequences * cfg.test_steps;
            trace = ev.traces.into_iter().take(keep).collect();
        }
    }
    Ok(RunRecord {
        row,
        curve: log.curve,
        centers,
        trace,
        checkpoint,
    })
}

/// Runs every condition for every configured seed on a pool of `jobs`
/// workers. Output order is (condition, seed) regardless of `jobs`.
///
/// `progress` is called after each finished run, from a worker thread.
pub fn run_conditions(
    conditions: &[Condition],
    cfg: &TrainConfig,
    jobs: usize,
    progress: Option<&(dyn Fn(&RunRecord) + Sync)>,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let tasks: Vec<(&Condition, u64)> = conditions
        .iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .with_max_len(1)
            .map(|&(c, s)| {
                let rec = run_condition(cfg, c, s)?;
                if let Some(f) = progress {
                    f(&rec);
                }
                Ok(rec)
            })
            .collect()
    })
}

pub fn run_experiment_suite(suite: Suite, cfg: &TrainConfig, jobs: usize) -> Result<SuiteResult> {
    run_suite_with_progress(suite, cfg, jobs, None)
}

pub fn run_suite_with_progress(
    suite: Suite,
    cfg: &TrainConfig,
    jobs: usize,
    progress: Option<&(dyn Fn(&RunRecord) + Sync)>,
) -> Result<SuiteResult> {
    let conditions = suite.conditions();
    let runs = run_conditions(&conditions, cfg, jobs, progress)?;
    Ok(SuiteResult {
        suite,
        config: cfg.clone(),
        conditions,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shapes() {
        let t1 = Suite::Table1.conditions();
        assert_eq!(t1.len(), 8);
        assert_eq!(t1.iter().filter(|c| c.model == ModelKind::Mlp).count(), 4);
        assert_eq!(Suite::Table2.conditions().len(), 4);
        let t3 = Suite::Table3.conditions();
        assert_eq!(t3.len(), 12);
        assert!(t3.iter().all(|c| c.update.is_some()));
        let t4 = Suite::Table4.conditions();
        assert_eq!(t4.len(), 9);
        assert_eq!(t4.iter().filter(|c| c.context_source == ContextSource::Surprise).count(), 3);
    }

    #[test]
    fn names_are_unique() {
        for s in Suite::ALL {
            let mut names: Vec<String> = s.conditions().into_iter().map(|c| c.slug()).collect();
            let n = names.len();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), n, "{s}");
        }
    }

    #[test]
    fn unknown_suite() {
        assert!(matches!("table9".parse::<Suite>(), Err(Error::UnknownSuite(_))));
        assert_eq!("table3".parse::<Suite>().unwrap(), Suite::Table3);
    }

    #[test]
    fn tiny_suite_runs_in_order() {
        let cfg = TrainConfig {
            epochs: 2,
            steps_per_epoch: 60,
            seeds: vec![3, 1],
            test_iterations: 2,
            test_steps: 50,
            ..TrainConfig::default()
        };
        let res = run_experiment_suite(Suite::Table2, &cfg, 2).unwrap();
        let order: Vec<(String, u64)> = res.runs.iter().map(|r| (r.row.condition.clone(), r.row.seed)).collect();
        assert_eq!(order[0], ("always-closed".to_string(), 3));
        assert_eq!(order[1], ("always-closed".to_string(), 1));
        assert_eq!(order.len(), 8);
        for r in &res.runs {
            assert_eq!(r.curve.len(), 2);
            assert_eq!(r.trace.len(), 50);
        }
        let closed = &res.runs[0];
        assert_eq!(closed.row.distances, Some([0.0; 6]));
    }
}
