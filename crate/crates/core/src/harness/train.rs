use crate::cells::{Optimizer, Parameters};
use crate::error::{Error, Result};
use crate::event_world::{make_schedule, make_stream, EventSchedule, ScheduleOptions, StreamOptions, StreamSample};
use crate::models::{ContextSource, FunctionKind, GatedHierarchy, Network, SingleNet, StepTrace};
use crate::numerics::Rng;

use super::config::{Condition, ModelKind, TrainConfig, UpdatePolicy};

// ChaCha stream ids for the per-seed sub-generators.
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_POLICY: u64 = 3;
const STREAM_TEST: u64 = 4;

/// A trained network of any experiment kind.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AnyModel {
    Single(SingleNet),
    Hierarchy(GatedHierarchy),
}

impl AnyModel {
    pub fn build(cfg: &TrainConfig, cond: &Condition, seed: u64) -> AnyModel {
        let mut rng = Rng::derive(seed, STREAM_INIT);
        let with_ci = cond.ci_mode != crate::event_world::CiMode::None;
        match cond.model {
            ModelKind::Lstm => AnyModel::Single(SingleNet::lstm(cfg.lstm_hidden, with_ci, &mut rng)),
            ModelKind::Mlp => AnyModel::Single(SingleNet::mlp(&cfg.mlp_hidden, with_ci, &mut rng)),
            ModelKind::Hierarchy => {
                AnyModel::Hierarchy(GatedHierarchy::new(cfg.hierarchy(FunctionKind::Lstm, cond.context_source), &mut rng))
            }
            ModelKind::HierarchyMlpf => {
                AnyModel::Hierarchy(GatedHierarchy::new(cfg.hierarchy(FunctionKind::Mlp, cond.context_source), &mut rng))
            }
        }
    }

    pub fn params(&self) -> &dyn Parameters {
        match self {
            AnyModel::Single(n) => n,
            AnyModel::Hierarchy(n) => n,
        }
    }
}

/// Training log for one (condition, seed) run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    /// Mean absolute prediction error of each completed epoch.
    pub curve: Vec<f64>,
    pub diverged: bool,
    pub updates: u64,
    /// Step indices (1-based, within the epoch) at which the first epoch
    /// applied an update.
    pub first_epoch_updates: Vec<usize>,
}

impl TrainLog {
    /// Mean of the last `n` epoch errors; NaN for a diverged run.
    pub fn final_error(&self, n: usize) -> f64 {
        if self.diverged || self.curve.is_empty() {
            return f64::NAN;
        }
        let k = n.min(self.curve.len());
        self.curve[self.curve.len() - k..].iter().sum::<f64>() / k as f64
    }
}

fn stream_options(cfg: &TrainConfig, cond: &Condition) -> StreamOptions {
    StreamOptions {
        ci_mode: cond.ci_mode,
        gate_mode: cond.gate_mode,
        gradual_width: cfg.gradual_width,
        x0: 0.0,
    }
}

fn schedule_options(cfg: &TrainConfig, cond: &Condition) -> ScheduleOptions {
    ScheduleOptions {
        order: cond.order,
        no_repeat: cfg.no_repeat,
    }
}

/// Generates one stream of `steps` samples for a condition.
pub fn generate(rng: &mut Rng, cfg: &TrainConfig, cond: &Condition, steps: usize) -> Result<(EventSchedule, Vec<StreamSample>)> {
    let schedule = make_schedule(rng, steps, schedule_options(cfg, cond))?;
    let stream = make_stream(rng, &schedule, &stream_options(cfg, cond))?;
    Ok((schedule, stream))
}

struct WindowSizer {
    policy: UpdatePolicy,
    rng: Rng,
}

impl WindowSizer {
    fn next(&mut self) -> usize {
        match self.policy {
            UpdatePolicy::Fixed(n) => n,
            UpdatePolicy::Random { lo, hi } => self.rng.uniform_int(lo, hi),
        }
    }
}

/// Truncated-BPTT training of `net` for one seed.
///
/// Each epoch draws a fresh stream, resets all recurrent state, and updates
/// the weights at the end of every window using the window-mean squared
/// error. Recurrent state carries across windows; gradients do not. A
/// trailing partial window at the end of an epoch is discarded.
pub fn train_network<N: Network>(net: &mut N, cfg: &TrainConfig, cond: &Condition, seed: u64) -> Result<TrainLog> {
    cfg.validate()?;
    let policy = cond.update.unwrap_or(cfg.update);
    policy.validate()?;
    let mut data_rng = Rng::derive(seed, STREAM_TRAIN);
    let mut sizer = WindowSizer {
        policy,
        rng: Rng::derive(seed, STREAM_POLICY),
    };
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr);
    let mut grads = net.zeros_like();
    let mut rt = net.runtime();
    let mut log = TrainLog {
        curve: Vec::with_capacity(cfg.epochs),
        diverged: false,
        updates: 0,
        first_epoch_updates: Vec::new(),
    };
    let mut errs: Vec<f64> = Vec::new();

    'epochs: for epoch in 0..cfg.epochs {
        let (_, stream) = generate(&mut data_rng, cfg, cond, cfg.steps_per_epoch)?;
        net.reset(&mut rt);
        let mut window = sizer.next();
        errs.clear();
        let mut abs_sum = 0.0;
        for (t, s) in stream.iter().enumerate() {
            let e = net.step(&mut rt, s)? - s.target;
            abs_sum += e.abs();
            errs.push(e);
            if errs.len() == window {
                let n = errs.len() as f64;
                let dpred: Vec<f64> = errs.iter().map(|e| 2.0 * e / n).collect();
                if !dpred.iter().all(|v| v.is_finite()) {
                    log.diverged = true;
                    break 'epochs;
                }
                grads.zero();
                net.backward(&rt, &dpred, &mut grads)?;
                opt.update(net, &grads)?;
                if !net.is_finite() {
                    log.diverged = true;
                    break 'epochs;
                }
                log.updates += 1;
                if epoch == 0 {
                    log.first_epoch_updates.push(t + 1);
                }
                errs.clear();
                net.clear_tape(&mut rt);
                window = sizer.next();
            }
        }
        net.clear_tape(&mut rt);
        let mae = abs_sum / stream.len() as f64;
        if !mae.is_finite() {
            log.diverged = true;
            break;
        }
        log.curve.push(mae);
    }
    Ok(log)
}

/// Trains the network a condition calls for.
pub fn train_one(cfg: &TrainConfig, cond: &Condition, seed: u64) -> Result<(AnyModel, TrainLog)> {
    let mut model = AnyModel::build(cfg, cond, seed);
    let log = match &mut model {
        AnyModel::Single(n) => train_network(n, cfg, cond, seed)?,
        AnyModel::Hierarchy(n) => train_network(n, cfg, cond, seed)?,
    };
    Ok((model, log))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mae: f64,
    /// Per-step records of every test sequence (hierarchies only).
    pub traces: Vec<StepTrace>,
}

/// Frozen-weight evaluation on `cfg.test_iterations` fresh sequences of
/// `cfg.test_steps` steps, each starting from reset state.
pub fn evaluate_network<N: Network>(net: &N, cfg: &TrainConfig, cond: &Condition, seed: u64) -> Result<EvalResult> {
    let mut rng = Rng::derive(seed, STREAM_TEST);
    let mut rt = net.runtime();
    let mut abs_sum = 0.0;
    let mut count = 0usize;
    let mut traces = Vec::new();
    for _ in 0..cfg.test_iterations {
        let (_, stream) = generate(&mut rng, cfg, cond, cfg.test_steps)?;
        net.reset(&mut rt);
        for s in &stream {
            let pred = net.step(&mut rt, s)?;
            net.clear_tape(&mut rt);
            abs_sum += (pred - s.target).abs();
            count += 1;
            if let Some((compression, gate)) = net.trace(&rt) {
                let surprise = match cond.context_source {
                    ContextSource::Ci => s.surprise,
                    ContextSource::Surprise => 1.0,
                };
                traces.push(StepTrace {
                    t: s.t,
                    event: s.event,
                    prediction: pred,
                    target: s.target,
                    compression: compression.to_vec(),
                    gate: gate.to_vec(),
                    surprise,
                });
            }
        }
    }
    if count == 0 {
        return Err(Error::Contract("evaluation needs test_iterations >= 1".into()));
    }
    Ok(EvalResult {
        mae: abs_sum / count as f64,
        traces,
    })
}

pub fn evaluate(model: &AnyModel, cfg: &TrainConfig, cond: &Condition, seed: u64) -> Result<EvalResult> {
    match model {
        AnyModel::Single(n) => evaluate_network(n, cfg, cond, seed),
        AnyModel::Hierarchy(n) => evaluate_network(n, cfg, cond, seed),
    }
}
