//! Networks assembled from the cells: single-layer baselines and the
//! surprise-gated hierarchy.
//!
//! Per step the hierarchy computes, in order:
//!
//! 1. the context LSTM consumes the context vector and emits a compression,
//! 2. the switch GRU blends that compression into its state by the surprise,
//! 3. the preprocessing MLP maps `(x, y)` to features,
//! 4. the function layer reads `[features; gate state]` and predicts the
//!    next value.

use serde::{Deserialize, Serialize};

use crate::cells::{
    visit_prefixed, visit_prefixed_mut, LstmParams, LstmState, LstmTape, MlpParams, MlpTape, Parameters, SwitchGruParams,
    SwitchGruState, SwitchGruTape,
};
use crate::error::{Error, Result};
use crate::event_world::{StreamSample, CI_DIM};
use crate::numerics::{Matrix, Rng};

/// A trainable sequence predictor with externally held recurrent state.
///
/// Gradients are represented by a second instance of the same type.
pub trait Network: Parameters + Clone + Send + Sync {
    type Runtime: Send;

    fn runtime(&self) -> Self::Runtime;

    /// Zeroes all recurrent state and clears the tape.
    fn reset(&self, rt: &mut Self::Runtime);

    /// Drops recorded caches but keeps the recurrent state.
    fn clear_tape(&self, rt: &mut Self::Runtime);

    /// Advances one step, records caches, and returns the scalar prediction.
    fn step(&self, rt: &mut Self::Runtime, sample: &StreamSample) -> Result<f64>;

    /// Backpropagates `dpred` (one entry per recorded step) through the tape,
    /// accumulating into `grads`.
    fn backward(&self, rt: &Self::Runtime, dpred: &[f64], grads: &mut Self) -> Result<()>;

    fn zeros_like(&self) -> Self;

    /// Compression and gate output of the most recent step, if the network
    /// has a context pathway.
    fn trace<'r>(&self, _rt: &'r Self::Runtime) -> Option<(&'r [f64], &'r [f64])> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleKind {
    Lstm,
    Mlp,
}

#[derive(Clone, Debug, PartialEq)]
enum SingleBody {
    Lstm { lstm: LstmParams, readout: MlpParams },
    Mlp(MlpParams),
}

/// A single LSTM (with linear readout) or MLP reading `(x, y[, ci])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleNet {
    with_ci: bool,
    body: SingleBody,
}

pub struct SingleRuntime {
    input: Vec<f64>,
    state: LstmState,
    lstm_tape: LstmTape,
    mlp_tape: MlpTape,
}

impl SingleNet {
    pub fn lstm(hidden: usize, with_ci: bool, rng: &mut Rng) -> Self {
        let nin = 2 + if with_ci { CI_DIM } else { 0 };
        SingleNet {
            with_ci,
            body: SingleBody::Lstm {
                lstm: LstmParams::new(nin, hidden, rng),
                readout: MlpParams::new(&[hidden, 1], rng),
            },
        }
    }

    pub fn mlp(hidden: &[usize], with_ci: bool, rng: &mut Rng) -> Self {
        let mut widths = vec![2 + if with_ci { CI_DIM } else { 0 }];
        widths.extend_from_slice(hidden);
        widths.push(1);
        SingleNet {
            with_ci,
            body: SingleBody::Mlp(MlpParams::new(&widths, rng)),
        }
    }

    pub fn kind(&self) -> SingleKind {
        match self.body {
            SingleBody::Lstm { .. } => SingleKind::Lstm,
            SingleBody::Mlp(_) => SingleKind::Mlp,
        }
    }

    pub fn with_ci(&self) -> bool {
        self.with_ci
    }

    /// Output layer `(weights, bias)`: the LSTM readout or the MLP's last layer.
    pub fn output_layer_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        match &mut self.body {
            SingleBody::Lstm { readout, .. } => readout.layer_mut(0),
            SingleBody::Mlp(m) => {
                let last = m.widths().len() - 2;
                m.layer_mut(last)
            }
        }
    }

    fn fill_input(&self, buf: &mut Vec<f64>, s: &StreamSample) {
        buf.clear();
        buf.push(s.x);
        buf.push(s.y);
        if self.with_ci {
            buf.extend_from_slice(&s.ci);
        }
    }
}

impl Parameters for SingleNet {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        match &self.body {
            SingleBody::Lstm { lstm, readout } => {
                visit_prefixed(lstm, "lstm", f);
                visit_prefixed(readout, "readout", f);
            }
            SingleBody::Mlp(m) => visit_prefixed(m, "mlp", f),
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        match &mut self.body {
            SingleBody::Lstm { lstm, readout } => {
                visit_prefixed_mut(lstm, "lstm", f);
                visit_prefixed_mut(readout, "readout", f);
            }
            SingleBody::Mlp(m) => visit_prefixed_mut(m, "mlp", f),
        }
    }
}

impl Network for SingleNet {
    type Runtime = SingleRuntime;

    fn runtime(&self) -> SingleRuntime {
        let hidden = match &self.body {
            SingleBody::Lstm { lstm, .. } => lstm.hidden_size(),
            SingleBody::Mlp(_) => 0,
        };
        SingleRuntime {
            input: Vec::with_capacity(2 + CI_DIM),
            state: LstmState::zeros(hidden),
            lstm_tape: LstmTape::default(),
            mlp_tape: MlpTape::default(),
        }
    }

    fn reset(&self, rt: &mut SingleRuntime) {
        rt.state.reset();
        self.clear_tape(rt);
    }

    fn clear_tape(&self, rt: &mut SingleRuntime) {
        rt.lstm_tape.clear();
        rt.mlp_tape.clear();
    }

    fn step(&self, rt: &mut SingleRuntime, sample: &StreamSample) -> Result<f64> {
        self.fill_input(&mut rt.input, sample);
        match &self.body {
            SingleBody::Lstm { lstm, readout } => {
                lstm.step(&mut rt.state, &rt.input, &mut rt.lstm_tape)?;
                Ok(readout.forward(&rt.state.h, &mut rt.mlp_tape)?[0])
            }
            SingleBody::Mlp(m) => Ok(m.forward(&rt.input, &mut rt.mlp_tape)?[0]),
        }
    }

    fn backward(&self, rt: &SingleRuntime, dpred: &[f64], grads: &mut SingleNet) -> Result<()> {
        match (&self.body, &mut grads.body) {
            (SingleBody::Lstm { lstm, readout }, SingleBody::Lstm { lstm: gl, readout: gr }) => {
                let mut dh = vec![0.0; dpred.len() * lstm.hidden_size()];
                readout.backward(&rt.mlp_tape, dpred, gr, Some(&mut dh))?;
                lstm.backward(&rt.lstm_tape, &dh, gl, None)
            }
            (SingleBody::Mlp(m), SingleBody::Mlp(gm)) => m.backward(&rt.mlp_tape, dpred, gm, None),
            _ => Err(Error::Contract("gradient container does not match network kind".into())),
        }
    }

    fn zeros_like(&self) -> SingleNet {
        let mut z = self.clone();
        z.zero();
        z
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Lstm,
    Mlp,
}

/// What the context LSTM reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextSource {
    /// The one-hot context vector; the gate follows the sample's surprise.
    Ci,
    /// The scalar surprise value; the gate is held fully open.
    Surprise,
}

/// How the gate output enters the function layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextInput {
    /// Regular trainable input weights.
    Weighted,
    /// Input weights for the gate output are frozen at their initial values.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub compression_dim: usize,
    pub function_hidden: usize,
    pub pre_hidden: usize,
    pub pre_out: usize,
    pub function_kind: FunctionKind,
    pub mlpf_hidden: Vec<usize>,
    pub context_source: ContextSource,
    pub context_input: ContextInput,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            compression_dim: 8,
            function_hidden: 10,
            pre_hidden: 20,
            pre_out: 10,
            function_kind: FunctionKind::Lstm,
            mlpf_hidden: vec![50, 50],
            context_source: ContextSource::Ci,
            context_input: ContextInput::Weighted,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum FunctionLayer {
    Lstm { lstm: LstmParams, readout: MlpParams },
    Mlp(MlpParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatedHierarchy {
    cfg: HierarchyConfig,
    pub lstmc: LstmParams,
    pub gate: SwitchGruParams,
    pub input_pre: MlpParams,
    function: FunctionLayer,
}

/// One step of a hierarchy run, for analysis and plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub t: usize,
    pub event: crate::event_world::EventType,
    pub prediction: f64,
    pub target: f64,
    pub compression: Vec<f64>,
    pub gate: Vec<f64>,
    pub surprise: f64,
}

pub struct HierarchyRuntime {
    lstmc_state: LstmState,
    lstmc_tape: LstmTape,
    gate_state: SwitchGruState,
    gate_tape: SwitchGruTape,
    pre_tape: MlpTape,
    f_state: LstmState,
    f_tape: LstmTape,
    f_mlp_tape: MlpTape,
    ctx_in: Vec<f64>,
    f_in: Vec<f64>,
}

impl GatedHierarchy {
    pub fn new(cfg: HierarchyConfig, rng: &mut Rng) -> Self {
        let ctx_in = match cfg.context_source {
            ContextSource::Ci => CI_DIM,
            ContextSource::Surprise => 1,
        };
        let k = cfg.compression_dim;
        let lstmc = LstmParams::new(ctx_in, k, rng);
        let gate = SwitchGruParams::new(k, k, rng);
        let input_pre = MlpParams::new(&[2, cfg.pre_hidden, cfg.pre_out], rng);
        let f_in = cfg.pre_out + k;
        let function = match cfg.function_kind {
            FunctionKind::Lstm => FunctionLayer::Lstm {
                lstm: LstmParams::new(f_in, cfg.function_hidden, rng),
                readout: MlpParams::new(&[cfg.function_hidden, 1], rng),
            },
            FunctionKind::Mlp => {
                let mut widths = vec![f_in];
                widths.extend_from_slice(&cfg.mlpf_hidden);
                widths.push(1);
                FunctionLayer::Mlp(MlpParams::new(&widths, rng))
            }
        };
        GatedHierarchy {
            cfg,
            lstmc,
            gate,
            input_pre,
            function,
        }
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.cfg
    }

    pub fn function_lstm(&self) -> Option<(&LstmParams, &MlpParams)> {
        match &self.function {
            FunctionLayer::Lstm { lstm, readout } => Some((lstm, readout)),
            FunctionLayer::Mlp(_) => None,
        }
    }

    pub fn function_lstm_mut(&mut self) -> Option<(&mut LstmParams, &mut MlpParams)> {
        match &mut self.function {
            FunctionLayer::Lstm { lstm, readout } => Some((lstm, readout)),
            FunctionLayer::Mlp(_) => None,
        }
    }

    /// Input weight matrix of the function layer (LSTM `w` or first MLP layer).
    fn function_input_weights_mut(&mut self) -> &mut Matrix {
        match &mut self.function {
            FunctionLayer::Lstm { lstm, .. } => &mut lstm.w,
            FunctionLayer::Mlp(m) => m.weight_mut(0),
        }
    }

    fn lstmc_input(&self, buf: &mut Vec<f64>, s: &StreamSample) {
        buf.clear();
        match self.cfg.context_source {
            ContextSource::Ci => buf.extend_from_slice(&s.ci),
            ContextSource::Surprise => buf.push(s.surprise),
        }
    }

    fn gate_value(&self, s: &StreamSample) -> f64 {
        match self.cfg.context_source {
            ContextSource::Ci => s.surprise,
            ContextSource::Surprise => 1.0,
        }
    }

    /// One step, also returning the trace record.
    pub fn step_traced(&self, rt: &mut HierarchyRuntime, s: &StreamSample) -> Result<StepTrace> {
        let prediction = self.step(rt, s)?;
        Ok(StepTrace {
            t: s.t,
            event: s.event,
            prediction,
            target: s.target,
            compression: rt.lstmc_state.h.clone(),
            gate: rt.gate_state.h.clone(),
            surprise: self.gate_value(s),
        })
    }
}

impl Parameters for GatedHierarchy {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        visit_prefixed(&self.lstmc, "lstmc", f);
        visit_prefixed(&self.gate, "gate", f);
        visit_prefixed(&self.input_pre, "pre", f);
        match &self.function {
            FunctionLayer::Lstm { lstm, readout } => {
                visit_prefixed(lstm, "lstmf", f);
                visit_prefixed(readout, "readout", f);
            }
            FunctionLayer::Mlp(m) => visit_prefixed(m, "mlpf", f),
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        visit_prefixed_mut(&mut self.lstmc, "lstmc", f);
        visit_prefixed_mut(&mut self.gate, "gate", f);
        visit_prefixed_mut(&mut self.input_pre, "pre", f);
        match &mut self.function {
            FunctionLayer::Lstm { lstm, readout } => {
                visit_prefixed_mut(lstm, "lstmf", f);
                visit_prefixed_mut(readout, "readout", f);
            }
            FunctionLayer::Mlp(m) => visit_prefixed_mut(m, "mlpf", f),
        }
    }
}

impl Network for GatedHierarchy {
    type Runtime = HierarchyRuntime;

    fn runtime(&self) -> HierarchyRuntime {
        let k = self.cfg.compression_dim;
        HierarchyRuntime {
            lstmc_state: LstmState::zeros(k),
            lstmc_tape: LstmTape::default(),
            gate_state: SwitchGruState::zeros(k),
            gate_tape: SwitchGruTape::default(),
            pre_tape: MlpTape::default(),
            f_state: LstmState::zeros(self.cfg.function_hidden),
            f_tape: LstmTape::default(),
            f_mlp_tape: MlpTape::default(),
            ctx_in: Vec::with_capacity(CI_DIM),
            f_in: Vec::with_capacity(self.cfg.pre_out + k),
        }
    }

    fn reset(&self, rt: &mut HierarchyRuntime) {
        rt.lstmc_state.reset();
        rt.gate_state.reset();
        rt.f_state.reset();
        self.clear_tape(rt);
    }

    fn clear_tape(&self, rt: &mut HierarchyRuntime) {
        rt.lstmc_tape.clear();
        rt.gate_tape.clear();
        rt.pre_tape.clear();
        rt.f_tape.clear();
        rt.f_mlp_tape.clear();
    }

    fn step(&self, rt: &mut HierarchyRuntime, s: &StreamSample) -> Result<f64> {
        self.lstmc_input(&mut rt.ctx_in, s);
        self.lstmc.step(&mut rt.lstmc_state, &rt.ctx_in, &mut rt.lstmc_tape)?;
        self.gate
            .step(&mut rt.gate_state, &rt.lstmc_state.h, self.gate_value(s), &mut rt.gate_tape)?;
        let feat = self.input_pre.forward(&[s.x, s.y], &mut rt.pre_tape)?;
        rt.f_in.clear();
        rt.f_in.extend_from_slice(feat);
        rt.f_in.extend_from_slice(&rt.gate_state.h);
        match &self.function {
            FunctionLayer::Lstm { lstm, readout } => {
                lstm.step(&mut rt.f_state, &rt.f_in, &mut rt.f_tape)?;
                Ok(readout.forward(&rt.f_state.h, &mut rt.f_mlp_tape)?[0])
            }
            FunctionLayer::Mlp(m) => Ok(m.forward(&rt.f_in, &mut rt.f_mlp_tape)?[0]),
        }
    }

    fn backward(&self, rt: &HierarchyRuntime, dpred: &[f64], grads: &mut GatedHierarchy) -> Result<()> {
        let steps = dpred.len();
        if rt.lstmc_tape.len() != steps || rt.gate_tape.len() != steps || rt.pre_tape.len() != steps {
            return Err(Error::Contract(format!(
                "hierarchy backward: {} upstream gradients but {} recorded steps",
                steps,
                rt.gate_tape.len()
            )));
        }
        let k = self.cfg.compression_dim;
        let p = self.cfg.pre_out;
        let width = p + k;
        let mut d_fin = vec![0.0; steps * width];
        match (&self.function, &mut grads.function) {
            (FunctionLayer::Lstm { lstm, readout }, FunctionLayer::Lstm { lstm: gl, readout: gr }) => {
                let mut dh = vec![0.0; steps * lstm.hidden_size()];
                readout.backward(&rt.f_mlp_tape, dpred, gr, Some(&mut dh))?;
                lstm.backward(&rt.f_tape, &dh, gl, Some(&mut d_fin))?;
            }
            (FunctionLayer::Mlp(m), FunctionLayer::Mlp(gm)) => {
                m.backward(&rt.f_mlp_tape, dpred, gm, Some(&mut d_fin))?;
            }
            _ => return Err(Error::Contract("gradient container does not match network kind".into())),
        }
        let mut d_feat = vec![0.0; steps * p];
        let mut d_gate = vec![0.0; steps * k];
        for t in 0..steps {
            let row = &d_fin[t * width..(t + 1) * width];
            d_feat[t * p..(t + 1) * p].copy_from_slice(&row[..p]);
            d_gate[t * k..(t + 1) * k].copy_from_slice(&row[p..]);
        }
        self.input_pre.backward(&rt.pre_tape, &d_feat, &mut grads.input_pre, None)?;
        let mut d_comp = vec![0.0; steps * k];
        self.gate.backward(&rt.gate_tape, &d_gate, &mut grads.gate, Some(&mut d_comp))?;
        self.lstmc.backward(&rt.lstmc_tape, &d_comp, &mut grads.lstmc, None)?;

        if self.cfg.context_input == ContextInput::Unweighted {
            let w = grads.function_input_weights_mut();
            for r in 0..w.rows() {
                for c in p..width {
                    w.set(r, c, 0.0);
                }
            }
        }
        Ok(())
    }

    fn zeros_like(&self) -> GatedHierarchy {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn trace<'r>(&self, rt: &'r HierarchyRuntime) -> Option<(&'r [f64], &'r [f64])> {
        Some((&rt.lstmc_state.h, &rt.gate_state.h))
    }
}
