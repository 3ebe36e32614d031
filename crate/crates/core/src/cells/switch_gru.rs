//! GRU variant used as a surprise-driven switch.
//!
//! There is no reset gate, and the update gate has no weights: its value is
//! the externally supplied surprise `s` in `[0, 1]`.
//!
//! ```text
//! candidate = tanh(W * context + U * h_prev + b)
//! h         = (1 - s) * h_prev + s * candidate
//! ```
//!
//! With `s = 0` the previous compression is passed on unchanged; with `s = 1`
//! the candidate replaces it.

use super::Parameters;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchGruParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchGruState {
    pub h: Vec<f64>,
}

impl SwitchGruState {
    pub fn zeros(hidden: usize) -> Self {
        SwitchGruState { h: vec![0.0; hidden] }
    }

    pub fn reset(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[derive(Clone, Debug, Default)]
pub struct SwitchGruTape {
    context: Vec<f64>,
    h_prev: Vec<f64>,
    candidate: Vec<f64>,
    surprise: Vec<f64>,
}

impl SwitchGruTape {
    pub fn clear(&mut self) {
        self.context.clear();
        self.h_prev.clear();
        self.candidate.clear();
        self.surprise.clear();
    }

    pub fn len(&self) -> usize {
        self.surprise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surprise.is_empty()
    }
}

impl SwitchGruParams {
    pub fn new(context: usize, hidden: usize, rng: &mut Rng) -> Self {
        SwitchGruParams {
            w: Matrix::glorot(hidden, context, rng),
            u: Matrix::glorot(hidden, hidden, rng),
            b: Matrix::zeros(hidden, 1),
        }
    }

    pub fn zeros(context: usize, hidden: usize) -> Self {
        SwitchGruParams {
            w: Matrix::zeros(hidden, context),
            u: Matrix::zeros(hidden, hidden),
            b: Matrix::zeros(hidden, 1),
        }
    }

    pub fn context_size(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    /// Candidate activation for the given context and previous state.
    pub fn candidate(&self, context: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let mut z = self.b.as_slice().to_vec();
        self.w.gemv_acc(context, &mut z);
        self.u.gemv_acc(h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = v.tanh());
        z
    }

    pub fn step(&self, state: &mut SwitchGruState, context: &[f64], surprise: f64, tape: &mut SwitchGruTape) -> Result<()> {
        if !(0.0..=1.0).contains(&surprise) {
            return Err(Error::Contract(format!("surprise must lie in [0, 1], got {surprise}")));
        }
        if context.len() != self.context_size() {
            return Err(Error::dims("switch_gru_step", self.context_size(), context.len()));
        }
        let hd = self.hidden_size();
        if state.h.len() != hd {
            return Err(Error::dims("switch_gru_step state", hd, state.h.len()));
        }
        tape.context.extend_from_slice(context);
        tape.h_prev.extend_from_slice(&state.h);
        tape.surprise.push(surprise);
        let off = tape.candidate.len();
        if surprise == 0.0 {
            // closed gate: the candidate cannot influence h or any gradient
            tape.candidate.resize(off + hd, 0.0);
            return Ok(());
        }
        tape.candidate.extend_from_slice(self.b.as_slice());
        let cand = &mut tape.candidate[off..];
        self.w.gemv_acc(context, cand);
        self.u.gemv_acc(&state.h, cand);
        let keep = 1.0 - surprise;
        for (h, c) in state.h.iter_mut().zip(cand.iter_mut()) {
            *c = c.tanh();
            *h = keep * *h + surprise * *c;
        }
        Ok(())
    }

    /// Truncated BPTT. `dh` is the loss gradient w.r.t. each step's output
    /// (steps × hidden). `dcontext`, when given, receives the gradient w.r.t.
    /// each step's context input. The surprise input gets no gradient.
    pub fn backward(
        &self,
        tape: &SwitchGruTape,
        dh: &[f64],
        grads: &mut SwitchGruParams,
        mut dcontext: Option<&mut [f64]>,
    ) -> Result<()> {
        let hd = self.hidden_size();
        let nc = self.context_size();
        let steps = tape.len();
        if dh.len() != steps * hd {
            return Err(Error::dims("switch_gru_bptt", steps * hd, dh.len()));
        }
        if let Some(dc) = dcontext.as_deref() {
            if dc.len() != steps * nc {
                return Err(Error::dims("switch_gru_bptt dcontext", steps * nc, dc.len()));
            }
        }
        let mut carry = vec![0.0; hd];
        let mut dpre = vec![0.0; hd];
        for t in (0..steps).rev() {
            let s = tape.surprise[t];
            for k in 0..hd {
                carry[k] += dh[t * hd + k];
            }
            if s == 0.0 {
                if let Some(dc) = dcontext.as_deref_mut() {
                    dc[t * nc..(t + 1) * nc].iter_mut().for_each(|v| *v = 0.0);
                }
                continue;
            }
            let cand = &tape.candidate[t * hd..(t + 1) * hd];
            for k in 0..hd {
                dpre[k] = carry[k] * s * (1.0 - cand[k] * cand[k]);
            }
            grads.w.outer_acc(&dpre, &tape.context[t * nc..(t + 1) * nc]);
            grads.u.outer_acc(&dpre, &tape.h_prev[t * hd..(t + 1) * hd]);
            for (g, &d) in grads.b.as_mut_slice().iter_mut().zip(&dpre) {
                *g += d;
            }
            if let Some(dc) = dcontext.as_deref_mut() {
                let out = &mut dc[t * nc..(t + 1) * nc];
                out.iter_mut().for_each(|v| *v = 0.0);
                self.w.gemv_t_acc(&dpre, out);
            }
            let keep = 1.0 - s;
            carry.iter_mut().for_each(|v| *v *= keep);
            self.u.gemv_t_acc(&dpre, &mut carry);
        }
        Ok(())
    }
}

impl Parameters for SwitchGruParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        f("w", &self.w);
        f("u", &self.u);
        f("b", &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        f("w", &mut self.w);
        f("u", &mut self.u);
        f("b", &mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(seed: u64) -> (SwitchGruParams, SwitchGruState, Vec<f64>) {
        let mut rng = Rng::new(seed);
        let p = SwitchGruParams::new(4, 3, &mut rng);
        let mut s = SwitchGruState::zeros(3);
        for v in &mut s.h {
            *v = rng.uniform(-1.0, 1.0).unwrap();
        }
        let ctx = (0..4).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        (p, s, ctx)
    }

    #[test]
    fn closed_gate_keeps_state() {
        let (p, mut s, ctx) = setup(1);
        let before = s.h.clone();
        p.step(&mut s, &ctx, 0.0, &mut SwitchGruTape::default()).unwrap();
        assert_eq!(s.h, before);
    }

    #[test]
    fn open_gate_adopts_candidate() {
        let (p, mut s, ctx) = setup(2);
        let cand = p.candidate(&ctx, &s.h);
        p.step(&mut s, &ctx, 1.0, &mut SwitchGruTape::default()).unwrap();
        assert_eq!(s.h, cand);
    }

    #[test]
    fn half_open_gate_is_midpoint() {
        let (p, mut s, ctx) = setup(3);
        let cand = p.candidate(&ctx, &s.h);
        let mid: Vec<f64> = s.h.iter().zip(&cand).map(|(a, b)| (a + b) / 2.0).collect();
        p.step(&mut s, &ctx, 0.5, &mut SwitchGruTape::default()).unwrap();
        assert_eq!(s.h, mid);
    }

    #[test]
    fn surprise_outside_unit_interval_is_rejected() {
        let (p, mut s, ctx) = setup(4);
        let mut tape = SwitchGruTape::default();
        assert!(matches!(p.step(&mut s, &ctx, 1.5, &mut tape), Err(Error::Contract(_))));
        assert!(p.step(&mut s, &ctx, -0.1, &mut tape).is_err());
        assert!(p.step(&mut s, &ctx, f64::NAN, &mut tape).is_err());
    }

    #[test]
    fn has_no_gate_parameters() {
        let p = SwitchGruParams::zeros(4, 3);
        assert_eq!(p.names(), vec!["w", "u", "b"]);
        assert_eq!(p.param_count(), 3 * 4 + 3 * 3 + 3);
    }

    #[test]
    fn closed_window_blocks_candidate_gradients() {
        let (p, mut s, ctx) = setup(5);
        let mut tape = SwitchGruTape::default();
        for _ in 0..5 {
            p.step(&mut s, &ctx, 0.0, &mut tape).unwrap();
        }
        let mut g = SwitchGruParams::zeros(4, 3);
        let mut dctx = vec![1.0; 20];
        p.backward(&tape, &[0.7; 15], &mut g, Some(&mut dctx)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dctx.iter().all(|&v| v == 0.0));
    }
}
