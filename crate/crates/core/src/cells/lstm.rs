use super::Parameters;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng};

/// LSTM with forget gate. Gate blocks are stacked in the order
/// input, forget, output, candidate along the rows of `w`, `u` and `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }

    pub fn reset(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
        self.c.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Per-step forward caches for truncated BPTT, stored flat.
#[derive(Clone, Debug, Default)]
pub struct LstmTape {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    len: usize,
}

impl LstmTape {
    pub fn clear(&mut self) {
        self.x.clear();
        self.h_prev.clear();
        self.c_prev.clear();
        self.gates.clear();
        self.tanh_c.clear();
        self.len = 0;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl LstmParams {
    /// Glorot-uniform weights, zero biases except the forget gate at +1.
    pub fn new(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let limit_w = (6.0 / (input + hidden) as f64).sqrt();
        let limit_u = (6.0 / (2 * hidden) as f64).sqrt();
        let mut p = LstmParams::zeros(input, hidden);
        for v in p.w.as_mut_slice() {
            *v = rng.uniform_unchecked(-limit_w, limit_w);
        }
        for v in p.u.as_mut_slice() {
            *v = rng.uniform_unchecked(-limit_u, limit_u);
        }
        p.b.as_mut_slice()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        p
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.u.cols()
    }

    /// Advances `state` by one step on input `x`, recording caches on `tape`.
    pub fn step(&self, state: &mut LstmState, x: &[f64], tape: &mut LstmTape) -> Result<()> {
        let hd = self.hidden_size();
        if x.len() != self.input_size() {
            return Err(Error::dims("lstm_step", self.input_size(), x.len()));
        }
        if state.h.len() != hd {
            return Err(Error::dims("lstm_step state", hd, state.h.len()));
        }
        tape.x.extend_from_slice(x);
        tape.h_prev.extend_from_slice(&state.h);
        tape.c_prev.extend_from_slice(&state.c);

        let off = tape.gates.len();
        tape.gates.extend_from_slice(self.b.as_slice());
        let z = &mut tape.gates[off..];
        self.w.gemv_acc(x, z);
        self.u.gemv_acc(&state.h, z);
        let (sig, cand) = z.split_at_mut(3 * hd);
        sig.iter_mut().for_each(|v| *v = sigmoid(*v));
        cand.iter_mut().for_each(|v| *v = v.tanh());

        let (i, rest) = sig.split_at(hd);
        let (f, o) = rest.split_at(hd);
        for k in 0..hd {
            let c = f[k] * state.c[k] + i[k] * cand[k];
            let tc = c.tanh();
            state.c[k] = c;
            state.h[k] = o[k] * tc;
            tape.tanh_c.push(tc);
        }
        tape.len += 1;
        Ok(())
    }

    /// Truncated BPTT over the whole tape.
    ///
    /// `dh` is the loss gradient w.r.t. each step's hidden output (steps ×
    /// hidden). No gradient enters from beyond the last recorded step.
    /// Parameter gradients accumulate into `grads`; `dx`, when given, is
    /// overwritten with the gradient w.r.t. each step's input.
    pub fn backward(&self, tape: &LstmTape, dh: &[f64], grads: &mut LstmParams, mut dx: Option<&mut [f64]>) -> Result<()> {
        let hd = self.hidden_size();
        let nin = self.input_size();
        let steps = tape.len();
        if dh.len() != steps * hd {
            return Err(Error::dims("lstm_bptt", steps * hd, dh.len()));
        }
        if let Some(dx) = dx.as_deref() {
            if dx.len() != steps * nin {
                return Err(Error::dims("lstm_bptt dx", steps * nin, dx.len()));
            }
        }
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];

        for t in (0..steps).rev() {
            let gates = &tape.gates[t * 4 * hd..(t + 1) * 4 * hd];
            let tanh_c = &tape.tanh_c[t * hd..(t + 1) * hd];
            let c_prev = &tape.c_prev[t * hd..(t + 1) * hd];
            let h_prev = &tape.h_prev[t * hd..(t + 1) * hd];
            let x = &tape.x[t * nin..(t + 1) * nin];
            for k in 0..hd {
                let (i, f, o, g) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
                let dhk = dh[t * hd + k] + dh_next[k];
                let tc = tanh_c[k];
                let d_o = dhk * tc;
                let dc = dhk * o * (1.0 - tc * tc) + dc_next[k];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * c_prev[k];
                dc_next[k] = dc * f;
                dz[k] = d_i * i * (1.0 - i);
                dz[hd + k] = d_f * f * (1.0 - f);
                dz[2 * hd + k] = d_o * o * (1.0 - o);
                dz[3 * hd + k] = d_g * (1.0 - g * g);
            }
            grads.w.outer_acc(&dz, x);
            grads.u.outer_acc(&dz, h_prev);
            for (gb, &d) in grads.b.as_mut_slice().iter_mut().zip(&dz) {
                *gb += d;
            }
            if let Some(dx) = dx.as_deref_mut() {
                let out = &mut dx[t * nin..(t + 1) * nin];
                out.iter_mut().for_each(|v| *v = 0.0);
                self.w.gemv_t_acc(&dz, out);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.u.gemv_t_acc(&dz, &mut dh_next);
        }
        Ok(())
    }
}

impl Parameters for LstmParams {
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

    fn random_params(rng: &mut Rng, input: usize, hidden: usize) -> LstmParams {
        let mut p = LstmParams::new(input, hidden, rng);
        for v in p.b.as_mut_slice() {
            *v += rng.uniform(-0.5, 0.5).unwrap();
        }
        p
    }

    #[test]
    fn zero_params_keep_state_at_zero() {
        let p = LstmParams::zeros(3, 4);
        let mut s = LstmState::zeros(4);
        let mut tape = LstmTape::default();
        for x in [[1.0, 2.0, 3.0], [-5.0, 0.5, 9.0]] {
            p.step(&mut s, &x, &mut tape).unwrap();
            assert!(s.h.iter().all(|&v| v == 0.0));
            assert!(s.c.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn step_matches_scalar_reference() {
        let mut rng = Rng::new(99);
        let (nin, hd) = (3, 5);
        let p = random_params(&mut rng, nin, hd);
        let mut s = LstmState::zeros(hd);
        for k in 0..hd {
            s.h[k] = rng.uniform(-0.9, 0.9).unwrap();
            s.c[k] = rng.uniform(-2.0, 2.0).unwrap();
        }
        let x: Vec<f64> = (0..nin).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        let before = s.clone();
        let mut tape = LstmTape::default();
        p.step(&mut s, &x, &mut tape).unwrap();

        let pre = |gate: usize, k: usize| {
            let row = gate * hd + k;
            let mut z = p.b.get(row, 0);
            for j in 0..nin {
                z += p.w.get(row, j) * x[j];
            }
            for j in 0..hd {
                z += p.u.get(row, j) * before.h[j];
            }
            z
        };
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        for k in 0..hd {
            let i = sig(pre(0, k));
            let f = sig(pre(1, k));
            let o = sig(pre(2, k));
            let g = pre(3, k).tanh();
            let c = f * before.c[k] + i * g;
            let h = o * c.tanh();
            assert!((s.c[k] - c).abs() <= 1e-12);
            assert!((s.h[k] - h).abs() <= 1e-12);
        }
    }

    #[test]
    fn hidden_output_is_bounded() {
        let mut rng = Rng::new(5);
        let mut p = random_params(&mut rng, 2, 6);
        p.visit_mut(&mut |_, m| m.as_mut_slice().iter_mut().for_each(|v| *v *= 20.0));
        let mut s = LstmState::zeros(6);
        let mut tape = LstmTape::default();
        for _ in 0..200 {
            let x = [rng.uniform(-5.0, 5.0).unwrap(), rng.uniform(-5.0, 5.0).unwrap()];
            p.step(&mut s, &x, &mut tape).unwrap();
            assert!(s.h.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let p = LstmParams::zeros(3, 2);
        let mut s = LstmState::zeros(2);
        assert!(p.step(&mut s, &[1.0], &mut LstmTape::default()).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(8);
        let p = random_params(&mut rng, 2, 3);
        let mut s = LstmState::zeros(3);
        let mut tape = LstmTape::default();
        for _ in 0..4 {
            p.step(&mut s, &[0.2, -0.7], &mut tape).unwrap();
        }
        let mut g = LstmParams::zeros(2, 3);
        p.backward(&tape, &[0.0; 12], &mut g, None).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_short_upstream() {
        let p = LstmParams::zeros(1, 2);
        let mut s = LstmState::zeros(2);
        let mut tape = LstmTape::default();
        p.step(&mut s, &[1.0], &mut tape).unwrap();
        let mut g = LstmParams::zeros(1, 2);
        assert!(p.backward(&tape, &[0.0; 1], &mut g, None).is_err());
    }
}
