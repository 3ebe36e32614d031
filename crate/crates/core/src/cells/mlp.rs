use super::Parameters;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Fully connected network: tanh on every hidden layer, linear output.
///
/// `widths = [input, hidden.., output]`; a two-entry list is a single affine
/// map, used as the scalar readout of the LSTMs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    widths: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Matrix>,
}

/// Activations of every layer for each recorded step.
#[derive(Clone, Debug, Default)]
pub struct MlpTape {
    acts: Vec<f64>,
    stride: usize,
    len: usize,
}

impl MlpTape {
    pub fn clear(&mut self) {
        self.acts.clear();
        self.len = 0;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn step(&self, t: usize) -> &[f64] {
        &self.acts[t * self.stride..(t + 1) * self.stride]
    }
}

impl MlpParams {
    pub fn new(widths: &[usize], rng: &mut Rng) -> Self {
        let mut p = MlpParams::zeros(widths);
        for w in &mut p.weights {
            *w = Matrix::glorot(w.rows(), w.cols(), rng);
        }
        p
    }

    pub fn zeros(widths: &[usize]) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        assert!(widths.iter().all(|&w| w >= 1), "layer widths must be >= 1");
        let weights = widths.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect();
        let biases = widths[1..].iter().map(|&n| Matrix::zeros(n, 1)).collect();
        MlpParams {
            widths: widths.to_vec(),
            weights,
            biases,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_size(&self) -> usize {
        self.widths[0]
    }

    pub fn output_size(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn weight(&self, layer: usize) -> &Matrix {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.weights[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Matrix {
        &mut self.biases[layer]
    }

    pub fn layer_mut(&mut self, layer: usize) -> (&mut Matrix, &mut Matrix) {
        (&mut self.weights[layer], &mut self.biases[layer])
    }

    fn stride(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Runs one forward pass, records it on `tape` and returns the output.
    pub fn forward<'t>(&self, x: &[f64], tape: &'t mut MlpTape) -> Result<&'t [f64]> {
        if x.len() != self.input_size() {
            return Err(Error::dims("mlp_forward", self.input_size(), x.len()));
        }
        let stride = self.stride();
        if tape.len == 0 {
            tape.stride = stride;
        }
        debug_assert_eq!(tape.stride, stride);
        let base = tape.acts.len();
        tape.acts.extend_from_slice(x);
        let layers = self.weights.len();
        let mut in_off = base;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let out_off = tape.acts.len();
            tape.acts.extend_from_slice(b.as_slice());
            let (prev, out) = tape.acts.split_at_mut(out_off);
            w.gemv_acc(&prev[in_off..out_off], out);
            if l + 1 < layers {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            in_off = out_off;
        }
        tape.len += 1;
        Ok(&tape.acts[in_off..])
    }

    /// Backward pass over every step on `tape`.
    ///
    /// `dy` holds the loss gradient w.r.t. each step's output (steps × output
    /// width). Parameter gradients accumulate into `grads`; `dx`, when given,
    /// receives the gradient w.r.t. each step's input (overwritten).
    pub fn backward(&self, tape: &MlpTape, dy: &[f64], grads: &mut MlpParams, mut dx: Option<&mut [f64]>) -> Result<()> {
        let steps = tape.len();
        let out_w = self.output_size();
        let in_w = self.input_size();
        if dy.len() != steps * out_w {
            return Err(Error::dims("mlp_backward", steps * out_w, dy.len()));
        }
        if let Some(dx) = dx.as_deref() {
            if dx.len() != steps * in_w {
                return Err(Error::dims("mlp_backward dx", steps * in_w, dx.len()));
            }
        }
        let max_w = *self.widths.iter().max().unwrap();
        let mut delta = vec![0.0; max_w];
        let mut below = vec![0.0; max_w];
        let layers = self.weights.len();
        // layer offsets within one step's activation block
        let offsets: Vec<usize> = self
            .widths
            .iter()
            .scan(0, |acc, &w| {
                let o = *acc;
                *acc += w;
                Some(o)
            })
            .collect();

        for t in 0..steps {
            let acts = tape.step(t);
            delta[..out_w].copy_from_slice(&dy[t * out_w..(t + 1) * out_w]);
            for l in (0..layers).rev() {
                let n_out = self.widths[l + 1];
                let n_in = self.widths[l];
                let a_in = &acts[offsets[l]..offsets[l] + n_in];
                let d = &delta[..n_out];
                grads.weights[l].outer_acc(d, a_in);
                for (g, &v) in grads.biases[l].as_mut_slice().iter_mut().zip(d) {
                    *g += v;
                }
                if l == 0 && dx.is_none() {
                    break;
                }
                let b = &mut below[..n_in];
                b.iter_mut().for_each(|v| *v = 0.0);
                self.weights[l].gemv_t_acc(d, b);
                if l > 0 {
                    for (bv, &a) in b.iter_mut().zip(a_in) {
                        *bv *= 1.0 - a * a;
                    }
                    std::mem::swap(&mut delta, &mut below);
                } else if let Some(dx) = dx.as_deref_mut() {
                    dx[t * in_w..(t + 1) * in_w].copy_from_slice(b);
                }
            }
        }
        Ok(())
    }
}

impl Parameters for MlpParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            f(&format!("w{l}"), w);
            f(&format!("b{l}"), b);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        for (l, (w, b)) in self.weights.iter_mut().zip(&mut self.biases).enumerate() {
            f(&format!("w{l}"), w);
            f(&format!("b{l}"), b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Layer-by-layer evaluation written without the tape machinery.
    fn reference_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let layers = p.weights.len();
        for l in 0..layers {
            let w = &p.weights[l];
            let mut next = Vec::with_capacity(w.rows());
            for i in 0..w.rows() {
                let mut s = p.biases[l].get(i, 0);
                for j in 0..w.cols() {
                    s += w.get(i, j) * a[j];
                }
                next.push(if l + 1 < layers { s.tanh() } else { s });
            }
            a = next;
        }
        a
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::zeros(&[3, 5, 2]);
        let mut tape = MlpTape::default();
        assert_eq!(p.forward(&[1.0, -2.0, 3.0], &mut tape).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input() {
        let mut p = MlpParams::zeros(&[3, 3]);
        *p.weight_mut(0) = Matrix::identity(3);
        let mut tape = MlpTape::default();
        assert_eq!(p.forward(&[0.1, -0.2, 7.0], &mut tape).unwrap(), &[0.1, -0.2, 7.0]);
    }

    #[test]
    fn matches_reference_evaluation() {
        let mut rng = Rng::new(21);
        let mut p = MlpParams::new(&[4, 7, 6, 3], &mut rng);
        p.visit_mut(&mut |_, m| {
            for v in m.as_mut_slice() {
                *v += rng.uniform(-0.3, 0.3).unwrap();
            }
        });
        let mut tape = MlpTape::default();
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform(-2.0, 2.0).unwrap()).collect();
            let got = p.forward(&x, &mut tape).unwrap().to_vec();
            let want = reference_forward(&p, &x);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert_eq!(tape.len(), 10);
    }

    #[test]
    fn rejects_wrong_input_width() {
        let p = MlpParams::zeros(&[2, 1]);
        let mut tape = MlpTape::default();
        assert!(p.forward(&[1.0], &mut tape).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(2);
        let p = MlpParams::new(&[2, 4, 1], &mut rng);
        let mut tape = MlpTape::default();
        for _ in 0..3 {
            p.forward(&[0.3, -0.1], &mut tape).unwrap();
        }
        let mut g = MlpParams::zeros(p.widths());
        let mut dx = vec![1.0; 6];
        p.backward(&tape, &[0.0; 3], &mut g, Some(&mut dx)).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
        assert!(dx.iter().all(|&v| v == 0.0));
    }
}
