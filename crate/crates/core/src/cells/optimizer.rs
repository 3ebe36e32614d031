use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Adam with bias correction, or plain gradient descent.
///
/// Moment buffers are created lazily on the first update and follow the
/// parameter set's visit order.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Optimizer {
            kind: OptimizerKind::Sgd,
            ..Optimizer::adam(lr)
        }
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::adam(lr),
            OptimizerKind::Sgd => Optimizer::sgd(lr),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mut gs: Vec<&Matrix> = Vec::new();
        grads.visit(&mut |_, g| gs.push(g));
        if self.m.is_empty() {
            self.m = gs.iter().map(|g| Matrix::zeros(g.rows(), g.cols())).collect();
            self.v = self.m.clone();
        }
        let mut shapes_ok = gs.len() == self.m.len();
        let mut idx = 0;
        params.visit(&mut |_, p| {
            if let Some(g) = gs.get(idx) {
                shapes_ok &= p.rows() == g.rows() && p.cols() == g.cols() && self.m[idx].len() == p.len();
            }
            idx += 1;
        });
        if !shapes_ok || idx != gs.len() {
            return Err(Error::Contract("optimizer: parameter and gradient shapes differ".into()));
        }

        self.step += 1;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.lr);
        let bc1 = 1.0 - b1.powf(self.step as f64);
        let bc2 = 1.0 - b2.powf(self.step as f64);
        let kind = self.kind;
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut idx = 0;
        params.visit_mut(&mut |_, p| {
            let g = gs[idx].as_slice();
            match kind {
                OptimizerKind::Sgd => {
                    for (w, &gi) in p.as_mut_slice().iter_mut().zip(g) {
                        *w -= lr * gi;
                    }
                }
                OptimizerKind::Adam => {
                    let m = ms[idx].as_mut_slice();
                    let v = vs[idx].as_mut_slice();
                    for (((w, &gi), mi), vi) in p.as_mut_slice().iter_mut().zip(g).zip(m).zip(v) {
                        *mi = b1 * *mi + (1.0 - b1) * gi;
                        *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                        let mhat = *mi / bc1;
                        let vhat = *vi / bc2;
                        *w -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
            idx += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{LstmParams, MlpParams};
    use crate::numerics::Rng;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = Rng::new(1);
        let mut p = LstmParams::new(2, 3, &mut rng);
        let before = p.clone();
        let g = LstmParams::zeros(2, 3);
        let mut opt = Optimizer::adam(1e-4);
        opt.update(&mut p, &g).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = MlpParams::zeros(&[2, 1]);
        let mut g = MlpParams::zeros(&[2, 1]);
        g.assign_flat(&[3.0, -0.02, 0.5]);
        let mut opt = Optimizer::adam(1e-3);
        opt.update(&mut p, &g).unwrap();
        let moved = p.flatten();
        for (d, gi) in moved.iter().zip([3.0f64, -0.02, 0.5]) {
            assert!((d + 1e-3 * gi.signum()).abs() < 1e-8, "{d}");
        }
    }

    #[test]
    fn quadratic_descends_monotonically() {
        let mut p = MlpParams::zeros(&[1, 1]);
        p.assign_flat(&[1.0, 0.0]);
        let mut opt = Optimizer::adam(1e-2);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let x = p.flatten()[0];
            let f = x * x;
            assert!(f < last);
            last = f;
            let mut g = MlpParams::zeros(&[1, 1]);
            g.assign_flat(&[2.0 * x, 0.0]);
            opt.update(&mut p, &g).unwrap();
        }
        assert!(last < 1.0);
    }

    #[test]
    fn sgd_step() {
        let mut p = MlpParams::zeros(&[1, 1]);
        let mut g = MlpParams::zeros(&[1, 1]);
        g.assign_flat(&[2.0, -1.0]);
        Optimizer::sgd(0.5).update(&mut p, &g).unwrap();
        assert_eq!(p.flatten(), vec![-1.0, 0.5]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = MlpParams::zeros(&[2, 1]);
        let g = MlpParams::zeros(&[3, 1]);
        assert!(Optimizer::adam(1e-3).update(&mut p, &g).is_err());
    }
}
