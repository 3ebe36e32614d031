//! Analytic BPTT gradients checked against central finite differences.
//!
//! Each check builds a small random cell, runs a 5-step window from a fixed
//! initial state, and compares the hand-derived gradient of a scalar window
//! loss with [`finite_diff_grad`] of the same loss. An entry passes when its
//! absolute error is at most [`ABS_TOL`] or its relative error is below
//! [`REL_TOL`].

use crate::cells::{LstmParams, LstmState, LstmTape, MlpParams, MlpTape, Parameters, SwitchGruParams, SwitchGruState, SwitchGruTape};
use crate::error::Result;
use crate::event_world::{make_schedule, make_stream, GateMode, ScheduleOptions, StreamOptions, StreamSample};
use crate::models::{GatedHierarchy, HierarchyConfig, Network};
use crate::numerics::{finite_diff_grad, Rng};

pub const REL_TOL: f64 = 1e-5;
pub const ABS_TOL: f64 = 1e-7;
pub const FD_EPS: f64 = 1e-5;
pub const WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub component: String,
    /// Largest relative error among entries of magnitude at least
    /// `ABS_TOL / REL_TOL`; smaller entries are governed by the absolute
    /// tolerance.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub entries: usize,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn merge(mut self, other: &GradCheckReport) -> Self {
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.entries += other.entries;
        self.failures += other.failures;
        self
    }
}

/// Entry-wise comparison of an analytic gradient with a numeric one.
pub fn compare(component: &str, analytic: &[f64], numeric: &[f64]) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    let mut rep = GradCheckReport {
        component: component.to_string(),
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        entries: analytic.len(),
        failures: 0,
    };
    for (&a, &n) in analytic.iter().zip(numeric) {
        let abs = (a - n).abs();
        rep.max_abs_error = rep.max_abs_error.max(abs);
        let scale = a.abs().max(n.abs());
        let rel = if scale > 0.0 { abs / scale } else { 0.0 };
        if scale >= ABS_TOL / REL_TOL {
            rep.max_rel_error = rep.max_rel_error.max(rel);
        }
        if !(abs <= ABS_TOL || rel < REL_TOL) {
            rep.failures += 1;
        }
    }
    rep
}

fn random_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform_unchecked(-scale, scale)).collect()
}

fn perturb<P: Parameters>(p: &mut P, rng: &mut Rng, scale: f64) {
    p.visit_mut(&mut |_, m| {
        for v in m.as_mut_slice() {
            *v += rng.uniform_unchecked(-scale, scale);
        }
    });
}

/// Checks parameter gradients and input gradients of a loss.
///
/// `run(params, inputs)` returns the loss and, when asked, the analytic
/// gradients w.r.t. parameters and inputs.
fn check_with<P, F>(component: &str, params: &P, inputs: &[f64], run: F) -> Result<GradCheckReport>
where
    P: Parameters + Clone,
    F: Fn(&P, &[f64], bool) -> Result<(f64, Vec<f64>, Vec<f64>)>,
{
    let (_, g_params, g_inputs) = run(params, inputs, true)?;
    let flat = params.flatten();
    let mut scratch = params.clone();
    let num_params = finite_diff_grad(
        |p| {
            scratch.assign_flat(p);
            run(&scratch, inputs, false).map(|r| r.0).unwrap_or(f64::NAN)
        },
        &flat,
        FD_EPS,
    )?;
    let num_inputs = finite_diff_grad(|x| run(params, x, false).map(|r| r.0).unwrap_or(f64::NAN), inputs, FD_EPS)?;
    let rep = compare(component, &g_params, &num_params);
    Ok(rep.merge(&compare(component, &g_inputs, &num_inputs)))
}

pub fn check_mlp(seed: u64) -> Result<GradCheckReport> {
    let mut rng = Rng::derive(seed, 101);
    let widths = [3, 6, 5, 2];
    let mut p = MlpParams::new(&widths, &mut rng);
    perturb(&mut p, &mut rng, 0.2);
    let xs = random_vec(&mut rng, WINDOW * 3, 1.5);
    let r = random_vec(&mut rng, WINDOW * 2, 1.0);
    check_with("mlp", &p, &xs, |p, xs, want_grad| {
        let mut tape = MlpTape::default();
        let mut loss = 0.0;
        for t in 0..WINDOW {
            let y = p.forward(&xs[t * 3..(t + 1) * 3], &mut tape)?;
            loss += y.iter().zip(&r[t * 2..(t + 1) * 2]).map(|(a, b)| a * b).sum::<f64>();
        }
        if !want_grad {
            return Ok((loss, vec![], vec![]));
        }
        let mut g = MlpParams::zeros(&widths);
        let mut dx = vec![0.0; xs.len()];
        p.backward(&tape, &r, &mut g, Some(&mut dx))?;
        Ok((loss, g.flatten(), dx))
    })
}

pub fn check_lstm(seed: u64) -> Result<GradCheckReport> {
    let mut rng = Rng::derive(seed, 102);
    let (nin, hd) = (3, 4);
    let mut p = LstmParams::new(nin, hd, &mut rng);
    perturb(&mut p, &mut rng, 0.3);
    let h0 = random_vec(&mut rng, hd, 0.8);
    let c0 = random_vec(&mut rng, hd, 1.5);
    let xs = random_vec(&mut rng, WINDOW * nin, 1.5);
    let r = random_vec(&mut rng, WINDOW * hd, 1.0);
    check_with("lstm", &p, &xs, |p, xs, want_grad| {
        let mut s = LstmState { h: h0.clone(), c: c0.clone() };
        let mut tape = LstmTape::default();
        let mut loss = 0.0;
        for t in 0..WINDOW {
            p.step(&mut s, &xs[t * nin..(t + 1) * nin], &mut tape)?;
            loss += s.h.iter().zip(&r[t * hd..(t + 1) * hd]).map(|(a, b)| a * b).sum::<f64>();
        }
        if !want_grad {
            return Ok((loss, vec![], vec![]));
        }
        let mut g = LstmParams::zeros(nin, hd);
        let mut dx = vec![0.0; xs.len()];
        p.backward(&tape, &r, &mut g, Some(&mut dx))?;
        Ok((loss, g.flatten(), dx))
    })
}

pub fn check_switch_gru(seed: u64) -> Result<GradCheckReport> {
    let mut rng = Rng::derive(seed, 103);
    let (nc, hd) = (3, 4);
    let mut p = SwitchGruParams::new(nc, hd, &mut rng);
    perturb(&mut p, &mut rng, 0.3);
    let h0 = random_vec(&mut rng, hd, 0.9);
    let ctx = random_vec(&mut rng, WINDOW * nc, 1.0);
    // include both gate endpoints alongside interior openings
    let mut surprise: Vec<f64> = (0..WINDOW).map(|_| rng.uniform_unchecked(0.05, 1.0)).collect();
    surprise[1] = 0.0;
    surprise[3] = 1.0;
    let r = random_vec(&mut rng, WINDOW * hd, 1.0);
    check_with("switch-gru", &p, &ctx, |p, ctx, want_grad| {
        let mut s = SwitchGruState { h: h0.clone() };
        let mut tape = SwitchGruTape::default();
        let mut loss = 0.0;
        for t in 0..WINDOW {
            p.step(&mut s, &ctx[t * nc..(t + 1) * nc], surprise[t], &mut tape)?;
            loss += s.h.iter().zip(&r[t * hd..(t + 1) * hd]).map(|(a, b)| a * b).sum::<f64>();
        }
        if !want_grad {
            return Ok((loss, vec![], vec![]));
        }
        let mut g = SwitchGruParams::zeros(nc, hd);
        let mut dctx = vec![0.0; ctx.len()];
        p.backward(&tape, &r, &mut g, Some(&mut dctx))?;
        Ok((loss, g.flatten(), dctx))
    })
}

/// Window MSE of a network over `samples` from a reset state, with the
/// analytic gradient when requested.
pub fn window_loss<N: Network>(net: &N, samples: &[StreamSample], want_grad: bool) -> Result<(f64, Option<N>)> {
    let mut rt = net.runtime();
    net.reset(&mut rt);
    let n = samples.len() as f64;
    let mut loss = 0.0;
    let mut dpred = Vec::with_capacity(samples.len());
    for s in samples {
        let e = net.step(&mut rt, s)? - s.target;
        loss += e * e / n;
        dpred.push(2.0 * e / n);
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let mut g = net.zeros_like();
    net.backward(&rt, &dpred, &mut g)?;
    Ok((loss, Some(g)))
}

pub fn check_network<N: Network>(component: &str, net: &N, samples: &[StreamSample]) -> Result<GradCheckReport> {
    let analytic = window_loss(net, samples, true)?.1.expect("gradient requested").flatten();
    let mut scratch = net.clone();
    let numeric = finite_diff_grad(
        |p| {
            scratch.assign_flat(p);
            window_loss(&scratch, samples, false).map(|r| r.0).unwrap_or(f64::NAN)
        },
        &net.flatten(),
        FD_EPS,
    )?;
    Ok(compare(component, &analytic, &numeric))
}

/// Whole-hierarchy check on a short window with random gate openings, so the
/// gradient reaches the context LSTM through the switch GRU.
pub fn check_hierarchy(seed: u64, cfg: HierarchyConfig) -> Result<GradCheckReport> {
    let mut rng = Rng::derive(seed, 104);
    let mut net = GatedHierarchy::new(cfg, &mut rng);
    perturb(&mut net, &mut rng, 0.1);
    let sched = make_schedule(&mut rng, WINDOW, ScheduleOptions::default())?;
    let opts = StreamOptions {
        gate_mode: GateMode::AlwaysOpen,
        ..Default::default()
    };
    let mut samples = make_stream(&mut rng, &sched, &opts)?;
    for (k, s) in samples.iter_mut().enumerate() {
        s.ci = crate::event_world::EventType::ALL[(k + seed as usize) % 4].one_hot();
        s.surprise = if k == 2 { 0.0 } else { rng.uniform_unchecked(0.1, 1.0) };
    }
    check_network("hierarchy", &net, &samples)
}

/// The full battery used by the `gradcheck` command.
pub fn run_all(seed: u64) -> Result<Vec<GradCheckReport>> {
    Ok(vec![
        check_mlp(seed)?,
        check_lstm(seed)?,
        check_switch_gru(seed)?,
        check_hierarchy(seed, HierarchyConfig::default())?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compare_flags_corrupted_gradient() {
        let numeric = [1.0, -2.0, 3e-9];
        assert!(compare("ok", &[1.0, -2.0, 0.0], &numeric).passed());
        let bad = compare("bad", &[1.0, -2.0001, 0.0], &numeric);
        assert!(!bad.passed());
        assert_eq!(bad.failures, 1);
    }

    #[test]
    fn all_components_pass_for_one_seed() {
        let reports = run_all(0).unwrap();
        assert_eq!(reports.len(), 4);
        for r in reports {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn corrupted_lstm_backward_is_caught() {
        let mut rng = Rng::new(3);
        let p = LstmParams::new(2, 3, &mut rng);
        let xs = random_vec(&mut rng, WINDOW * 2, 1.0);
        let rep = check_with("lstm-corrupted", &p, &xs, |p, xs, want| {
            let mut s = LstmState::zeros(3);
            let mut tape = LstmTape::default();
            let mut loss = 0.0;
            for t in 0..WINDOW {
                p.step(&mut s, &xs[t * 2..(t + 1) * 2], &mut tape)?;
                loss += s.h.iter().sum::<f64>();
            }
            if !want {
                return Ok((loss, vec![], vec![]));
            }
            let mut g = LstmParams::zeros(2, 3);
            let mut dx = vec![0.0; xs.len()];
            p.backward(&tape, &[1.0; WINDOW * 3], &mut g, Some(&mut dx))?;
            let mut flat = g.flatten();
            flat[4] *= 1.01;
            Ok((loss, flat, dx))
        })
        .unwrap();
        assert!(!rep.passed());
    }
}
