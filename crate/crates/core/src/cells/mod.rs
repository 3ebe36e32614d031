//! Recurrent and feed-forward cells with hand-derived backward passes.
//!
//! Each cell keeps its parameters in a plain struct and records forward
//! activations on a separate tape, so one parameter set can be driven by
//! several independent states (training vs. evaluation). Gradients use the
//! same struct type as the parameters they belong to.

mod checkpoint;
mod lstm;
mod mlp;
mod optimizer;
mod switch_gru;

pub use checkpoint::{load_params, read_checkpoint, save_params, write_checkpoint};
pub use lstm::{LstmParams, LstmState, LstmTape};
pub use mlp::{MlpParams, MlpTape};
pub use optimizer::{Optimizer, OptimizerKind};
pub use switch_gru::{SwitchGruParams, SwitchGruState, SwitchGruTape};

use crate::numerics::Matrix;

/// A named, ordered collection of parameter tensors.
///
/// The visit order is fixed and shared between a parameter set and its
/// gradient, which is how the optimizer pairs them up.
pub trait Parameters {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, m| n += m.len());
        n
    }

    fn zero(&mut self) {
        self.visit_mut(&mut |_, m| m.fill(0.0));
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, m| out.extend_from_slice(m.as_slice()));
        out
    }

    /// Overwrites all tensors from a flat vector in visit order.
    fn assign_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        self.visit_mut(&mut |_, m| {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
        });
        assert_eq!(off, flat.len(), "flat parameter vector has wrong length");
    }

    fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, m| ok &= m.is_finite());
        ok
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |name, _| out.push(name.to_string()));
        out
    }
}

/// Visits `inner` with every tensor name prefixed by `prefix.`.
pub(crate) fn visit_prefixed<'a, P: Parameters + ?Sized>(
    inner: &'a P,
    prefix: &str,
    f: &mut dyn FnMut(&str, &'a Matrix),
) {
    inner.visit(&mut |name, m| f(&format!("{prefix}.{name}"), m));
}

pub(crate) fn visit_prefixed_mut<P: Parameters + ?Sized>(
    inner: &mut P,
    prefix: &str,
    f: &mut dyn FnMut(&str, &mut Matrix),
) {
    inner.visit_mut(&mut |name, m| f(&format!("{prefix}.{name}"), m));
}
