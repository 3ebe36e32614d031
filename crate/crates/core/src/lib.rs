//! Surprise-gated hierarchical recurrent networks on a synthetic
//! event-switching benchmark.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: matrices, activations, seeded RNG, finite differences
//! - [`cells`]: MLP, LSTM and switch-GRU cells with BPTT, Adam, checkpoints
//! - [`event_world`]: the event-switching stream generator
//! - [`models`]: single-layer baselines and the gated hierarchy
//! - [`gradcheck`]: analytic-vs-numeric gradient checks
//! - [`harness`]: training, evaluation, multi-seed table suites, result files
//! - [`plot`]: SVG figures from a results directory
//! - [`cli`]: the `eventnet` command line

pub mod cells;
pub mod cli;
pub mod error;
pub mod event_world;
pub mod gradcheck;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod plot;

pub use error::{Error, Result};
