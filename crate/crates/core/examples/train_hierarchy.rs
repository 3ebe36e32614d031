//! Trains one surprise-gated hierarchy and reports its test error and the
//! distances between its per-event context codes.
//!
//!     cargo run --release --example train_hierarchy -- [gate] [epochs] [seed]
//!
//! `gate` is one of always-closed, always-open, open-at-switch, gradual.
//! The published protocol uses 2000 epochs; a few hundred already show
//! the codes separating.

use eventnet::event_world::{CiMode, GateMode};
use eventnet::harness::{cluster_analysis, evaluate, pair_name, train_one, Condition, ModelKind, TrainConfig, PAIRS};

fn main() -> eventnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let gate = args.next().unwrap_or_else(|| "open-at-switch".into());
    let gate = GateMode::ALL
        .into_iter()
        .find(|g| g.name() == gate)
        .unwrap_or_else(|| panic!("unknown gate mode `{gate}`"));
    let epochs: usize = args.next().map_or(200, |s| s.parse().expect("epochs"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let cond = Condition::new(gate.name(), ModelKind::Hierarchy).ci(CiMode::EarlySwitch).gate(gate);
    let (model, log) = train_one(&cfg, &cond, seed)?;
    let every = (epochs / 10).max(1);
    for (i, e) in log.curve.iter().enumerate().filter(|(i, _)| (i + 1) % every == 0) {
        println!("epoch {:>5}  train MAE {e:.4}", i + 1);
    }

    let eval = evaluate(&model, &cfg, &cond, seed)?;
    println!("test MAE {:.4} over {} sequences", eval.mae, cfg.test_iterations);
    let clusters = cluster_analysis(&eval.traces)?;
    for (p, d) in PAIRS.iter().zip(clusters.distances) {
        println!("  {:<8} {d:.3}", pair_name(*p));
    }
    Ok(())
}
