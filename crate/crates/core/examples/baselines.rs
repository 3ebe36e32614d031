//! Single-layer LSTM and MLP predictors with and without the one-hot
//! context input.
//!
//!     cargo run --release --example baselines -- [epochs]

use eventnet::event_world::CiMode;
use eventnet::harness::{evaluate, train_one, Condition, ModelKind, TrainConfig};

fn main() -> eventnet::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(100, |s| s.parse().expect("epochs"));
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    for model in [ModelKind::Lstm, ModelKind::Mlp] {
        for ci in [CiMode::None, CiMode::InTune, CiMode::EarlySwitch] {
            let cond = Condition::new(format!("{model:?}/{ci:?}"), model).ci(ci);
            let (net, log) = train_one(&cfg, &cond, 1)?;
            let test = evaluate(&net, &cfg, &cond, 1)?.mae;
            println!("{:<22} train {:.4}  test {test:.4}", cond.name, log.final_error(cfg.final_epochs));
        }
    }
    Ok(())
}
