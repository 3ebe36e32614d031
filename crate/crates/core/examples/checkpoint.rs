//! Saves a trained network to the binary checkpoint format and restores
//! it into a freshly initialized one.
//!
//!     cargo run --release --example checkpoint

use eventnet::cells::{load_params, read_checkpoint, save_params};
use eventnet::event_world::{CiMode, GateMode};
use eventnet::harness::{evaluate, train_one, AnyModel, Condition, ModelKind, TrainConfig};

fn main() -> eventnet::Result<()> {
    let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
    let cond = Condition::new("h", ModelKind::Hierarchy).ci(CiMode::EarlySwitch).gate(GateMode::OpenAtSwitch);
    let (trained, _) = train_one(&cfg, &cond, 1)?;

    let mut bytes = Vec::new();
    save_params(trained.params(), &mut bytes)?;
    for (name, m) in read_checkpoint(bytes.as_slice())? {
        println!("{name:<16} {}x{}", m.rows(), m.cols());
    }

    let AnyModel::Hierarchy(mut restored) = AnyModel::build(&cfg, &cond, 99) else { unreachable!() };
    load_params(&mut restored, bytes.as_slice())?;
    let restored = AnyModel::Hierarchy(restored);
    assert_eq!(restored, trained);
    println!(
        "{} bytes; restored test MAE {:.4}",
        bytes.len(),
        evaluate(&restored, &cfg, &cond, 1)?.mae
    );
    Ok(())
}
