//! The switch GRU keeps its state while the surprise is 0, adopts the
//! candidate at 1, and blends in between.
//!
//!     cargo run --example switch_gate

use eventnet::cells::{SwitchGruParams, SwitchGruState, SwitchGruTape};
use eventnet::numerics::Rng;

fn show(label: &str, h: &[f64]) {
    let v: Vec<String> = h.iter().map(|x| format!("{x:+.3}")).collect();
    println!("{label:<22} [{}]", v.join(", "));
}

fn main() -> eventnet::Result<()> {
    let mut rng = Rng::new(7);
    let gate = SwitchGruParams::new(4, 3, &mut rng);
    let mut state = SwitchGruState { h: vec![0.5, -0.5, 0.0] };
    let mut tape = SwitchGruTape::default();
    let contexts = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];

    show("start", &state.h);
    for (ctx, s) in contexts.iter().zip([0.0, 1.0, 0.5]) {
        let cand = gate.candidate(ctx, &state.h);
        gate.step(&mut state, ctx, s, &mut tape)?;
        show(&format!("candidate (s = {s})"), &cand);
        show(&format!("state     (s = {s})"), &state.h);
    }

    let err = gate.step(&mut state, &contexts[0], 1.5, &mut tape).unwrap_err();
    println!("out-of-range surprise: {err}");
    Ok(())
}
