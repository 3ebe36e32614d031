//! Generates an event-switching stream and prints its segments, the
//! context and surprise channels, and the identity-predictor error.
//!
//!     cargo run --example event_stream -- [steps] [seed]

use eventnet::event_world::{
    identity_baseline_error, make_schedule, make_stream, write_stream_csv, CiMode, GateMode, OrderMode, ScheduleOptions,
    StreamOptions,
};
use eventnet::numerics::Rng;

fn main() -> eventnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(60, |s| s.parse().expect("steps"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let mut rng = Rng::new(seed);
    let schedule = make_schedule(&mut rng, steps, ScheduleOptions { order: OrderMode::Fixed, no_repeat: false })?;
    for seg in &schedule.segments {
        println!("{:>4}..{:<4} {}", seg.start, seg.end, seg.event);
    }

    let opts = StreamOptions {
        ci_mode: CiMode::EarlySwitch,
        gate_mode: GateMode::Gradual,
        ..StreamOptions::default()
    };
    let stream = make_stream(&mut rng, &schedule, &opts)?;
    write_stream_csv(&stream[..stream.len().min(20)], std::io::stdout().lock())?;

    // A long stream shows the plateau an identity mapping sits on.
    let long = make_schedule(&mut rng, 200_000, ScheduleOptions::default())?;
    let long = make_stream(&mut rng, &long, &StreamOptions::default())?;
    println!("identity predictor MAE: {:.4}", identity_baseline_error(&long)?);
    Ok(())
}
