//! Compares hand-written BPTT gradients with central finite differences
//! for every cell and the full hierarchy.
//!
//!     cargo run --release --example gradient_check -- [seeds]

use eventnet::gradcheck;

fn main() -> eventnet::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(3, |s| s.parse().expect("seeds"));
    for seed in 1..=seeds {
        for r in gradcheck::run_all(seed)? {
            println!(
                "seed {seed:<3} {:<11} rel {:.2e}  abs {:.2e}  {}",
                r.component,
                r.max_rel_error,
                r.max_abs_error,
                if r.passed() { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
