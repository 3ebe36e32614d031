//! Runs one of the table suites at reduced cost, writes the result files
//! and renders the figures.
//!
//!     cargo run --release --example table_suite -- [table1|table2|table3|table4] [epochs] [out-dir]

use std::path::PathBuf;

use eventnet::harness::{run_experiment_suite, summarize, write_suite, Suite, TrainConfig};
use eventnet::plot::plot_results;

fn main() -> eventnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let suite: Suite = args.next().as_deref().unwrap_or("table2").parse()?;
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let out = args.next().map_or_else(|| PathBuf::from("results").join(suite.name()), PathBuf::from);

    let cfg = TrainConfig {
        epochs,
        seeds: vec![1, 2, 3],
        ..TrainConfig::default()
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run_experiment_suite(suite, &cfg, jobs)?;
    let manifest = write_suite(&result, &out)?;
    let rows: Vec<_> = result.runs.iter().map(|r| r.row.clone()).collect();
    for s in summarize(&rows) {
        println!(
            "{:<28} final {:.4} +- {:.4}  test {:.4}",
            s.condition, s.final_error.mean, s.final_error.stdev, s.test_error.mean
        );
    }
    let plots = plot_results(&out, &out.join("plots"))?;
    println!("{} result files and {} figures in {}", manifest.files.len(), plots.len(), out.display());
    Ok(())
}
