//! Run an experiment grid from a JSON config and print the summary table.
//!
//! `cargo run --release --example sweep_config -- configs/readout.json`

use tomocut::harness::{format_summary, run_experiment, summarize, write_rows, ExperimentConfig};

fn main() -> tomocut::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/readout.json").into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let rows = run_experiment(&cfg)?;
    write_rows(&rows, std::io::stdout())?;
    println!();
    print!("{}", format_summary(&summarize(&rows)));
    Ok(())
}
