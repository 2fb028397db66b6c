//! Run an experiment file and print its CSV, e.g.
//! `cargo run --example run_config -- crates/core/configs/ber_sm.json`.

use std::path::PathBuf;

use pmsim::harness::{run_experiment, to_csv, ExperimentConfig};

fn main() -> pmsim::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/ber_sm.json"));
    let cfg = ExperimentConfig::load(&path)?;
    print!("{}", to_csv(&run_experiment(&cfg)?));
    Ok(())
}
