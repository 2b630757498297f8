//! A seeded power sweep from a TOML config, written as CSV with its
//! manifest. Defaults to `configs/quick.toml`.
//!
//! `cargo run --example power_sweep -- configs/suppression_vs_power.toml suppression.csv`

use std::path::PathBuf;
use vao::harness::{run_to_files, ExperimentConfig};

fn main() -> vao::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| "configs/quick.toml".into());
    let output = args.next().map(PathBuf::from).unwrap_or_else(|| "quick.csv".into());
    let cfg = ExperimentConfig::load(&config)?;
    let result = run_to_files(&cfg, &output, false)?;
    for r in &result.rows {
        println!(
            "{:<12} {:+5.1} dBm {:6.0} km  SNR {:>7}  zeta {:>7}",
            r.scheme.name(),
            r.power_dbm,
            r.distance_km,
            r.snr_db.map_or("-".into(), |v| format!("{v:.2}")),
            r.zeta_db.map_or("-".into(), |v| format!("{v:.2}")),
        );
    }
    println!("-> {}", output.display());
    Ok(())
}
