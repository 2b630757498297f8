//! Converged per-side discard of the windowed schemes of a config, found by
//! growing the discard until the SNR stops moving.

use vao::harness::{calibrate_discards, ExperimentConfig};

fn main() -> vao::Result<()> {
    let cfg = ExperimentConfig::from_toml(
        r#"
        schemes = ["vsfe-single", "vao"]
        [tx]
        num_channels = 1
        num_symbols = 2048
        samples_per_symbol = 4
        [link]
        num_spans = 4
        steps_per_span = 50
        ase = false
        [equalizer]
        window_symbols = 256
        discard_per_side = 0
        [sweep]
        values = [3.0]
        "#,
    )?;
    for c in calibrate_discards(&cfg, 0.05, 16)? {
        println!(
            "{:<12} window {} -> discard {} per side, SNR {:.2} dB",
            c.scheme.name(),
            c.window_symbols,
            c.discard,
            c.snr_db
        );
    }
    Ok(())
}
