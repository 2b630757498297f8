//! The data-aided SNR estimator on symbols with known AWGN, pooled over
//! frames, plus the channel-memory estimate used to size windows.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use vao::channel::FiberSpan;
use vao::equalizers::window_for_memory;
use vao::metrics::{channel_memory_estimate, snr_data_aided, SnrAccumulator};
use vao::waveform::{generate_symbols, PolSymbols};

fn main() -> vao::Result<()> {
    let noise = Normal::new(0.0, (10f64.powf(-1.2) / 2.0).sqrt()).expect("valid deviation");
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut acc = SnrAccumulator::default();
    for seed in 0..4 {
        let frame = generate_symbols(4096, 1, 32e9, seed)?;
        let tx = &frame.channels[0];
        let mut add = |v: &[Complex64]| -> Vec<Complex64> {
            v.iter()
                .map(|z| z + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect()
        };
        let rx = PolSymbols {
            x: add(&tx.x),
            y: add(&tx.y),
        };
        let one = snr_data_aided(&rx, tx)?;
        acc.add(&rx, tx)?;
        println!("frame {seed}: {:.3} dB +- {:.3}", one.snr_db, one.confidence_halfwidth);
    }
    let all = acc.estimate()?;
    println!(
        "pooled: {:.3} dB +- {:.3} over {} symbols (12 dB injected)",
        all.snr_db, all.confidence_halfwidth, all.num_symbols
    );
    let beta2 = FiberSpan::ssmf(100e3).beta2;
    for km in [500.0, 1000.0, 2000.0] {
        let m = channel_memory_estimate(beta2, 32e9, 5.0 * 32.5e9, km * 1e3);
        println!("{km:.0} km: memory {m:.0} symbols, window {}", window_for_memory(m));
    }
    Ok(())
}
