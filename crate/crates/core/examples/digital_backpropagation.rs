//! Full-field ideal DBP against EDC on a noiseless 10 x 100 km link, and the
//! effect of using fewer backward steps per span.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vao::channel::{propagate_link, FiberSpan, Link};
use vao::equalizers::EqualizerConfig;
use vao::metrics::snr_data_aided;
use vao::rxdsp::{run_chain, RxChain, Scheme};
use vao::waveform::{transmit, TxConfig};

fn main() -> vao::Result<()> {
    let tx = TxConfig {
        num_channels: 3,
        num_symbols: 2048,
        power_per_channel: 2.0,
        ..TxConfig::default()
    };
    let link = Link::uniform(10, FiberSpan::ssmf(100e3), 5.0, false, false, 100);
    let (signal, frame) = transmit(&tx)?;
    let rx = propagate_link(&signal, &link, &mut ChaCha20Rng::seed_from_u64(3))?;
    let reference = &frame.channels[1];
    let edc = run_chain(
        &rx,
        &RxChain::centre(Scheme::Edc, &tx),
        &link,
        &EqualizerConfig::default(),
    )?;
    println!("EDC: {:.2} dB", snr_data_aided(&edc, reference)?.snr_db);
    for steps in [5, 20, 100] {
        let eq = EqualizerConfig {
            dbp_steps_per_span: steps,
            ..EqualizerConfig::default()
        };
        let out = run_chain(&rx, &RxChain::centre(Scheme::DbpIdeal, &tx), &link, &eq)?;
        println!(
            "DBP, {steps:>3} steps/span: {:.2} dB",
            snr_data_aided(&out, reference)?.snr_db
        );
    }
    Ok(())
}
