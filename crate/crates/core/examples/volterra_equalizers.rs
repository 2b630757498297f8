//! NLI suppression of OPC, single-step VSFE and VAO against EDC on a short
//! noiseless link.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vao::channel::{propagate_link, FiberSpan, Link};
use vao::equalizers::EqualizerConfig;
use vao::metrics::snr_data_aided;
use vao::rxdsp::{run_chain, RxChain, Scheme};
use vao::waveform::{transmit, TxConfig};

fn main() -> vao::Result<()> {
    let tx = TxConfig {
        num_channels: 1,
        num_symbols: 2048,
        samples_per_symbol: 4,
        power_per_channel: 4.0,
        ..TxConfig::default()
    };
    let span = FiberSpan::ssmf(100e3);
    let plain = Link::uniform(4, span, 5.0, false, false, 50);
    let opc = Link::uniform(4, span, 5.0, false, true, 50);
    let (signal, frame) = transmit(&tx)?;
    let rx_plain = propagate_link(&signal, &plain, &mut ChaCha20Rng::seed_from_u64(1))?;
    let rx_opc = propagate_link(&signal, &opc, &mut ChaCha20Rng::seed_from_u64(1))?;
    let eq = EqualizerConfig {
        window_symbols: 512,
        samples_per_symbol: 4,
        discard_per_side: 128,
        ..EqualizerConfig::default()
    };
    let mut edc = 0.0;
    for scheme in [
        Scheme::Edc,
        Scheme::OpcOnly,
        Scheme::VsfeSingle,
        Scheme::VsfeRecursive,
        Scheme::Vao,
    ] {
        let (rx, link) = if scheme.uses_opc() {
            (&rx_opc, &opc)
        } else {
            (&rx_plain, &plain)
        };
        let snr = snr_data_aided(
            &run_chain(rx, &RxChain::centre(scheme, &tx), link, &eq)?,
            &frame.channels[0],
        )?
        .snr_db;
        if scheme == Scheme::Edc {
            edc = snr;
        }
        println!("{:<15} SNR {snr:6.2} dB  zeta {:6.2} dB", scheme.name(), snr - edc);
    }
    Ok(())
}
