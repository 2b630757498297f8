//! Transmit a 5 x 32 GBd PM-16QAM multiplex and receive every channel
//! without a fiber in between.

use vao::metrics::snr_data_aided;
use vao::rxdsp::{matched_filter_downsample, select_channel};
use vao::waveform::{transmit, TxConfig};

fn main() -> vao::Result<()> {
    let tx = TxConfig::default();
    let (signal, frame) = transmit(&tx)?;
    println!(
        "{} samples at {:.0} GSa/s, {:.2} dBm total",
        signal.len(),
        signal.sample_rate / 1e9,
        vao::waveform::watt_to_dbm(signal.power())
    );
    for ch in 0..tx.num_channels {
        let sel = select_channel(
            &signal,
            ch,
            tx.num_channels,
            tx.channel_spacing,
            tx.symbol_rate,
            tx.rolloff,
            2,
        )?;
        let sym = matched_filter_downsample(&sel, tx.rolloff, 2, 0)?;
        let est = snr_data_aided(&sym, &frame.channels[ch])?;
        println!(
            "channel {ch}: SNR {:.1} dB over {} symbols",
            est.snr_db, est.num_symbols
        );
    }
    Ok(())
}
