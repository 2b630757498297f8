//! Receiver chains: channel selection, conjugation, matched filtering and
//! symbol-rate decimation around each compensation scheme.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Link;
use crate::equalizers::{edc, net_dispersion, Equalizer, EqualizerConfig, Variant};
use crate::error::{invalid_config, invalid_input, Result};
use crate::fft::{centred_index, FftPair};
use crate::waveform::{channel_offsets, frequency_shift, root_raised_cosine, DualPolSignal, PolSymbols, TxConfig};

/// Compensation scheme of a receiver chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Edc,
    OpcOnly,
    VsfeSingle,
    VsfeRecursive,
    Vao,
    DbpIdeal,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Edc,
        Scheme::OpcOnly,
        Scheme::VsfeSingle,
        Scheme::VsfeRecursive,
        Scheme::Vao,
        Scheme::DbpIdeal,
    ];

    /// Whether the scheme needs a link with mid-link OPC.
    pub fn uses_opc(self) -> bool {
        matches!(self, Scheme::OpcOnly | Scheme::Vao)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Edc => "edc",
            Scheme::OpcOnly => "opc-only",
            Scheme::VsfeSingle => "vsfe-single",
            Scheme::VsfeRecursive => "vsfe-recursive",
            Scheme::Vao => "vao",
            Scheme::DbpIdeal => "dbp-ideal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    fn variant(self) -> Option<Variant> {
        match self {
            Scheme::Edc => Some(Variant::Edc),
            Scheme::OpcOnly => None,
            Scheme::VsfeSingle => Some(Variant::VsfeSingle),
            Scheme::VsfeRecursive => Some(Variant::VsfeRecursive),
            Scheme::Vao => Some(Variant::Vao),
            Scheme::DbpIdeal => Some(Variant::DbpIdeal),
        }
    }
}

/// One step of a receiver chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Full-field equalizer at the simulation rate.
    Equalize(Variant),
    /// Shift channel to baseband, brick-wall filter, resample.
    Select,
    Conjugate,
    /// Dispersion left after a conjugation (zero on symmetric links).
    ResidualEdc,
    MatchedFilter,
}

/// A receiver for one WDM channel.
#[derive(Clone, Debug, PartialEq)]
pub struct RxChain {
    pub scheme: Scheme,
    pub channel_index: usize,
    pub num_channels: usize,
    pub channel_spacing: f64,
    pub symbol_rate: f64,
    pub rolloff: f64,
    /// Samples per symbol after channel selection.
    pub select_sps: usize,
}

impl RxChain {
    /// Receiver of the centre channel of `tx`.
    pub fn centre(scheme: Scheme, tx: &TxConfig) -> Self {
        Self {
            scheme,
            channel_index: tx.num_channels / 2,
            num_channels: tx.num_channels,
            channel_spacing: tx.channel_spacing,
            symbol_rate: tx.symbol_rate,
            rolloff: tx.rolloff,
            select_sps: 2,
        }
    }

    pub fn stages(&self) -> Vec<Stage> {
        use Stage::*;
        match self.scheme {
            Scheme::OpcOnly => vec![Select, Conjugate, ResidualEdc, MatchedFilter],
            s => vec![Equalize(s.variant().expect("equalizer scheme")), Select, MatchedFilter],
        }
    }
}

/// Brings channel `channel_index` of an `num_channels`-channel multiplex to
/// baseband, removes everything outside its occupied band and resamples to
/// `target_sps`.
pub fn select_channel(
    signal: &DualPolSignal,
    channel_index: usize,
    num_channels: usize,
    channel_spacing: f64,
    symbol_rate: f64,
    rolloff: f64,
    target_sps: usize,
) -> Result<DualPolSignal> {
    if channel_index >= num_channels {
        return Err(invalid_config(format!(
            "channel {channel_index} outside a {num_channels}-channel multiplex"
        )));
    }
    if target_sps < 2 {
        return Err(invalid_config("channel selection needs at least 2 samples/symbol"));
    }
    let n = signal.len();
    let in_sps = samples_per_symbol(signal, symbol_rate)?;
    let nsym = n / in_sps;
    let m = nsym * target_sps;
    if m > n {
        return Err(invalid_config(format!(
            "cannot upsample from {in_sps} to {target_sps} samples/symbol"
        )));
    }
    let mut offset = channel_offsets(num_channels)[channel_index] * channel_spacing;
    if signal.inverted {
        offset = -offset;
    }
    let base = frequency_shift(signal, -offset);
    let edge = symbol_rate * (1.0 + rolloff) / 2.0;
    let df = signal.df();
    let plan_in = FftPair::new(n);
    let plan_out = FftPair::new(m);
    let scale = m as f64 / n as f64;
    let resample = |pol: &[Complex64]| {
        let mut spec = pol.to_vec();
        plan_in.forward(&mut spec);
        let mut out = vec![Complex64::default(); m];
        for (b, v) in out.iter_mut().enumerate() {
            let k = centred_index(b, m);
            if (k as f64 * df).abs() <= edge {
                *v = spec[k.rem_euclid(n as i64) as usize] * scale;
            }
        }
        plan_out.inverse(&mut out);
        out
    };
    Ok(DualPolSignal {
        x: resample(&base.x),
        y: resample(&base.y),
        sample_rate: target_sps as f64 * symbol_rate,
        inverted: signal.inverted,
    })
}

fn samples_per_symbol(signal: &DualPolSignal, symbol_rate: f64) -> Result<usize> {
    let sps = signal.sample_rate / symbol_rate;
    let r = sps.round();
    if r < 1.0 || (sps - r).abs() > 1e-9 * r || !signal.len().is_multiple_of(r as usize) {
        return Err(invalid_input(format!(
            "{} samples at {sps} samples/symbol is not a whole number of symbols",
            signal.len()
        )));
    }
    Ok(r as usize)
}

/// RRC matched filter followed by decimation to one sample per symbol,
/// taking samples `n * in_sps + timing_offset`.
pub fn matched_filter_downsample(
    signal: &DualPolSignal,
    rolloff: f64,
    in_sps: usize,
    timing_offset: usize,
) -> Result<PolSymbols> {
    if in_sps < 2 {
        return Err(invalid_config("matched filter needs at least 2 samples/symbol"));
    }
    if timing_offset >= in_sps {
        return Err(invalid_config(format!(
            "timing offset {timing_offset} beyond {in_sps} samples/symbol"
        )));
    }
    let n = signal.len();
    if !n.is_multiple_of(in_sps) {
        return Err(invalid_input(format!("{n} samples is not a whole number of symbols")));
    }
    let symbol_rate = signal.sample_rate / in_sps as f64;
    let df = signal.df();
    let mut filtered = signal.clone();
    filtered.filter_with(&FftPair::new(n), |b| {
        Complex64::new(
            root_raised_cosine(centred_index(b, n) as f64 * df, symbol_rate, rolloff),
            0.0,
        )
    });
    let pick = |pol: &[Complex64]| pol.iter().skip(timing_offset).step_by(in_sps).copied().collect();
    Ok(PolSymbols {
        x: pick(&filtered.x),
        y: pick(&filtered.y),
    })
}

/// Samplewise conjugation (the receiver half of the OPC-only chain).
pub fn conjugate_symbols(signal: &DualPolSignal) -> DualPolSignal {
    signal.conj()
}

/// Runs `chain` on a received full-field frame and returns the decided-on
/// symbol-rate samples of its channel.
///
/// `eq_config` supplies windowing and engine settings; its variant is taken
/// from the chain's scheme.
pub fn run_chain(
    received: &DualPolSignal,
    chain: &RxChain,
    link: &Link,
    eq_config: &EqualizerConfig,
) -> Result<PolSymbols> {
    if chain.scheme.uses_opc() != link.opc_after_span.is_some() {
        return Err(invalid_config(format!(
            "scheme {} {} a link with mid-link OPC",
            chain.scheme.name(),
            if chain.scheme.uses_opc() {
                "requires"
            } else {
                "cannot run on"
            }
        )));
    }
    let mut s = received.clone();
    let mut sps = samples_per_symbol(&s, chain.symbol_rate)?;
    for stage in chain.stages() {
        match stage {
            Stage::Equalize(variant) => {
                let cfg = EqualizerConfig {
                    variant,
                    samples_per_symbol: sps,
                    ..eq_config.clone()
                };
                s = Equalizer::new(link, &cfg, s.sample_rate)?.apply(&s)?;
            }
            Stage::Select => {
                s = select_channel(
                    &s,
                    chain.channel_index,
                    chain.num_channels,
                    chain.channel_spacing,
                    chain.symbol_rate,
                    chain.rolloff,
                    chain.select_sps,
                )?;
                sps = chain.select_sps;
            }
            Stage::Conjugate => s = conjugate_symbols(&s),
            Stage::ResidualEdc => s = edc(&s, 1.0, -net_dispersion(link)),
            Stage::MatchedFilter => return matched_filter_downsample(&s, chain.rolloff, sps, 0),
        }
    }
    Err(invalid_config("chain has no matched filter"))
}
