//! PM-16QAM WDM transmitter and the sampled dual-polarisation field model.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, invalid_input, Error, Result};
use crate::fft::{centred_index, FftPair};

/// Sampled complex baseband field on two orthogonal polarisations.
///
/// Samples are in units of sqrt(W): `|x|^2 + |y|^2` is instantaneous power.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPolSignal {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// Samples per second.
    pub sample_rate: f64,
    /// Set when the spectrum is mirrored relative to the transmitted
    /// multiplex (an odd number of conjugations).
    pub inverted: bool,
}

impl DualPolSignal {
    pub fn new(x: Vec<Complex64>, y: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(invalid_input(format!(
                "polarisation lengths must match and be non-zero (x={}, y={})",
                x.len(),
                y.len()
            )));
        }
        if !(sample_rate > 0.0) {
            return Err(invalid_input("sample rate must be positive"));
        }
        Ok(Self {
            x,
            y,
            sample_rate,
            inverted: false,
        })
    }

    pub fn zeros(n: usize, sample_rate: f64) -> Self {
        Self {
            x: vec![Complex64::default(); n],
            y: vec![Complex64::default(); n],
            sample_rate,
            inverted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Mean of `|x|^2 + |y|^2`, in W.
    pub fn power(&self) -> f64 {
        let e: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        e / self.len() as f64
    }

    /// Frequency resolution of the grid, Hz.
    pub fn df(&self) -> f64 {
        self.sample_rate / self.len() as f64
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.x.iter_mut().chain(self.y.iter_mut()) {
            *v *= factor;
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| v.conj()).collect(),
            y: self.y.iter().map(|v| v.conj()).collect(),
            inverted: !self.inverted,
            ..*self
        }
    }

    /// Swaps the two polarisations.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            ..*self
        }
    }

    /// Applies `filter(bin) -> gain` to both polarisations in the frequency domain.
    pub fn filter_with(&mut self, plan: &FftPair, mut filter: impl FnMut(usize) -> Complex64) {
        let n = self.len();
        let h: Vec<Complex64> = (0..n).map(&mut filter).collect();
        for pol in [&mut self.x, &mut self.y] {
            plan.forward(pol);
            for (v, g) in pol.iter_mut().zip(&h) {
                *v *= g;
            }
            plan.inverse(pol);
        }
    }

    pub fn extend_from(&mut self, other: &DualPolSignal, range: std::ops::Range<usize>) {
        self.x.extend_from_slice(&other.x[range.clone()]);
        self.y.extend_from_slice(&other.y[range]);
    }
}

/// Symbol sequences of a polarisation pair.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PolSymbols {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl PolSymbols {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn conj(&self) -> Self {
        Self {
            x: self.x.iter().map(|v| v.conj()).collect(),
            y: self.y.iter().map(|v| v.conj()).collect(),
        }
    }
}

/// Per-channel, per-polarisation transmitted symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolFrame {
    pub channels: Vec<PolSymbols>,
    pub symbol_rate: f64,
}

impl SymbolFrame {
    pub fn num_symbols(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }
}

/// Transmitter settings; defaults follow the 5 x 32 GBd reference system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxConfig {
    pub num_channels: usize,
    /// Baud.
    pub symbol_rate: f64,
    /// Hz.
    pub channel_spacing: f64,
    pub rolloff: f64,
    pub samples_per_symbol: usize,
    /// Launch power per channel, dBm.
    pub power_per_channel: f64,
    pub num_symbols: usize,
    pub seed: u64,
}

impl Default for TxConfig {
    fn default() -> Self {
        Self {
            num_channels: 5,
            symbol_rate: 32e9,
            channel_spacing: 32.5e9,
            rolloff: 0.01,
            samples_per_symbol: 6,
            power_per_channel: 0.0,
            num_symbols: 4096,
            seed: 1,
        }
    }
}

impl TxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_channels == 0 || self.num_symbols == 0 {
            return Err(invalid_config("need at least one channel and one symbol"));
        }
        if self.symbol_rate <= 0.0 || !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(invalid_config("symbol rate must be positive and 0 < rolloff <= 1"));
        }
        if self.num_channels > 1 && self.channel_spacing < self.symbol_rate * (1.0 + self.rolloff) * (1.0 - 1e-12) {
            return Err(invalid_config("channel spacing smaller than occupied bandwidth"));
        }
        let grid = self.samples_per_symbol as f64 * self.symbol_rate;
        let needed = self.num_channels as f64 * self.channel_spacing.max(self.symbol_rate);
        if self.num_channels > 1 && grid < needed * (1.0 - 1e-12) {
            return Err(invalid_config(format!(
                "sampling grid {grid:.3e} Hz does not cover the multiplex {needed:.3e} Hz"
            )));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.samples_per_symbol as f64 * self.symbol_rate
    }
}

/// Gray-coded 4-PAM levels indexed by two bits.
const GRAY_PAM4: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

/// The Gray-mapped 16-QAM constellation normalised to unit mean energy,
/// indexed by the 4-bit label (2 MSBs in-phase, 2 LSBs quadrature).
pub fn qam16_constellation() -> [Complex64; 16] {
    let norm = 1.0 / 10f64.sqrt();
    let mut pts = [Complex64::default(); 16];
    for (label, p) in pts.iter_mut().enumerate() {
        *p = Complex64::new(GRAY_PAM4[label >> 2], GRAY_PAM4[label & 3]) * norm;
    }
    pts
}

/// Draws i.i.d. uniform 16-QAM symbols for every channel and polarisation.
pub fn generate_symbols(n: usize, num_channels: usize, symbol_rate: f64, seed: u64) -> Result<SymbolFrame> {
    if n == 0 || num_channels == 0 {
        return Err(invalid_config("symbol count and channel count must be non-zero"));
    }
    let pts = qam16_constellation();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha20Rng| -> Vec<Complex64> { (0..n).map(|_| pts[rng.gen_range(0..16)]).collect() };
    let channels = (0..num_channels)
        .map(|_| {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            PolSymbols { x, y }
        })
        .collect();
    Ok(SymbolFrame { channels, symbol_rate })
}

/// Raised-cosine spectrum with unit passband gain at frequency `f`.
pub fn raised_cosine(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    let af = f.abs();
    let f1 = (1.0 - rolloff) * symbol_rate / 2.0;
    let f2 = (1.0 + rolloff) * symbol_rate / 2.0;
    if af <= f1 {
        1.0
    } else if af >= f2 {
        0.0
    } else {
        0.5 * (1.0 + (PI / (rolloff * symbol_rate) * (af - f1)).cos())
    }
}

/// Root-raised-cosine amplitude response with unit passband gain.
pub fn root_raised_cosine(f: f64, symbol_rate: f64, rolloff: f64) -> f64 {
    raised_cosine(f, symbol_rate, rolloff).sqrt()
}

/// Circular frequency-domain RRC shaping of one polarisation pair.
///
/// The output has the same mean power as the symbols; symbols sit on samples
/// `n * sps`.
pub fn rrc_shape_pair(symbols: &PolSymbols, symbol_rate: f64, rolloff: f64, sps: usize) -> Result<DualPolSignal> {
    if sps < 2 {
        return Err(Error::Aliasing(format!(
            "{sps} samples/symbol cannot hold an RRC pulse"
        )));
    }
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(invalid_config("rolloff must be in (0, 1]"));
    }
    let nsym = symbols.len();
    let n = nsym * sps;
    let fs = symbol_rate * sps as f64;
    let plan = FftPair::new(n);
    let gain: Vec<f64> = (0..n)
        .map(|b| {
            let f = centred_index(b, n) as f64 * fs / n as f64;
            sps as f64 * root_raised_cosine(f, symbol_rate, rolloff)
        })
        .collect();
    let shape = |syms: &[Complex64]| {
        let mut buf = vec![Complex64::default(); n];
        for (i, s) in syms.iter().enumerate() {
            buf[i * sps] = *s;
        }
        plan.forward(&mut buf);
        for (v, g) in buf.iter_mut().zip(&gain) {
            *v *= g;
        }
        plan.inverse(&mut buf);
        buf
    };
    DualPolSignal::new(shape(&symbols.x), shape(&symbols.y), fs)
}

/// Shapes every channel of a frame.
pub fn rrc_shape(frame: &SymbolFrame, rolloff: f64, sps: usize) -> Result<Vec<DualPolSignal>> {
    frame
        .channels
        .iter()
        .map(|c| rrc_shape_pair(c, frame.symbol_rate, rolloff, sps))
        .collect()
}

/// Centred channel offsets `k` for `n` channels (e.g. -2..=2 for five).
pub fn channel_offsets(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect()
}

/// Frequency-shifts a signal by `shift` Hz.
///
/// Uses an exact circular bin rotation when the shift is an integer number of
/// grid bins, otherwise a time-domain phase ramp.
pub fn frequency_shift(signal: &DualPolSignal, shift: f64) -> DualPolSignal {
    let n = signal.len();
    let bins = shift / signal.df();
    let mut out = signal.clone();
    if (bins - bins.round()).abs() < 1e-9 {
        let r = (bins.round() as i64).rem_euclid(n as i64) as usize;
        let plan = FftPair::new(n);
        for pol in [&mut out.x, &mut out.y] {
            plan.forward(pol);
            pol.rotate_right(r);
            plan.inverse(pol);
        }
    } else {
        let w = 2.0 * PI * shift / signal.sample_rate;
        for pol in [&mut out.x, &mut out.y] {
            for (t, v) in pol.iter_mut().enumerate() {
                *v *= Complex64::from_polar(1.0, w * t as f64);
            }
        }
    }
    out
}

/// Frequency-multiplexes channels at `k * spacing`, `k` centred on zero.
pub fn wdm_mux(channels: &[DualPolSignal], spacing: f64) -> Result<DualPolSignal> {
    let first = channels
        .first()
        .ok_or_else(|| invalid_config("no channels to multiplex"))?;
    let n = first.len();
    let fs = first.sample_rate;
    if channels.iter().any(|c| c.len() != n || c.sample_rate != fs) {
        return Err(invalid_config("channels must share length and sample rate"));
    }
    if channels.len() == 1 {
        return Ok(first.clone());
    }
    let offsets = channel_offsets(channels.len());
    let edge = offsets.last().unwrap() * spacing + spacing / 2.0;
    if edge > fs / 2.0 * (1.0 + 1e-12) {
        return Err(invalid_config(format!(
            "multiplex edge {edge:.3e} Hz exceeds the grid Nyquist {:.3e} Hz",
            fs / 2.0
        )));
    }
    let mut out = DualPolSignal::zeros(n, fs);
    for (c, k) in channels.iter().zip(offsets) {
        let shifted = frequency_shift(c, k * spacing);
        for (o, s) in out.x.iter_mut().zip(&shifted.x) {
            *o += s;
        }
        for (o, s) in out.y.iter_mut().zip(&shifted.y) {
            *o += s;
        }
    }
    Ok(out)
}

/// Converts dBm to W.
pub fn dbm_to_watt(p_dbm: f64) -> f64 {
    10f64.powf((p_dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(p: f64) -> f64 {
    10.0 * p.log10() + 30.0
}

/// Rescales so the total power is `num_channels` times `p_dbm` per channel.
pub fn set_power(signal: &DualPolSignal, p_dbm: f64, num_channels: usize) -> Result<DualPolSignal> {
    let p = signal.power();
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid_input("cannot set the power of a zero-power signal"));
    }
    let target = num_channels as f64 * dbm_to_watt(p_dbm);
    let mut out = signal.clone();
    out.scale((target / p).sqrt());
    Ok(out)
}

/// Builds the full transmitted multiplex for `cfg` together with its symbols.
pub fn transmit(cfg: &TxConfig) -> Result<(DualPolSignal, SymbolFrame)> {
    cfg.validate()?;
    let frame = generate_symbols(cfg.num_symbols, cfg.num_channels, cfg.symbol_rate, cfg.seed)?;
    let shaped = rrc_shape(&frame, cfg.rolloff, cfg.samples_per_symbol)?;
    let mux = wdm_mux(&shaped, cfg.channel_spacing)?;
    let signal = set_power(&mux, cfg.power_per_channel, cfg.num_channels)?;
    Ok((signal, frame))
}
