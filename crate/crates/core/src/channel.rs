//! Manakov split-step fiber propagation, EDFA amplification and ideal OPC.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, Result};
use crate::fft::{angular_frequencies, FftPair};
use crate::waveform::DualPolSignal;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Carrier frequency used for ASE photon energy, Hz.
pub const DEFAULT_REFERENCE_FREQUENCY: f64 = 193.4e12;
pub const REFERENCE_WAVELENGTH: f64 = 1550e-9;
/// Manakov averaging factor on the nonlinear coefficient.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

/// Converts dB/km to power attenuation in Np/m.
pub fn db_per_km_to_np_per_m(a: f64) -> f64 {
    a * std::f64::consts::LN_10 / 10.0 / 1e3
}

/// Converts dispersion D in ps/(nm km) to beta2 in s^2/m at `wavelength`.
pub fn dispersion_to_beta2(d_ps_nm_km: f64, wavelength: f64) -> f64 {
    let d = d_ps_nm_km * 1e-6; // s/m^2
    -d * wavelength * wavelength / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

/// Physical parameters of one fiber span.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSpan {
    /// Power attenuation, Np/m.
    pub alpha: f64,
    /// Group-velocity dispersion, s^2/m.
    pub beta2: f64,
    /// Nonlinear coefficient, 1/(W m).
    pub gamma: f64,
    /// m.
    pub length: f64,
}

impl FiberSpan {
    /// Builds a span from engineering units (dB/km, ps/(nm km), 1/(W km), m).
    pub fn from_engineering(alpha_db_km: f64, d_ps_nm_km: f64, gamma_w_km: f64, length: f64) -> Self {
        Self {
            alpha: db_per_km_to_np_per_m(alpha_db_km),
            beta2: dispersion_to_beta2(d_ps_nm_km, REFERENCE_WAVELENGTH),
            gamma: gamma_w_km * 1e-3,
            length,
        }
    }

    /// Standard single-mode fiber: 0.2 dB/km, 17 ps/(nm km), 1.2 /(W km).
    pub fn ssmf(length: f64) -> Self {
        Self::from_engineering(0.2, 17.0, 1.2, length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.gamma >= 0.0) || !(self.alpha >= 0.0) || !self.beta2.is_finite() {
            return Err(invalid_config(format!("invalid fiber span {self:?}")));
        }
        Ok(())
    }

    /// Span loss in dB.
    pub fn loss_db(&self) -> f64 {
        10.0 * self.alpha * self.length / std::f64::consts::LN_10
    }

    /// Effective length (1 - e^{-aL}) / a.
    pub fn effective_length(&self) -> f64 {
        if self.alpha == 0.0 {
            self.length
        } else {
            -(-self.alpha * self.length).exp_m1() / self.alpha
        }
    }
}

/// Lumped EDFA.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Amplifier {
    /// dB.
    pub gain: f64,
    /// dB.
    pub noise_figure: f64,
    pub ase_enabled: bool,
    /// Hz.
    pub reference_frequency: f64,
}

impl Amplifier {
    /// An amplifier that exactly compensates the loss of `span`.
    pub fn compensating(span: &FiberSpan, noise_figure: f64, ase_enabled: bool) -> Self {
        Self {
            gain: span.loss_db(),
            noise_figure,
            ase_enabled,
            reference_frequency: DEFAULT_REFERENCE_FREQUENCY,
        }
    }

    pub fn transparent() -> Self {
        Self {
            gain: 0.0,
            noise_figure: 0.0,
            ase_enabled: false,
            reference_frequency: DEFAULT_REFERENCE_FREQUENCY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain >= 0.0) {
            return Err(invalid_config("amplifier gain must be >= 0 dB"));
        }
        if self.ase_enabled && self.noise_figure < 3.0 {
            return Err(invalid_config(format!(
                "noise figure {} dB is below the 3 dB quantum limit",
                self.noise_figure
            )));
        }
        Ok(())
    }

    pub fn spontaneous_emission_factor(&self) -> f64 {
        10f64.powf(self.noise_figure / 10.0) / 2.0
    }

    /// ASE power spectral density per polarisation, W/Hz.
    pub fn ase_psd(&self) -> f64 {
        let g = 10f64.powf(self.gain / 10.0);
        (g - 1.0) * self.spontaneous_emission_factor() * PLANCK * self.reference_frequency
    }

    /// Complex noise variance per sample and polarisation on a grid at `sample_rate`.
    pub fn ase_variance(&self, sample_rate: f64) -> f64 {
        if self.ase_enabled {
            self.ase_psd() * sample_rate
        } else {
            0.0
        }
    }
}

/// A chain of spans, each followed by its amplifier, with optional OPC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub spans: Vec<(FiberSpan, Amplifier)>,
    /// OPC is applied after this many spans.
    pub opc_after_span: Option<usize>,
    pub steps_per_span: usize,
}

impl Link {
    /// `n` identical spans with loss-compensating amplifiers.
    pub fn uniform(
        n: usize,
        span: FiberSpan,
        noise_figure: f64,
        ase_enabled: bool,
        mid_link_opc: bool,
        steps_per_span: usize,
    ) -> Self {
        let amp = Amplifier::compensating(&span, noise_figure, ase_enabled);
        Self {
            spans: vec![(span, amp); n],
            opc_after_span: mid_link_opc.then_some(n / 2),
            steps_per_span,
        }
    }

    pub fn num_spans(&self) -> usize {
        self.spans.len()
    }

    pub fn total_length(&self) -> f64 {
        self.spans.iter().map(|(s, _)| s.length).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_span == 0 {
            return Err(invalid_config("steps_per_span must be >= 1"));
        }
        for (s, a) in &self.spans {
            s.validate()?;
            a.validate()?;
        }
        if let Some(k) = self.opc_after_span {
            let n = self.spans.len();
            if !n.is_multiple_of(2) || k != n / 2 {
                return Err(invalid_config(format!(
                    "mid-link OPC needs an even span count and placement at N/2 (spans={n}, opc after {k})"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric split-step integration of the Manakov equation.
///
/// Parameters are used as-is, so negated values integrate the inverse channel.
pub fn split_step(
    signal: &DualPolSignal,
    alpha: f64,
    beta2: f64,
    gamma: f64,
    length: f64,
    steps: usize,
) -> DualPolSignal {
    let n = signal.len();
    let steps = steps.max(1);
    let h = length / steps as f64;
    let w = angular_frequencies(n, signal.sample_rate);
    let lin = |dz: f64| -> Vec<Complex64> {
        w.iter()
            .map(|&wk| Complex64::from_polar((-alpha * dz / 2.0).exp(), beta2 / 2.0 * wk * wk * dz))
            .collect()
    };
    let half = lin(h / 2.0);
    let full = lin(h);
    // nonlinear phase integrated over the step around its midpoint power
    let h_nl = if alpha == 0.0 {
        h
    } else {
        2.0 * (alpha * h / 2.0).sinh() / alpha
    };
    let phi = MANAKOV_FACTOR * gamma * h_nl;

    let plan = FftPair::new(n);
    let mut scratch = vec![Complex64::default(); plan.scratch_len()];
    let mut x = signal.x.clone();
    let mut y = signal.y.clone();
    let inv_n = 1.0 / n as f64;
    let apply = |buf: &mut [Complex64], op: &[Complex64]| {
        for (v, g) in buf.iter_mut().zip(op) {
            *v *= g;
        }
    };

    plan.forward_with_scratch(&mut x, &mut scratch);
    plan.forward_with_scratch(&mut y, &mut scratch);
    apply(&mut x, &half);
    apply(&mut y, &half);
    if gamma == 0.0 {
        // the remaining full linear steps compose to one operator
        let rest = lin(length - h / 2.0);
        apply(&mut x, &rest);
        apply(&mut y, &rest);
    } else {
        for step in 0..steps {
            plan.inverse_raw_with_scratch(&mut x, &mut scratch);
            plan.inverse_raw_with_scratch(&mut y, &mut scratch);
            for (a, b) in x.iter_mut().zip(y.iter_mut()) {
                *a *= inv_n;
                *b *= inv_n;
                let rot = Complex64::from_polar(1.0, phi * (a.norm_sqr() + b.norm_sqr()));
                *a *= rot;
                *b *= rot;
            }
            plan.forward_with_scratch(&mut x, &mut scratch);
            plan.forward_with_scratch(&mut y, &mut scratch);
            let op = if step + 1 == steps { &half } else { &full };
            apply(&mut x, op);
            apply(&mut y, op);
        }
    }
    plan.inverse_raw_with_scratch(&mut x, &mut scratch);
    plan.inverse_raw_with_scratch(&mut y, &mut scratch);
    for v in x.iter_mut().chain(y.iter_mut()) {
        *v *= inv_n;
    }
    DualPolSignal { x, y, ..*signal }
}

/// Propagates through one span.
pub fn ssfm_propagate(signal: &DualPolSignal, span: &FiberSpan, steps: usize) -> Result<DualPolSignal> {
    span.validate()?;
    if steps == 0 {
        return Err(invalid_config("steps must be >= 1"));
    }
    Ok(split_step(
        signal,
        span.alpha,
        span.beta2,
        span.gamma,
        span.length,
        steps,
    ))
}

/// Applies amplifier gain and, if enabled, ASE noise.
pub fn amplify<R: Rng + ?Sized>(signal: &DualPolSignal, amp: &Amplifier, rng: &mut R) -> DualPolSignal {
    let mut out = signal.clone();
    if amp.gain != 0.0 {
        out.scale(10f64.powf(amp.gain / 20.0));
    }
    let var = amp.ase_variance(signal.sample_rate);
    if var > 0.0 {
        let sigma = (var / 2.0).sqrt();
        for v in out.x.iter_mut().chain(out.y.iter_mut()) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * sigma;
        }
    }
    out
}

/// Ideal optical phase conjugation: time-domain conjugate of both polarisations.
pub fn opc_conjugate(signal: &DualPolSignal) -> DualPolSignal {
    signal.conj()
}

/// Propagates over the full link, returning the received field.
pub fn propagate_link<R: Rng + ?Sized>(signal: &DualPolSignal, link: &Link, rng: &mut R) -> Result<DualPolSignal> {
    link.validate()?;
    let mut s = signal.clone();
    if link.opc_after_span == Some(0) {
        s = opc_conjugate(&s);
    }
    for (i, (span, amp)) in link.spans.iter().enumerate() {
        s = split_step(&s, span.alpha, span.beta2, span.gamma, span.length, link.steps_per_span);
        s = amplify(&s, amp, rng);
        if link.opc_after_span == Some(i + 1) {
            s = opc_conjugate(&s);
        }
    }
    Ok(s)
}
