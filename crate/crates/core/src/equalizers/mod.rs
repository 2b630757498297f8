//! Receiver-side compensation: EDC, single-step and per-span VSFE, the VAO
//! equalizer, ideal DBP, and the overlap-save windowing driver.

mod fast;
mod tensor;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{split_step, Link};
use crate::error::{invalid_config, Error, Result};
use crate::fft::{angular_frequencies, FftPair};
use crate::kernels::{build_kernel_tensor, FrequencyGrid, KernelMode, KernelParams, KernelPath, KernelTensor};
use crate::waveform::DualPolSignal;

pub use fast::FastVolterra;
pub use tensor::double_sum_correction;

/// Equalizer chain selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Edc,
    VsfeSingle,
    VsfeRecursive,
    Vao,
    DbpIdeal,
}

/// How the mixing index `k + i - l` and its phase mismatch are treated at the
/// window grid edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMode {
    /// Index wrapped modulo N, mismatch from the unwrapped `(k-l)(i-l)`.
    Cyclic,
    /// Products falling off the grid are dropped.
    Clamped,
    /// Index wrapped and mismatch taken from the wrapped grid frequencies,
    /// the aliasing of a split-step simulation on the same periodic grid.
    Periodic,
}

/// Which implementation evaluates the double sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Quadrature over the dispersion path with one FFT cube per node.
    Fast,
    /// O(N^3) direct sum over the memoised kernel tensor.
    Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EqualizerConfig {
    pub variant: Variant,
    pub window_symbols: usize,
    pub samples_per_symbol: usize,
    pub discard_per_side: usize,
    pub dbp_steps_per_span: usize,
    pub index_mode: IndexMode,
    pub engine: Engine,
    /// Node-count scale of the fast engine's quadrature.
    pub quadrature_oversampling: f64,
    /// Energy renormalisation after each span of the recursive VSFE.
    pub recursive_renormalize: bool,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Edc,
            window_symbols: 512,
            samples_per_symbol: 6,
            discard_per_side: 128,
            dbp_steps_per_span: 100,
            index_mode: IndexMode::Periodic,
            engine: Engine::Fast,
            quadrature_oversampling: 1.0,
            recursive_renormalize: true,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_symbols == 0 || self.samples_per_symbol == 0 {
            return Err(invalid_config("window and samples/symbol must be non-zero"));
        }
        if 2 * self.discard_per_side >= self.window_symbols {
            return Err(invalid_config(format!(
                "discard {} per side leaves nothing of a {}-symbol window",
                self.discard_per_side, self.window_symbols
            )));
        }
        if !(self.window_symbols * self.samples_per_symbol).is_multiple_of(2) {
            return Err(invalid_config("window length in samples must be even"));
        }
        if self.variant == Variant::DbpIdeal && self.dbp_steps_per_span == 0 {
            return Err(invalid_config("DBP needs at least one step per span"));
        }
        if !(self.quadrature_oversampling > 0.0) {
            return Err(invalid_config("quadrature oversampling must be positive"));
        }
        Ok(())
    }

    pub fn window_samples(&self) -> usize {
        self.window_symbols * self.samples_per_symbol
    }

    pub fn discard_samples(&self) -> usize {
        self.discard_per_side * self.samples_per_symbol
    }
}

/// Window length for a channel memory of `memory` symbols: four times the
/// memory rounded up to a power of two, at most 1024 symbols.
pub fn window_for_memory(memory: f64) -> usize {
    let target = (4.0 * memory).ceil().max(1.0) as usize;
    target.next_power_of_two().min(1024)
}

/// Per-bin third-order correction of a window.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearCorrection {
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl NonlinearCorrection {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|v| v.norm_sqr()).sum()
    }
}

/// Electronic dispersion compensation over `length` metres.
pub fn edc(signal: &DualPolSignal, beta2: f64, length: f64) -> DualPolSignal {
    if length == 0.0 || beta2 == 0.0 {
        return signal.clone();
    }
    let w = angular_frequencies(signal.len(), signal.sample_rate);
    let mut out = signal.clone();
    let mut idx = 0;
    let n = signal.len();
    out.filter_with(&FftPair::new(n), |_| {
        let g = Complex64::from_polar(1.0, -beta2 * w[idx] * w[idx] * length / 2.0);
        idx = (idx + 1) % n;
        g
    });
    out
}

/// Dispersion (beta2 * length, s^2) accumulated over the link at the
/// receiver, accounting for the sign flip of an OPC.
pub fn net_dispersion(link: &Link) -> f64 {
    let mut acc = 0.0;
    for (i, (s, _)) in link.spans.iter().enumerate() {
        if link.opc_after_span == Some(i) {
            acc = -acc;
        }
        acc += s.beta2 * s.length;
    }
    if link.opc_after_span == Some(link.spans.len()) {
        acc = -acc;
    }
    acc
}

fn uniform_params(link: &Link) -> Result<KernelParams> {
    let (first, _) = link
        .spans
        .first()
        .ok_or_else(|| invalid_config("equalizer needs a link with at least one span"))?;
    if link.spans.iter().any(|(s, _)| s != first) {
        return Err(invalid_config("Volterra kernels assume identical spans"));
    }
    Ok(KernelParams::from_span(first, link.spans.len()))
}

/// A ready-to-run double-sum evaluator of one kernel on one window grid.
#[derive(Clone, Debug)]
pub enum CorrectionEngine {
    Fast(FastVolterra),
    Tensor(KernelTensor, IndexMode),
}

impl CorrectionEngine {
    pub fn new(kernel: KernelMode, params: &KernelParams, grid: FrequencyGrid, cfg: &EqualizerConfig) -> Result<Self> {
        match cfg.engine {
            Engine::Fast => {
                let path = KernelPath::from_mode(kernel, params)?;
                Ok(Self::Fast(FastVolterra::new(
                    &path,
                    grid,
                    params.beta2,
                    cfg.index_mode,
                    cfg.quadrature_oversampling,
                )?))
            }
            Engine::Tensor => Ok(Self::Tensor(
                build_kernel_tensor(grid, *params, kernel)?,
                cfg.index_mode,
            )),
        }
    }

    pub fn correction(&self, sx: &[Complex64], sy: &[Complex64], gamma: f64) -> Result<NonlinearCorrection> {
        match self {
            Self::Fast(f) => f.correction(sx, sy, gamma),
            Self::Tensor(t, mode) => double_sum_correction(sx, sy, t, gamma, *mode),
        }
    }
}

/// Single-step VSFE correction of window spectra (kernel `e^{-aL} F' Xi*(N)`).
pub fn vsfe_correction(
    sx: &[Complex64],
    sy: &[Complex64],
    tensor: &KernelTensor,
    gamma: f64,
    mode: IndexMode,
) -> Result<NonlinearCorrection> {
    if !matches!(tensor.mode, KernelMode::VsfeBackward | KernelMode::PerSpan) {
        return Err(invalid_config(format!(
            "VSFE needs a backward VSFE kernel, got {:?}",
            tensor.mode
        )));
    }
    double_sum_correction(sx, sy, tensor, gamma, mode)
}

/// VAO correction of window spectra received through a mid-link OPC link
/// (kernel `Xi*(N/2) G`). The corrected window must still be conjugated.
pub fn vao_correction(
    sx: &[Complex64],
    sy: &[Complex64],
    tensor: &KernelTensor,
    gamma: f64,
    mode: IndexMode,
) -> Result<NonlinearCorrection> {
    if !tensor.mode.uses_opc() {
        return Err(invalid_config(format!(
            "VAO needs an OPC kernel, got {:?}",
            tensor.mode
        )));
    }
    double_sum_correction(sx, sy, tensor, gamma, mode)
}

fn spectra(window: &DualPolSignal, plan: &FftPair) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut x = window.x.clone();
    let mut y = window.y.clone();
    plan.forward(&mut x);
    plan.forward(&mut y);
    (x, y)
}

fn apply_correction(
    window: &DualPolSignal,
    engine: &CorrectionEngine,
    gamma: f64,
    plan: &FftPair,
) -> Result<DualPolSignal> {
    let (mut x, mut y) = spectra(window, plan);
    let a = engine.correction(&x, &y, gamma)?;
    for (s, d) in x.iter_mut().zip(&a.x) {
        *s += d;
    }
    for (s, d) in y.iter_mut().zip(&a.y) {
        *s += d;
    }
    plan.inverse(&mut x);
    plan.inverse(&mut y);
    Ok(DualPolSignal { x, y, ..*window })
}

fn energy(s: &DualPolSignal) -> f64 {
    s.x.iter().chain(&s.y).map(|v| v.norm_sqr()).sum()
}

/// Applies `transform` to overlapping windows of a periodic frame and keeps
/// the central `window - 2 discard` samples of each. Windows wrap around the
/// frame end, so every input sample is kept exactly once.
pub fn windowed_process<F>(signal: &DualPolSignal, window: usize, discard: usize, transform: F) -> Result<DualPolSignal>
where
    F: Fn(&DualPolSignal) -> Result<DualPolSignal> + Sync,
{
    let n = signal.len();
    if window == 0 || 2 * discard >= window {
        return Err(invalid_config(format!(
            "discard {discard} too large for a {window}-sample window"
        )));
    }
    if n < window {
        return Err(invalid_config(format!(
            "signal of {n} samples is shorter than the {window}-sample window"
        )));
    }
    let step = window - 2 * discard;
    let count = n.div_ceil(step);
    let pieces: Vec<Result<DualPolSignal>> = (0..count)
        .into_par_iter()
        .map(|j| {
            let start = (j * step + n - discard % n) % n;
            let mut w = DualPolSignal {
                x: Vec::with_capacity(window),
                y: Vec::with_capacity(window),
                ..*signal
            };
            for t in 0..window {
                let s = (start + t) % n;
                w.x.push(signal.x[s]);
                w.y.push(signal.y[s]);
            }
            transform(&w)
        })
        .collect();
    let mut out = DualPolSignal {
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        ..*signal
    };
    for (j, p) in pieces.into_iter().enumerate() {
        let p = p?;
        if p.len() != window {
            return Err(invalid_config("window transform changed the window length"));
        }
        let keep = step.min(n - j * step);
        out.extend_from(&p, discard..discard + keep);
    }
    Ok(out)
}

/// Configured equalizer for one link, window grid and variant.
#[derive(Clone, Debug)]
pub struct Equalizer {
    pub config: EqualizerConfig,
    pub link: Link,
    gamma: f64,
    engine: Option<CorrectionEngine>,
    plan: FftPair,
    params: Option<KernelParams>,
}

impl Equalizer {
    pub fn new(link: &Link, config: &EqualizerConfig, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        let n = config.window_samples();
        let grid = FrequencyGrid::for_window(n, sample_rate)?;
        let (engine, params) = match config.variant {
            Variant::VsfeSingle | Variant::Vao | Variant::VsfeRecursive => {
                if config.variant == Variant::Vao && link.opc_after_span.is_none() {
                    return Err(invalid_config("VAO requires a link with mid-link OPC"));
                }
                if config.variant != Variant::Vao && link.opc_after_span.is_some() {
                    return Err(invalid_config("VSFE kernels describe links without OPC"));
                }
                let p = uniform_params(link)?;
                let mode = match config.variant {
                    Variant::VsfeSingle => KernelMode::VsfeBackward,
                    Variant::Vao => KernelMode::VaoBackward,
                    _ => KernelMode::PerSpan,
                };
                (Some(CorrectionEngine::new(mode, &p, grid, config)?), Some(p))
            }
            _ => (None, None),
        };
        let gamma = link.spans.first().map_or(0.0, |(s, _)| s.gamma);
        Ok(Self {
            config: config.clone(),
            link: link.clone(),
            gamma,
            engine,
            plan: FftPair::new(n),
            params,
        })
    }

    /// Transform applied to each window: the nonlinear correction only, plus
    /// the energy renormalisation of one recursive VSFE span.
    pub fn window_transform(&self, window: &DualPolSignal) -> Result<DualPolSignal> {
        let engine = self
            .engine
            .as_ref()
            .ok_or_else(|| invalid_config("variant has no window transform"))?;
        match self.config.variant {
            Variant::VsfeSingle | Variant::Vao => apply_correction(window, engine, self.gamma, &self.plan),
            Variant::VsfeRecursive => {
                let before = energy(window);
                let mut w = apply_correction(window, engine, self.gamma, &self.plan)?;
                if self.config.recursive_renormalize {
                    let after = energy(&w);
                    if after > 0.0 {
                        w.scale((before / after).sqrt());
                    }
                }
                Ok(w)
            }
            _ => Err(invalid_config("variant has no window transform")),
        }
    }

    /// Runs the equalizer on a received frame, returning a field in the
    /// transmitter's frame (dispersion removed, OPC conjugation undone).
    pub fn apply(&self, signal: &DualPolSignal) -> Result<DualPolSignal> {
        let net = net_dispersion(&self.link);
        match self.config.variant {
            Variant::Edc => Ok(edc(signal, 1.0, net)),
            Variant::DbpIdeal => dbp_ideal(signal, &self.link, self.config.dbp_steps_per_span),
            Variant::VsfeSingle => {
                let w = self.windowed(signal)?;
                Ok(edc(&w, 1.0, net))
            }
            Variant::VsfeRecursive => {
                let p = self.params.expect("recursive VSFE has kernel parameters");
                let mut s = signal.clone();
                for _ in 0..p.num_spans {
                    s = self.windowed(&s)?;
                    s = edc(&s, p.beta2, p.span_length);
                }
                Ok(s)
            }
            Variant::Vao => {
                let w = self.windowed(signal)?.conj();
                // conjugation flips the sign of any residual dispersion
                Ok(edc(&w, 1.0, -net))
            }
        }
    }

    pub fn windowed(&self, signal: &DualPolSignal) -> Result<DualPolSignal> {
        windowed_process(
            signal,
            self.config.window_samples(),
            self.config.discard_samples(),
            |w| self.window_transform(w),
        )
    }
}

/// Ideal digital backpropagation: the link run in reverse with negated
/// attenuation, dispersion and nonlinearity, amplifier gains removed and any
/// OPC re-applied at its mirrored position.
pub fn dbp_ideal(signal: &DualPolSignal, link: &Link, steps_per_span: usize) -> Result<DualPolSignal> {
    link.validate()?;
    if steps_per_span == 0 {
        return Err(invalid_config("DBP needs at least one step per span"));
    }
    let n = link.spans.len();
    let mut s = signal.clone();
    if link.opc_after_span == Some(n) {
        s = s.conj();
    }
    for i in (0..n).rev() {
        let (span, amp) = &link.spans[i];
        s.scale(10f64.powf(-amp.gain / 20.0));
        s = split_step(&s, -span.alpha, -span.beta2, -span.gamma, span.length, steps_per_span);
        if link.opc_after_span == Some(i) {
            s = s.conj();
        }
    }
    Ok(s)
}

/// Smallest per-side discard (in symbols, a multiple of `step`) after which
/// increasing the discard by `step` changes `metric` by less than
/// `tolerance_db`.
pub fn discard_calibration<T, M>(
    signal: &DualPolSignal,
    transform: T,
    config: &EqualizerConfig,
    metric: M,
    tolerance_db: f64,
    step: usize,
) -> Result<usize>
where
    T: Fn(&DualPolSignal) -> Result<DualPolSignal> + Sync,
    M: Fn(&DualPolSignal) -> Result<f64>,
{
    let sps = config.samples_per_symbol;
    let w = config.window_samples();
    calibrate_discard_with(
        config.window_symbols,
        |d| metric(&windowed_process(signal, w, d * sps, &transform)?),
        tolerance_db,
        step,
    )
}

/// Discard search over an arbitrary `eval(discard_symbols) -> metric_db`,
/// e.g. the SNR of a whole receiver chain.
pub fn calibrate_discard_with<E>(window_symbols: usize, mut eval: E, tolerance_db: f64, step: usize) -> Result<usize>
where
    E: FnMut(usize) -> Result<f64>,
{
    if step == 0 {
        return Err(invalid_config("calibration step must be non-zero"));
    }
    let mut d = 0;
    let mut current = eval(d)?;
    while 2 * (d + step) < window_symbols {
        let next = eval(d + step)?;
        if (next - current).abs() < tolerance_db {
            return Ok(d);
        }
        d += step;
        current = next;
    }
    Err(Error::NoConvergence(format!(
        "metric still moving at discard {d} of a {window_symbols}-symbol window"
    )))
}
