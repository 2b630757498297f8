//! Closed-form third-order Volterra kernels of multi-span links, with and
//! without mid-link OPC, and their discretisation on a frequency grid.
//!
//! All kernels are functions of `x = beta2 * dOmega` through
//! `dOmega = (w - w2)(w1 - w2)`. Sign conventions follow the field model
//! `A(w, z) = exp(j beta2 w^2 z / 2 - alpha z / 2) U(w, z)` used by the
//! split-step channel, in which first-order perturbation reads
//! `U(L) = U(0) + j (8/9) gamma * sum K(x) U*(w1) U(w2) U(w + w1 - w2)`.

pub mod path;
pub mod profile;

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::FiberSpan;
use crate::error::{invalid_config, Result};

pub use path::{KernelPath, PathSegment, QuadratureNode};
pub use profile::{
    lambda_sum, psi_sum, residual_kernel_gamma, symmetry_predicates, PowerProfile, ProfileSegment, SymmetryReport,
};

/// Parameters shared by every kernel of a uniform multi-span link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Power attenuation, Np/m.
    pub alpha: f64,
    /// s^2/m.
    pub beta2: f64,
    /// m.
    pub span_length: f64,
    pub num_spans: usize,
}

impl KernelParams {
    pub fn from_span(span: &FiberSpan, num_spans: usize) -> Self {
        Self {
            alpha: span.alpha,
            beta2: span.beta2,
            span_length: span.length,
            num_spans,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_spans == 0 || !(self.span_length > 0.0) {
            return Err(invalid_config(
                "kernel parameters need num_spans >= 1 and span_length > 0",
            ));
        }
        Ok(())
    }

    fn x(&self, d_omega: f64) -> f64 {
        self.beta2 * d_omega
    }
}

/// `(e^w - 1) / w`, accurate near `w = 0`.
pub(crate) fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 1e-3 {
        // Horner form of sum w^n / (n+1)!
        let mut acc = Complex64::new(1.0, 0.0);
        for n in (1..=10).rev() {
            acc = acc * w / (n as f64 + 1.0) + 1.0;
        }
        acc
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `int_0^len exp(rate * u) du`.
pub(crate) fn exp_integral(rate: Complex64, len: f64) -> Complex64 {
    phi1(rate * len) * len
}

/// Single-span four-wave-mixing efficiency
/// `F = int_0^L e^{-alpha z} e^{j x z} dz = (1 - e^{-alpha L} e^{j x L}) / (alpha - j x)`.
pub fn fwm_efficiency(d_omega: f64, p: &KernelParams) -> Complex64 {
    exp_integral(Complex64::new(-p.alpha, p.x(d_omega)), p.span_length)
}

/// Backward-direction efficiency
/// `F' = (1 - e^{alpha L} e^{-j x L}) / (j x - alpha) = int_0^L e^{alpha z} e^{-j x z} dz`.
pub fn fwm_efficiency_backward(d_omega: f64, p: &KernelParams) -> Complex64 {
    exp_integral(Complex64::new(p.alpha, -p.x(d_omega)), p.span_length)
}

/// Phased-array factor `sum_{n=1}^{N} e^{j x (n-1) L}` over `num_spans` spans.
pub fn phased_array(num_spans: usize, d_omega: f64, p: &KernelParams) -> Complex64 {
    let step = Complex64::from_polar(1.0, p.x(d_omega) * p.span_length);
    let mut term = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::default();
    for _ in 0..num_spans {
        acc += term;
        term *= step;
    }
    acc
}

/// Characteristic kernel of an EDFA link with mid-link OPC.
///
/// Evaluated as `e^{-j x L} F(x) - F*(x)`, which equals the two-fraction closed
/// form but has no removable singularity at `x = 0` when `alpha = 0`.
pub fn opc_kernel_g(d_omega: f64, p: &KernelParams) -> Complex64 {
    let f = fwm_efficiency(d_omega, p);
    Complex64::from_polar(1.0, -p.x(d_omega) * p.span_length) * f - f.conj()
}

/// Backward counterpart `G' = e^{alpha L} G*`.
pub fn opc_kernel_g_backward(d_omega: f64, p: &KernelParams) -> Complex64 {
    opc_kernel_g(d_omega, p).conj() * (p.alpha * p.span_length).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardKernel {
    FPrime,
    GPrime,
}

pub fn backward_kernels(d_omega: f64, p: &KernelParams, which: BackwardKernel) -> Complex64 {
    match which {
        BackwardKernel::FPrime => fwm_efficiency_backward(d_omega, p),
        BackwardKernel::GPrime => opc_kernel_g_backward(d_omega, p),
    }
}

/// Which channel kernel a tensor holds.
///
/// Forward kernels describe the link from the transmitter's dispersion frame.
/// Backward kernels act on the received mixing products in the receiver frame
/// (before dispersion compensation for the VSFE variants; the OPC link has no
/// net dispersion).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMode {
    /// `F * Xi(N)`.
    VsfeForward,
    /// `e^{-alpha L} F' * Xi*(N)`.
    VsfeBackward,
    /// `Xi*(N/2) * G`.
    VaoForward,
    /// `e^{-alpha L} Xi*(N/2) * G'(-dOmega)`.
    VaoBackward,
    /// Single-span backward kernel `e^{-alpha L} F'`.
    PerSpan,
}

impl KernelMode {
    pub fn uses_opc(self) -> bool {
        matches!(self, KernelMode::VaoForward | KernelMode::VaoBackward)
    }
}

/// Evaluates the kernel selected by `mode` at `d_omega`.
pub fn kernel_value(mode: KernelMode, p: &KernelParams, d_omega: f64) -> Complex64 {
    let decay = (-p.alpha * p.span_length).exp();
    let half = p.num_spans / 2;
    match mode {
        KernelMode::VsfeForward => fwm_efficiency(d_omega, p) * phased_array(p.num_spans, d_omega, p),
        KernelMode::VsfeBackward => {
            fwm_efficiency_backward(d_omega, p) * phased_array(p.num_spans, d_omega, p).conj() * decay
        }
        KernelMode::VaoForward => phased_array(half, d_omega, p).conj() * opc_kernel_g(d_omega, p),
        KernelMode::VaoBackward => phased_array(half, d_omega, p).conj() * opc_kernel_g_backward(-d_omega, p) * decay,
        KernelMode::PerSpan => fwm_efficiency_backward(d_omega, p) * decay,
    }
}

/// Discrete angular-frequency grid, indices `-N/2 ..= N/2 - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub n_points: usize,
    /// rad/s.
    pub delta_omega: f64,
}

impl FrequencyGrid {
    pub fn new(n_points: usize, delta_omega: f64) -> Result<Self> {
        if n_points == 0 || !n_points.is_multiple_of(2) || !(delta_omega > 0.0) {
            return Err(invalid_config(format!(
                "frequency grid needs an even, non-zero size and positive resolution (n={n_points}, dw={delta_omega})"
            )));
        }
        Ok(Self { n_points, delta_omega })
    }

    /// Grid of an `n`-sample window at `sample_rate`: `dw = 2 pi / T`.
    pub fn for_window(n: usize, sample_rate: f64) -> Result<Self> {
        Self::new(n, 2.0 * std::f64::consts::PI * sample_rate / n as f64)
    }

    pub fn min_index(&self) -> i64 {
        -(self.n_points as i64) / 2
    }

    pub fn max_index(&self) -> i64 {
        self.n_points as i64 / 2 - 1
    }

    pub fn omega(&self, k: i64) -> f64 {
        k as f64 * self.delta_omega
    }

    pub fn d_omega(&self, m: i64) -> f64 {
        m as f64 * self.delta_omega * self.delta_omega
    }
}

/// Kernel values of one mode indexed by the integer `m = (k-l)(i-l)`.
///
/// Every distinct `m` reachable on the grid is evaluated once, so entries with
/// the same `dOmega` are bit-identical.
#[derive(Clone, Debug)]
pub struct KernelTensor {
    pub grid: FrequencyGrid,
    pub params: KernelParams,
    pub mode: KernelMode,
    max_m: i64,
    table: Vec<Complex64>,
}

impl KernelTensor {
    pub fn max_m(&self) -> i64 {
        self.max_m
    }

    /// Kernel value for the integer mismatch `m`; `|m|` must not exceed `max_m`.
    #[inline]
    pub fn by_m(&self, m: i64) -> Complex64 {
        self.table[(m + self.max_m) as usize]
    }

    /// Kernel at grid indices (k, i, l) in `-N/2 ..= N/2-1`.
    #[inline]
    pub fn at(&self, k: i64, i: i64, l: i64) -> Complex64 {
        self.by_m((k - l) * (i - l))
    }
}

pub fn build_kernel_tensor(grid: FrequencyGrid, params: KernelParams, mode: KernelMode) -> Result<KernelTensor> {
    params.validate()?;
    if mode.uses_opc() && !params.num_spans.is_multiple_of(2) {
        return Err(invalid_config("OPC kernels need an even number of spans"));
    }
    let n = grid.n_points as i64;
    let max_m = (n - 1) * (n - 1);
    let table = (-max_m..=max_m)
        .into_par_iter()
        .map(|m| kernel_value(mode, &params, grid.d_omega(m)))
        .collect();
    Ok(KernelTensor {
        grid,
        params,
        mode,
        max_m,
        table,
    })
}

/// Normalised kernel magnitudes on an `(w1, w2)` plane for a fixed `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSurface {
    /// rad/s, row coordinate.
    pub omega1: Vec<f64>,
    /// rad/s, column coordinate.
    pub omega2: Vec<f64>,
    /// `values[r][c]` at `(omega1[r], omega2[c])`.
    pub values: Vec<Vec<f64>>,
}

impl KernelSurface {
    pub fn peak(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(0.0, f64::max)
    }

    /// CSV with a header of `omega2` values and `omega1` in the first column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega1\\omega2");
        for w in &self.omega2 {
            let _ = write!(out, ",{w:.6e}");
        }
        out.push('\n');
        for (w1, row) in self.omega1.iter().zip(&self.values) {
            let _ = write!(out, "{w1:.6e}");
            for v in row {
                let _ = write!(out, ",{v:.9e}");
            }
            out.push('\n');
        }
        out
    }
}

/// Samples `|K(w, w1, w2)|` over the grid, normalised by the peak of the link
/// kernel without OPC on the same plane.
pub fn render_kernel_surface(
    params: &KernelParams,
    grid: &FrequencyGrid,
    mode: KernelMode,
    omega_fixed: f64,
) -> Result<KernelSurface> {
    params.validate()?;
    let omegas: Vec<f64> = (grid.min_index()..=grid.max_index()).map(|k| grid.omega(k)).collect();
    let plane = |m: KernelMode| -> Vec<Vec<f64>> {
        omegas
            .par_iter()
            .map(|&w1| {
                omegas
                    .iter()
                    .map(|&w2| kernel_value(m, params, (omega_fixed - w2) * (w1 - w2)).norm())
                    .collect()
            })
            .collect()
    };
    let reference = plane(KernelMode::VsfeForward);
    let norm = reference.iter().flatten().cloned().fold(0.0, f64::max);
    let mut values = if mode == KernelMode::VsfeForward {
        reference
    } else {
        plane(mode)
    };
    for v in values.iter_mut().flatten() {
        *v /= norm;
    }
    Ok(KernelSurface {
        omega1: omegas.clone(),
        omega2: omegas,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1() -> KernelParams {
        KernelParams::from_span(&FiberSpan::ssmf(100e3), 10)
    }

    /// Composite Simpson rule of a complex integrand.
    fn simpson(f: impl Fn(f64) -> Complex64, a: f64, b: f64, n: usize) -> Complex64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += f(a + i as f64 * h) * w;
        }
        acc * h / 3.0
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    /// Two-fraction closed form of the OPC kernel, transcribed literally.
    fn g_closed(d: f64, p: &KernelParams) -> Complex64 {
        let x = p.beta2 * d;
        let l = p.span_length;
        let a = p.alpha;
        let j = Complex64::i();
        let e = (-j * x * l).exp();
        let el = (-a * l).exp();
        ((e * el - 1.0) * (a - j * x) + (e - el) * (a + j * x)) / (a * a + x * x)
    }

    fn g_prime_closed(d: f64, p: &KernelParams) -> Complex64 {
        let x = p.beta2 * d;
        let l = p.span_length;
        let a = p.alpha;
        let j = Complex64::i();
        let e = (j * x * l).exp();
        let el = (a * l).exp();
        ((e * el - 1.0) * (a - j * x) + (e - el) * (a + j * x)) / (a * a + x * x)
    }

    #[test]
    fn f_at_zero_is_effective_length() {
        let p = table1();
        let f0 = fwm_efficiency(0.0, &p);
        let leff = (1.0 - (-p.alpha * p.span_length).exp()) / p.alpha;
        assert!((f0.re - leff).abs() < 1e-9 * leff && f0.im == 0.0);
        assert!((leff - 21.5e3).abs() < 100.0, "{leff}");
    }

    #[test]
    fn f_matches_quadrature() {
        let p = table1();
        for &d in &[0.0, 1e20, -3e21, 5e22] {
            let x = p.beta2 * d;
            let q = simpson(
                |z| Complex64::from_polar((-p.alpha * z).exp(), x * z),
                0.0,
                p.span_length,
                20000,
            );
            assert!(rel(fwm_efficiency(d, &p), q) < 1e-10, "{d}");
            let qb = simpson(
                |z| Complex64::from_polar((p.alpha * z).exp(), -x * z),
                0.0,
                p.span_length,
                20000,
            );
            assert!(rel(fwm_efficiency_backward(d, &p), qb) < 1e-10, "{d}");
        }
    }

    #[test]
    fn f_prime_transcription() {
        let p = table1();
        let j = Complex64::i();
        for &d in &[1e19, -2e21, 7e22] {
            let x = p.beta2 * d;
            let direct = (1.0 - (p.alpha * p.span_length).exp() * (-j * x * p.span_length).exp()) / (j * x - p.alpha);
            assert!(rel(backward_kernels(d, &p, BackwardKernel::FPrime), direct) < 1e-12);
        }
        assert_eq!(backward_kernels(0.0, &p, BackwardKernel::GPrime), Complex64::default());
    }

    #[test]
    fn phased_array_cases() {
        let p = table1();
        assert_eq!(phased_array(10, 0.0, &p), Complex64::new(10.0, 0.0));
        for &d in &[1e20, -4e21, 3.3e22] {
            assert!(rel(phased_array(1, d, &p), Complex64::new(1.0, 0.0)) < 1e-15);
            let w = Complex64::from_polar(1.0, p.beta2 * d * p.span_length);
            let closed = (Complex64::new(1.0, 0.0) - w.powu(10)) / (Complex64::new(1.0, 0.0) - w);
            assert!(rel(phased_array(10, d, &p), closed) < 1e-10);
        }
    }

    #[test]
    fn g_identities() {
        let p = table1();
        assert_eq!(opc_kernel_g(0.0, &p), Complex64::default());
        for &d in &[1e19, -2e21, 7e22, 1.234e23] {
            assert!(rel(opc_kernel_g(d, &p), g_closed(d, &p)) < 1e-9);
            assert!(rel(opc_kernel_g_backward(d, &p), g_prime_closed(d, &p)) < 1e-9);
            assert!(rel(opc_kernel_g(-d, &p), opc_kernel_g(d, &p).conj()) < 1e-12);
        }
    }

    #[test]
    fn pole_neighbourhood_is_finite_and_accurate() {
        for &alpha in &[4.6e-5, 0.0] {
            let mut p = table1();
            p.alpha = alpha;
            let scale = if alpha > 0.0 { alpha } else { 1.0 / p.span_length };
            for e in -12..=0 {
                let x = scale * 10f64.powi(e);
                let d = x / p.beta2;
                let f = fwm_efficiency(d, &p);
                let fb = fwm_efficiency_backward(d, &p);
                let g = opc_kernel_g(d, &p);
                for v in [f, fb, g, opc_kernel_g_backward(d, &p)] {
                    assert!(v.re.is_finite() && v.im.is_finite());
                }
                let qf = simpson(
                    |z| Complex64::from_polar((-alpha * z).exp(), x * z),
                    0.0,
                    p.span_length,
                    4000,
                );
                assert!(rel(f, qf) < 1e-8, "alpha={alpha} e={e}");
                let qb = simpson(
                    |z| Complex64::from_polar((alpha * z).exp(), -x * z),
                    0.0,
                    p.span_length,
                    4000,
                );
                assert!(rel(fb, qb) < 1e-8);
                let qg = {
                    let l = p.span_length;
                    // e^{-jxL} F - F*  as one integral
                    simpson(
                        |z| {
                            Complex64::from_polar((-alpha * z).exp(), x * (z - l))
                                - Complex64::from_polar((-alpha * z).exp(), -x * z)
                        },
                        0.0,
                        l,
                        4000,
                    )
                };
                assert!(
                    (g - qg).norm() <= 1e-8 * qg.norm().max(1e-4 * p.span_length),
                    "alpha={alpha} e={e} {g} {qg}"
                );
            }
        }
    }

    #[test]
    fn backward_vao_equals_forward_vao() {
        let p = table1();
        for &d in &[0.0, 1e20, -3e21, 8e22] {
            let a = kernel_value(KernelMode::VaoForward, &p, d);
            let b = kernel_value(KernelMode::VaoBackward, &p, d);
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn tensor_entries() {
        let grid = FrequencyGrid::for_window(16, 192e9).unwrap();
        let p = table1();
        let t = build_kernel_tensor(grid, p, KernelMode::VsfeForward).unwrap();
        let f0n = fwm_efficiency(0.0, &p) * 10.0;
        assert!((t.at(3, 3, 3) - f0n).norm() < 1e-9 * f0n.norm());
        let vao = build_kernel_tensor(grid, p, KernelMode::VaoBackward).unwrap();
        for k in -8..8 {
            for i in -8..8 {
                assert_eq!(vao.at(k, i, i), Complex64::default());
                assert_eq!(vao.at(k, i, k), Complex64::default());
            }
        }
        for &mode in &[KernelMode::VsfeBackward, KernelMode::PerSpan, KernelMode::VaoForward] {
            let t = build_kernel_tensor(grid, p, mode).unwrap();
            for (k, i, l) in [(1i64, -3i64, 4i64), (-8, 7, 0), (5, 5, -6)] {
                let direct = kernel_value(mode, &p, grid.d_omega((k - l) * (i - l)));
                assert!((t.at(k, i, l) - direct).norm() <= 1e-12 * direct.norm().max(1e-300));
            }
        }
        assert!(build_kernel_tensor(grid, KernelParams { num_spans: 3, ..p }, KernelMode::VaoForward).is_err());
    }

    #[test]
    fn tensor_delta_omega_sufficiency() {
        let grid = FrequencyGrid::for_window(12, 192e9).unwrap();
        let t = build_kernel_tensor(grid, table1(), KernelMode::VsfeBackward).unwrap();
        // (k-l)(i-l) = 6 reached through different triples
        assert_eq!(t.at(2, 3, 0), t.at(3, 2, 0));
        assert_eq!(t.at(2, 3, 0), t.at(-3, -4, -6));
        assert_eq!(t.at(1, 6, 0), t.at(2, 3, 0));
        assert_ne!(t.at(1, 6, 0), t.at(1, 5, 0));
    }

    #[test]
    fn surfaces_halve_with_opc_and_vanish_on_lines() {
        let p = table1();
        let grid = FrequencyGrid::new(128, 2.0 * std::f64::consts::PI * 1.5e9).unwrap();
        let plain = render_kernel_surface(&p, &grid, KernelMode::VsfeForward, 0.0).unwrap();
        let opc = render_kernel_surface(&p, &grid, KernelMode::VaoForward, 0.0).unwrap();
        assert!((plain.peak() - 1.0).abs() < 1e-12);
        let c0 = 64; // index of w = 0
        assert!((plain.values[c0][c0] - 1.0).abs() < 1e-12);
        for r in 0..128 {
            assert!((plain.values[r][r] - 1.0).abs() < 1e-12);
            assert_eq!(opc.values[r][r], 0.0);
            assert_eq!(opc.values[r][c0], 0.0);
        }
        let ratio = opc.peak();
        assert!((ratio - 0.5).abs() < 0.02, "{ratio}");
        let csv = opc.to_csv();
        assert_eq!(csv.lines().count(), 129);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 129);
    }

    proptest! {
        #[test]
        fn hermitian_symmetry(d in -1e23f64..1e23, alpha in 0.0f64..1e-4, n in 1usize..20) {
            let p = KernelParams { alpha, beta2: -2.1e-26, span_length: 80e3, num_spans: n };
            for (a, b) in [
                (fwm_efficiency(-d, &p), fwm_efficiency(d, &p)),
                (fwm_efficiency_backward(-d, &p), fwm_efficiency_backward(d, &p)),
                (opc_kernel_g(-d, &p), opc_kernel_g(d, &p)),
                (opc_kernel_g_backward(-d, &p), opc_kernel_g_backward(d, &p)),
            ] {
                prop_assert!((a - b.conj()).norm() <= 1e-12 * b.norm().max(1.0));
            }
        }
    }
}
