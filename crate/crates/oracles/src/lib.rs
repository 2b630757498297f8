//! Slow, direct reference computations for validating the `vao` crate.
//!
//! Nothing here shares code with the library: transforms are naive DFTs and
//! the first-order nonlinear term is a literal Riemann sum of the continuous
//! double integral over the sampled frequency grid.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Naive DFT, `X_k = sum_t x_t e^{-j 2 pi k t / N}` (no normalisation).
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Naive inverse DFT with the `1/N` factor.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|t| {
            x.iter()
                .enumerate()
                .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * ((k * t) % n) as f64 / n as f64))
                .sum::<Complex64>()
                / n as f64
        })
        .collect()
}

/// Angular frequency of DFT bin `b` on an `n`-point grid at `fs`, with bins
/// at and above `n/2` mapped to negative frequencies.
pub fn bin_frequency(b: usize, n: usize, fs: f64) -> f64 {
    let c = if b < n / 2 { b as f64 } else { b as f64 - n as f64 };
    2.0 * PI * c * fs / n as f64
}

/// Uniform multi-span link with lumped gains restoring the launch power at
/// each span end.
#[derive(Clone, Copy, Debug)]
pub struct OracleLink {
    pub alpha: f64,
    pub beta2: f64,
    /// Manakov-averaged coefficient is `8/9` of this.
    pub gamma: f64,
    pub span_length: f64,
    pub num_spans: usize,
}

/// `int_0^z P(s) e^{j x s} ds` for the link's sawtooth power profile,
/// integrated span by span in closed form.
pub fn kernel_integral(link: &OracleLink, x: f64, z: f64) -> Complex64 {
    let mut acc = Complex64::default();
    for n in 0..link.num_spans {
        let a = n as f64 * link.span_length;
        let b = (a + link.span_length).min(z);
        if b <= a {
            break;
        }
        // int_a^b e^{-alpha (s - a)} e^{j x s} ds
        let k = Complex64::new(-link.alpha, x);
        let seg = if k.norm() * (b - a) < 1e-6 {
            let h = b - a;
            Complex64::from_polar(1.0, x * a) * (h + k * h * h / 2.0 + k * k * h * h * h / 6.0)
        } else {
            Complex64::from_polar(1.0, x * a) * ((k * (b - a)).exp() - 1.0) / k
        };
        acc += seg;
    }
    acc
}

/// First-order nonlinear term of the Manakov field at distance `z`, in the
/// dispersion- and loss-free frame, as DFT bins of the time samples.
///
/// `x`, `y` are the launched time samples. The sum
/// `j (8/9) gamma / N^2 sum_{i,l} H(x) X*_i X_l X_b`, `b = k + i - l`, uses
/// the wrapped grid frequency of every bin for the phase mismatch
/// `x = beta2 (w_l^2 + w_b^2 - w_i^2 - w_k^2) / 2`.
pub fn first_order_nli_oracle(
    x: &[Complex64],
    y: &[Complex64],
    sample_rate: f64,
    link: &OracleLink,
    z: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = x.len();
    assert_eq!(y.len(), n);
    let sx = dft(x);
    let sy = dft(y);
    let w: Vec<f64> = (0..n).map(|b| bin_frequency(b, n, sample_rate)).collect();
    let scale = Complex64::new(0.0, 8.0 / 9.0 * link.gamma / (n * n) as f64);
    let mut ox = vec![Complex64::default(); n];
    let mut oy = vec![Complex64::default(); n];
    for k in 0..n {
        for i in 0..n {
            for l in 0..n {
                let b = (k + i + n - l) % n;
                let mismatch = link.beta2 * (w[l] * w[l] + w[b] * w[b] - w[i] * w[i] - w[k] * w[k]) / 2.0;
                let h = kernel_integral(link, mismatch, z);
                let q = sx[i].conj() * sx[l] + sy[i].conj() * sy[l];
                ox[k] += h * q * sx[b];
                oy[k] += h * q * sy[b];
            }
        }
        ox[k] *= scale;
        oy[k] *= scale;
    }
    (ox, oy)
}

/// Composite Simpson rule of `f` over `[a, b]` with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, n: usize) -> Complex64 {
    assert!(n.is_multiple_of(2) && n > 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + i as f64 * h) * c;
    }
    acc * h / 3.0
}

/// `sqrt(sum |a - b|^2 / sum |b|^2)` over paired slices.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum();
    (num / den).sqrt()
}
