//! Thin wrappers over `rustfft` with the conventions used throughout the crate.
//!
//! * Forward transform: `X[k] = sum_n x[n] e^{-j 2 pi k n / N}` (unnormalised).
//! * Inverse transform: `x[n] = (1/N) sum_k X[k] e^{+j 2 pi k n / N}`.
//! * Bin `b` maps to the centred index `k = b` for `b < N/2`, `k = b - N` otherwise,
//!   so `k` runs over `-N/2 .. N/2-1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// A forward/inverse plan pair for one transform length.
#[derive(Clone)]
pub struct FftPair {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("n", &self.n).finish()
    }
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
    }

    /// Normalised inverse (divides by N).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    pub fn forward_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, scratch);
    }

    /// Unnormalised inverse; callers fold the 1/N into their own scaling.
    pub fn inverse_raw_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, scratch);
    }

    pub fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }
}

/// Centred integer frequency index of DFT bin `b`.
#[inline]
pub fn centred_index(b: usize, n: usize) -> i64 {
    if b < n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// DFT bin holding centred index `k` (taken modulo `n`).
#[inline]
pub fn bin_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Angular frequency (rad/s) of every bin for a grid of `n` samples at `sample_rate`.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    let dw = 2.0 * PI * sample_rate / n as f64;
    (0..n).map(|b| centred_index(b, n) as f64 * dw).collect()
}

pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPair::new(x.len()).forward(&mut buf);
    buf
}

pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPair::new(x.len()).inverse(&mut buf);
    buf
}

/// True when rustfft factors `n` into small radices only (2, 3, 5).
pub fn is_fft_friendly(mut n: usize) -> bool {
    if n == 0 {
        return false;
    }
    for p in [2, 3, 5] {
        while n.is_multiple_of(p) {
            n /= p;
        }
    }
    n == 1
}
