//! Reference engine: the third-order double sum evaluated term by term.

use num_complex::Complex64;

use super::{IndexMode, NonlinearCorrection};
use crate::channel::MANAKOV_FACTOR;
use crate::error::{invalid_config, Result};
use crate::fft::{bin_of, centred_index};
use crate::kernels::KernelTensor;

/// Integer phase-mismatch key of the mixing product `(k, i, l) -> b`.
///
/// Returns `None` when the product falls off the grid in clamped mode.
#[inline]
pub(crate) fn mismatch(mode: IndexMode, n: i64, k: i64, i: i64, l: i64) -> Option<(i64, i64)> {
    let half = n / 2;
    let b = k + i - l;
    let wrapped = (b + half).rem_euclid(n) - half;
    match mode {
        IndexMode::Cyclic => Some(((k - l) * (i - l), wrapped)),
        IndexMode::Clamped => {
            if b < -half || b >= half {
                None
            } else {
                Some(((k - l) * (i - l), b))
            }
        }
        IndexMode::Periodic => Some(((l * l + wrapped * wrapped - i * i - k * k) / 2, wrapped)),
    }
}

/// `a_k = -j (8/9) gamma / N^2 * sum_{i,l} H * (s*_{X,i} s_{X,l} + s*_{Y,i} s_{Y,l}) s_{k+i-l}`
/// for both polarisations, on unnormalised DFT spectra in FFT bin order.
pub fn double_sum_correction(
    sx: &[Complex64],
    sy: &[Complex64],
    tensor: &KernelTensor,
    gamma: f64,
    mode: IndexMode,
) -> Result<NonlinearCorrection> {
    let n = sx.len();
    if sy.len() != n || tensor.grid.n_points != n {
        return Err(invalid_config(format!(
            "kernel grid has {} points, window spectra have {} and {}",
            tensor.grid.n_points,
            n,
            sy.len()
        )));
    }
    let ni = n as i64;
    let mut ax = vec![Complex64::default(); n];
    let mut ay = vec![Complex64::default(); n];
    if gamma == 0.0 {
        return Ok(NonlinearCorrection { x: ax, y: ay });
    }
    let at = |c: i64, s: &[Complex64]| s[bin_of(c, n)];
    let scale = Complex64::new(0.0, -MANAKOV_FACTOR * gamma / (n as f64 * n as f64));
    for kb in 0..n {
        let k = centred_index(kb, n);
        let mut acc_x = Complex64::default();
        let mut acc_y = Complex64::default();
        for ib in 0..n {
            let i = centred_index(ib, n);
            let (xi, yi) = (sx[ib].conj(), sy[ib].conj());
            for lb in 0..n {
                let l = centred_index(lb, n);
                let Some((m, b)) = mismatch(mode, ni, k, i, l) else {
                    continue;
                };
                let q = xi * sx[lb] + yi * sy[lb];
                let hq = tensor.by_m(m) * q;
                acc_x += hq * at(b, sx);
                acc_y += hq * at(b, sy);
            }
        }
        ax[kb] = scale * acc_x;
        ay[kb] = scale * acc_y;
    }
    Ok(NonlinearCorrection { x: ax, y: ay })
}
