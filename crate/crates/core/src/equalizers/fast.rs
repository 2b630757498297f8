//! Dispersion-diagonalised evaluation of the third-order double sum.
//!
//! With the kernel written as `H(x) = sum_q w_q e^{j x theta_q}` and
//! `x = beta2 dw^2 (l^2 + b^2 - i^2 - k^2) / 2`, every node factorises into
//! dispersion operators `D_theta = e^{j beta2 w^2 theta / 2}` on each of the
//! four frequencies. The double sum for one node is then
//! `D_{-theta} FFT(|u|^2 u)` with `u = IFFT(D_theta S)`, costing four FFTs.

use num_complex::Complex64;

use super::{IndexMode, NonlinearCorrection};
use crate::channel::MANAKOV_FACTOR;
use crate::error::{invalid_config, Result};
use crate::fft::{centred_index, FftPair};
use crate::kernels::{FrequencyGrid, KernelPath, QuadratureNode};

#[derive(Clone, Debug)]
pub struct FastVolterra {
    n: usize,
    mode: IndexMode,
    /// Work grid length (N periodic, 2N zero-padded for clamped sums).
    m: usize,
    plan: FftPair,
    /// `beta2 w_k^2 / 2` per work-grid bin.
    half_beta_w2: Vec<f64>,
    /// Work-grid bin of each window bin.
    embed: Vec<usize>,
    nodes: Vec<QuadratureNode>,
}

impl FastVolterra {
    pub fn new(path: &KernelPath, grid: FrequencyGrid, beta2: f64, mode: IndexMode, oversampling: f64) -> Result<Self> {
        let n = grid.n_points;
        let m = match mode {
            IndexMode::Periodic => n,
            IndexMode::Clamped => 2 * n,
            IndexMode::Cyclic => {
                return Err(invalid_config(
                    "cyclic index mode mixes wrapped and unwrapped frequencies; use the tensor engine",
                ))
            }
        };
        let dw = grid.delta_omega;
        let embed: Vec<usize> = (0..n)
            .map(|b| centred_index(b, n).rem_euclid(m as i64) as usize)
            .collect();
        let half_beta_w2 = (0..m)
            .map(|b| {
                let w = centred_index(b, m) as f64 * dw;
                beta2 * w * w / 2.0
            })
            .collect();
        let quarter = (n as f64 / 2.0).powi(2);
        let x_max = beta2.abs() * dw * dw * quarter;
        Ok(Self {
            n,
            mode,
            m,
            plan: FftPair::new(m),
            half_beta_w2,
            embed,
            nodes: path.quadrature(x_max, oversampling),
        })
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn window_len(&self) -> usize {
        self.n
    }

    /// Correction on unnormalised DFT spectra in FFT bin order.
    pub fn correction(&self, sx: &[Complex64], sy: &[Complex64], gamma: f64) -> Result<NonlinearCorrection> {
        let n = self.n;
        if sx.len() != n || sy.len() != n {
            return Err(invalid_config(format!(
                "engine built for {n}-point windows, got {} and {}",
                sx.len(),
                sy.len()
            )));
        }
        let mut ax = vec![Complex64::default(); n];
        let mut ay = vec![Complex64::default(); n];
        if gamma == 0.0 {
            return Ok(NonlinearCorrection { x: ax, y: ay });
        }
        let m = self.m;
        let mut ux = vec![Complex64::default(); m];
        let mut uy = vec![Complex64::default(); m];
        let mut scratch = vec![Complex64::default(); self.plan.scratch_len()];
        // the padded grid doubles the DFT length; rescale so spectra keep their window meaning
        let pad = (m / n) as f64;
        let inv_m = pad / m as f64;
        for node in &self.nodes {
            ux.iter_mut()
                .chain(uy.iter_mut())
                .for_each(|v| *v = Complex64::default());
            for b in 0..n {
                let e = self.embed[b];
                let d = Complex64::from_polar(1.0, self.half_beta_w2[e] * node.theta);
                ux[e] = sx[b] * d;
                uy[e] = sy[b] * d;
            }
            self.plan.inverse_raw_with_scratch(&mut ux, &mut scratch);
            self.plan.inverse_raw_with_scratch(&mut uy, &mut scratch);
            for (a, b) in ux.iter_mut().zip(uy.iter_mut()) {
                *a *= inv_m;
                *b *= inv_m;
                let p = a.norm_sqr() + b.norm_sqr();
                *a *= p;
                *b *= p;
            }
            self.plan.forward_with_scratch(&mut ux, &mut scratch);
            self.plan.forward_with_scratch(&mut uy, &mut scratch);
            for b in 0..n {
                let e = self.embed[b];
                let d = Complex64::from_polar(node.weight / pad, -self.half_beta_w2[e] * node.theta);
                ax[b] += ux[e] * d;
                ay[b] += uy[e] * d;
            }
        }
        let scale = Complex64::new(0.0, -MANAKOV_FACTOR * gamma);
        for v in ax.iter_mut().chain(ay.iter_mut()) {
            *v *= scale;
        }
        Ok(NonlinearCorrection { x: ax, y: ay })
    }
}
