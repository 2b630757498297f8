//! Data-aided SNR estimation, the NLI suppression factor and the
//! dispersion-memory estimate.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid_input, Result};
use crate::waveform::PolSymbols;

/// Estimates above this are reported as this value.
pub const SNR_CAP_DB: f64 = 80.0;

/// z-score of the two-sided 95% interval.
const Z95: f64 = 1.959964;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnrEstimate {
    pub snr_db: f64,
    /// Symbols pooled over both polarisations.
    pub num_symbols: usize,
    /// 95% half-width of `snr_db`.
    pub confidence_halfwidth: f64,
}

/// Least-squares fit `rx ~ c * tx` and its raw powers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResidual {
    pub scalar: Complex64,
    /// Mean `|c tx|^2`.
    pub signal_power: f64,
    /// Mean `|rx - c tx|^2`.
    pub error_power: f64,
    pub num_symbols: usize,
    /// Relative standard deviation of the per-symbol error power.
    pub error_spread: f64,
}

impl FitResidual {
    /// Uncapped SNR in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.signal_power / self.error_power).log10()
    }
}

fn pooled(s: &PolSymbols) -> impl Iterator<Item = &Complex64> {
    s.x.iter().chain(&s.y)
}

/// Fits one complex scalar over both polarisations and returns the residual.
pub fn fit_residual(rx: &PolSymbols, tx: &PolSymbols) -> Result<FitResidual> {
    if rx.x.len() != tx.x.len() || rx.y.len() != tx.y.len() {
        return Err(invalid_input(format!(
            "received ({}, {}) and reference ({}, {}) symbol counts differ",
            rx.x.len(),
            rx.y.len(),
            tx.x.len(),
            tx.y.len()
        )));
    }
    let n = rx.x.len() + rx.y.len();
    let et: f64 = pooled(tx).map(|t| t.norm_sqr()).sum();
    if n == 0 || !(et > 0.0) {
        return Err(invalid_input("reference symbols carry no energy"));
    }
    let corr: Complex64 = pooled(rx).zip(pooled(tx)).map(|(r, t)| r * t.conj()).sum();
    let c = corr / et;
    let errs: Vec<f64> = pooled(rx)
        .zip(pooled(tx))
        .map(|(r, t)| (r - c * t).norm_sqr())
        .collect();
    let mean = errs.iter().sum::<f64>() / n as f64;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok(FitResidual {
        scalar: c,
        signal_power: c.norm_sqr() * et / n as f64,
        error_power: mean,
        num_symbols: n,
        error_spread: if mean > 0.0 { var.sqrt() / mean } else { 0.0 },
    })
}

fn halfwidth_db(error_spread: f64, n: usize) -> f64 {
    10.0 / std::f64::consts::LN_10 * Z95 * error_spread / (n as f64).sqrt()
}

/// SNR `|c|^2 E|tx|^2 / E|rx - c tx|^2` with the least-squares scalar `c`,
/// pooled over polarisations and capped at [`SNR_CAP_DB`].
pub fn snr_data_aided(rx: &PolSymbols, tx: &PolSymbols) -> Result<SnrEstimate> {
    let f = fit_residual(rx, tx)?;
    let raw = if f.error_power > 0.0 { f.snr_db() } else { f64::INFINITY };
    Ok(SnrEstimate {
        snr_db: raw.min(SNR_CAP_DB),
        num_symbols: f.num_symbols,
        confidence_halfwidth: halfwidth_db(f.error_spread, f.num_symbols),
    })
}

/// SNR with and without compensation and their ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaRecord {
    pub snr_nlc_db: f64,
    pub snr_edc_db: f64,
    pub zeta_db: f64,
}

pub fn zeta(snr_nlc: &SnrEstimate, snr_edc: &SnrEstimate) -> ZetaRecord {
    ZetaRecord {
        snr_nlc_db: snr_nlc.snr_db,
        snr_edc_db: snr_edc.snr_db,
        zeta_db: snr_nlc.snr_db - snr_edc.snr_db,
    }
}

/// Dispersive spread in symbols, `|beta2| R_s (2 pi B) L` with the bandwidth
/// `total_bandwidth` in Hz.
pub fn channel_memory_estimate(beta2: f64, symbol_rate: f64, total_bandwidth: f64, distance: f64) -> f64 {
    beta2.abs() * symbol_rate * 2.0 * PI * total_bandwidth * distance
}

/// Running least-squares sums over several frames of one sweep point.
///
/// Merging is associative, so frames may be accumulated on any worker.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SnrAccumulator {
    corr: Complex64,
    tx_energy: f64,
    rx_energy: f64,
    /// Sum and sum of squares of the per-symbol error power under each
    /// frame's own fit, for the confidence interval.
    err_sum: f64,
    err_sq_sum: f64,
    count: usize,
}

impl SnrAccumulator {
    pub fn add(&mut self, rx: &PolSymbols, tx: &PolSymbols) -> Result<()> {
        let f = fit_residual(rx, tx)?;
        let mut part = SnrAccumulator {
            count: f.num_symbols,
            ..Default::default()
        };
        for (r, t) in pooled(rx).zip(pooled(tx)) {
            part.corr += r * t.conj();
            part.tx_energy += t.norm_sqr();
            part.rx_energy += r.norm_sqr();
            let e = (r - f.scalar * t).norm_sqr();
            part.err_sum += e;
            part.err_sq_sum += e * e;
        }
        self.merge(&part);
        Ok(())
    }

    pub fn merge(&mut self, other: &SnrAccumulator) {
        self.corr += other.corr;
        self.tx_energy += other.tx_energy;
        self.rx_energy += other.rx_energy;
        self.err_sum += other.err_sum;
        self.err_sq_sum += other.err_sq_sum;
        self.count += other.count;
    }

    pub fn num_symbols(&self) -> usize {
        self.count
    }

    /// Estimate pooled over everything added so far, with one common scalar.
    pub fn estimate(&self) -> Result<SnrEstimate> {
        if self.count == 0 || !(self.tx_energy > 0.0) {
            return Err(invalid_input("no symbols accumulated"));
        }
        let n = self.count as f64;
        let sig = self.corr.norm_sqr() / self.tx_energy;
        let err = (self.rx_energy - sig).max(0.0);
        let raw = if err > 0.0 {
            10.0 * (sig / err).log10()
        } else {
            f64::INFINITY
        };
        let mean = self.err_sum / n;
        let var = (self.err_sq_sum / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        let spread = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        Ok(SnrEstimate {
            snr_db: raw.min(SNR_CAP_DB),
            num_symbols: self.count,
            confidence_halfwidth: halfwidth_db(spread, self.count),
        })
    }
}
