//! Arbitrary link power profiles, the half-link kernel sums around an OPC,
//! and the mirror conditions under which OPC cancels first-order NLI.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::path::{KernelPath, PathSegment};
use crate::error::{invalid_config, invalid_input, Result};
use crate::fft::{angular_frequencies, fft};
use crate::waveform::DualPolSignal;

/// A piece of the profile on which `P(z) = p_start * e^{-alpha (z - z0)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileSegment {
    /// m.
    pub length: f64,
    /// Normalised power at the start of the segment.
    pub p_start: f64,
    /// Power attenuation, 1/m (negative for distributed gain).
    pub alpha: f64,
}

impl ProfileSegment {
    pub fn p_end(&self) -> f64 {
        self.p_start * (-self.alpha * self.length).exp()
    }
}

/// Piecewise-exponential power profile over `num_spans` spans of equal
/// length. Discontinuities between segments are lumped gains.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerProfile {
    pub segments: Vec<ProfileSegment>,
    pub span_length: f64,
    pub num_spans: usize,
    /// Dispersion used to map `dOmega` to the kernel phase, s^2/m.
    pub beta2: f64,
}

impl PowerProfile {
    pub fn new(segments: Vec<ProfileSegment>, span_length: f64, num_spans: usize, beta2: f64) -> Result<Self> {
        if num_spans == 0 || !(span_length > 0.0) || segments.is_empty() {
            return Err(invalid_config(
                "profile needs segments, spans and a positive span length",
            ));
        }
        if segments
            .iter()
            .any(|s| !(s.length > 0.0) || !(s.p_start > 0.0) || !s.alpha.is_finite())
        {
            return Err(invalid_config("profile segments need positive length and power"));
        }
        let total: f64 = segments.iter().map(|s| s.length).sum();
        let expect = span_length * num_spans as f64;
        if (total - expect).abs() > 1e-9 * expect {
            return Err(invalid_config(format!(
                "profile covers {total} m but the link is {expect} m"
            )));
        }
        Ok(Self {
            segments,
            span_length,
            num_spans,
            beta2,
        })
    }

    /// Uniform loss with a lumped gain restoring unit power at every span end.
    pub fn edfa(num_spans: usize, alpha: f64, span_length: f64, beta2: f64) -> Result<Self> {
        let seg = ProfileSegment {
            length: span_length,
            p_start: 1.0,
            alpha,
        };
        Self::new(vec![seg; num_spans], span_length, num_spans, beta2)
    }

    pub fn lossless(num_spans: usize, span_length: f64, beta2: f64) -> Result<Self> {
        Self::edfa(num_spans, 0.0, span_length, beta2)
    }

    /// Completes a first half-link with its mirror image about the midpoint:
    /// `P(L - z) = P(z)`, `alpha(L - z) = -alpha(z)`.
    pub fn mirrored(first_half: &[ProfileSegment], span_length: f64, num_spans: usize, beta2: f64) -> Result<Self> {
        let mut segs = first_half.to_vec();
        segs.extend(first_half.iter().rev().map(|s| ProfileSegment {
            length: s.length,
            p_start: s.p_end(),
            alpha: -s.alpha,
        }));
        Self::new(segs, span_length, num_spans, beta2)
    }

    pub fn total_length(&self) -> f64 {
        self.span_length * self.num_spans as f64
    }

    /// Locates `z` in a segment, returning (segment index, offset).
    /// `from_left` picks the segment ending at `z` on boundaries.
    fn locate(&self, z: f64, from_left: bool) -> (usize, f64) {
        let tol = 1e-9 * self.total_length();
        let mut z0 = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            let z1 = z0 + s.length;
            let last = i + 1 == self.segments.len();
            let inside = if from_left { z <= z1 + tol } else { z < z1 - tol };
            if inside || last {
                return (i, (z - z0).clamp(0.0, s.length));
            }
            z0 = z1;
        }
        unreachable!("profile has at least one segment")
    }

    /// `P(z^+)`, or `P(z^-)` when `from_left`.
    pub fn power_at(&self, z: f64, from_left: bool) -> f64 {
        let (i, u) = self.locate(z, from_left);
        let s = &self.segments[i];
        s.p_start * (-s.alpha * u).exp()
    }

    pub fn alpha_at(&self, z: f64, from_left: bool) -> f64 {
        self.segments[self.locate(z, from_left).0].alpha
    }

    /// Pieces of the profile clipped to `[a, b]`: (z_start, segment restricted).
    fn pieces(&self, a: f64, b: f64) -> Vec<(f64, ProfileSegment)> {
        let mut out = Vec::new();
        let mut z0 = 0.0;
        for s in &self.segments {
            let z1 = z0 + s.length;
            let lo = z0.max(a);
            let hi = z1.min(b);
            if hi - lo > 1e-12 * self.total_length() {
                out.push((
                    lo,
                    ProfileSegment {
                        length: hi - lo,
                        p_start: s.p_start * (-s.alpha * (lo - z0)).exp(),
                        alpha: s.alpha,
                    },
                ));
            }
            z0 = z1;
        }
        out
    }

    /// Path of `Lambda = int_0^{L/2} P(z) e^{j x z} dz`.
    pub fn lambda_path(&self) -> KernelPath {
        let half = self.total_length() / 2.0;
        KernelPath {
            segments: self
                .pieces(0.0, half)
                .into_iter()
                .map(|(z, s)| PathSegment {
                    coeff: s.p_start,
                    decay: s.alpha,
                    theta0: z,
                    direction: 1.0,
                    length: s.length,
                })
                .collect(),
        }
    }

    /// Path of `Psi = int_{L/2}^{L} P(z) e^{j x (z - L)} dz`.
    pub fn psi_path(&self) -> KernelPath {
        let total = self.total_length();
        KernelPath {
            segments: self
                .pieces(total / 2.0, total)
                .into_iter()
                .map(|(z, s)| PathSegment {
                    coeff: s.p_start,
                    decay: s.alpha,
                    theta0: z - total,
                    direction: 1.0,
                    length: s.length,
                })
                .collect(),
        }
    }

    /// Path of the residual OPC kernel `Gamma = Psi - Lambda*`.
    pub fn gamma_path(&self) -> KernelPath {
        let mut p = self.psi_path();
        p.segments
            .extend(self.lambda_path().segments.into_iter().map(|s| PathSegment {
                coeff: -s.coeff,
                theta0: -s.theta0,
                direction: -s.direction,
                ..s
            }));
        p
    }

    fn check_half(&self, half_spans: usize) -> Result<()> {
        if !self.num_spans.is_multiple_of(2) || half_spans * 2 != self.num_spans {
            return Err(invalid_config(format!(
                "profile has {} spans; expected an even count of 2 x {half_spans}",
                self.num_spans
            )));
        }
        Ok(())
    }
}

/// Half-link kernel before the OPC.
pub fn lambda_sum(profile: &PowerProfile, half_spans: usize, d_omega: f64) -> Result<Complex64> {
    profile.check_half(half_spans)?;
    Ok(profile.lambda_path().value(profile.beta2 * d_omega))
}

/// Half-link kernel after the OPC, referenced to the receiver.
pub fn psi_sum(profile: &PowerProfile, half_spans: usize, d_omega: f64) -> Result<Complex64> {
    profile.check_half(half_spans)?;
    Ok(profile.psi_path().value(profile.beta2 * d_omega))
}

/// Residual first-order kernel of a mid-link OPC link, `Psi - Lambda*`.
pub fn residual_kernel_gamma(profile: &PowerProfile, num_spans: usize, d_omega: f64) -> Result<Complex64> {
    if num_spans != profile.num_spans {
        return Err(invalid_config(format!(
            "profile has {} spans, asked for {num_spans}",
            profile.num_spans
        )));
    }
    let half = num_spans / 2;
    Ok(psi_sum(profile, half, d_omega)? - lambda_sum(profile, half, d_omega)?.conj())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest relative mismatch over the span boundaries.
    pub max_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryReport {
    pub conditions: Vec<ConditionResult>,
    /// RMS of `P(L-z) - P(z)` over a dense interior sampling, relative to peak power.
    pub asymmetry_norm: f64,
}

impl SymmetryReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,passed,max_violation\n");
        for c in &self.conditions {
            let _ = writeln!(out, "{},{},{:.6e}", c.name, c.passed, c.max_violation);
        }
        let _ = writeln!(
            out,
            "asymmetry_norm,{},{:.6e}",
            self.asymmetry_norm < 1e-9,
            self.asymmetry_norm
        );
        out
    }
}

/// Evaluates the four boundary mirror conditions for OPC cancellation, for
/// `n = 1 ..= N/2`:
///
/// * `P((N-n+1)L^-) = P((n-1)L^+)`
/// * `P((N-n)L^+) = P(nL^-)`
/// * `alpha((N-n+1)L^-) = -alpha((n-1)L^+)`
/// * `alpha((N-n)L^+) = -alpha(nL^-)`
pub fn symmetry_predicates(profile: &PowerProfile) -> SymmetryReport {
    const TOL: f64 = 1e-9;
    let n_sp = profile.num_spans;
    let l = profile.span_length;
    let p_scale = profile
        .segments
        .iter()
        .map(|s| s.p_start.max(s.p_end()))
        .fold(0.0, f64::max);
    let a_scale = profile
        .segments
        .iter()
        .map(|s| s.alpha.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut v = [0.0f64; 4];
    for n in 1..=n_sp / 2 {
        let z = |k: usize| k as f64 * l;
        v[0] = v[0].max((profile.power_at(z(n_sp - n + 1), true) - profile.power_at(z(n - 1), false)).abs() / p_scale);
        v[1] = v[1].max((profile.power_at(z(n_sp - n), false) - profile.power_at(z(n), true)).abs() / p_scale);
        v[2] = v[2].max((profile.alpha_at(z(n_sp - n + 1), true) + profile.alpha_at(z(n - 1), false)).abs() / a_scale);
        v[3] = v[3].max((profile.alpha_at(z(n_sp - n), false) + profile.alpha_at(z(n), true)).abs() / a_scale);
    }
    let names = [
        "power_mirror_start",
        "power_mirror_end",
        "alpha_mirror_start",
        "alpha_mirror_end",
    ];
    let conditions = names
        .iter()
        .zip(v)
        .map(|(&name, max_violation)| ConditionResult {
            name,
            passed: max_violation < TOL,
            max_violation,
        })
        .collect();

    let total = profile.total_length();
    let samples = 64 * n_sp.max(1);
    let mut acc = 0.0;
    for s in 0..samples {
        let z = (s as f64 + 0.5) / samples as f64 * total;
        let d = profile.power_at(total - z, false) - profile.power_at(z, false);
        acc += d * d;
    }
    SymmetryReport {
        conditions,
        asymmetry_norm: (acc / samples as f64).sqrt() / p_scale,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbationOrder {
    Zeroth,
    First,
}

/// A perturbation term's spectrum on both polarisations at distance `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationTerm {
    pub order: PerturbationOrder,
    pub x: Vec<Complex64>,
    pub y: Vec<Complex64>,
    /// m.
    pub z: f64,
}

/// Linearly propagated input spectrum `S(w) sqrt(P(z)) e^{j beta2 w^2 z / 2}`.
pub fn zeroth_order_term(signal: &DualPolSignal, profile: &PowerProfile, z: f64) -> Result<PerturbationTerm> {
    if !(0.0..=profile.total_length() * (1.0 + 1e-12)).contains(&z) {
        return Err(invalid_input(format!("z = {z} m lies outside the link")));
    }
    let amp = profile.power_at(z, true).sqrt();
    let w = angular_frequencies(signal.len(), signal.sample_rate);
    let rot = |pol: &[Complex64]| -> Vec<Complex64> {
        fft(pol)
            .iter()
            .zip(&w)
            .map(|(v, wk)| v * Complex64::from_polar(amp, profile.beta2 * wk * wk * z / 2.0))
            .collect()
    };
    Ok(PerturbationTerm {
        order: PerturbationOrder::Zeroth,
        x: rot(&signal.x),
        y: rot(&signal.y),
        z,
    })
}
