//! Kernels written as sums of exponential z-integrals, and their quadrature.
//!
//! A path segment contributes
//! `c * e^{j x theta0} * int_0^len e^{-decay u} e^{j x sigma u} du`, so every
//! link kernel becomes `sum_q w_q e^{j x theta_q}` after quadrature in `u`.
//! Each node is then a pure dispersion operator, which is what the fast
//! equalizer engine exploits.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use super::{exp_integral, KernelMode, KernelParams};
use crate::error::{invalid_config, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSegment {
    /// Real amplitude at `u = 0`, sign included.
    pub coeff: f64,
    /// Power decay rate along the segment, 1/m (negative for gain).
    pub decay: f64,
    /// Dispersion coordinate at `u = 0`, m.
    pub theta0: f64,
    /// +1 or -1: direction of the dispersion coordinate.
    pub direction: f64,
    /// m.
    pub length: f64,
}

impl PathSegment {
    pub fn value(&self, x: f64) -> Complex64 {
        let rate = Complex64::new(-self.decay, self.direction * x);
        Complex64::from_polar(self.coeff, x * self.theta0) * exp_integral(rate, self.length)
    }
}

/// `e^{j x theta}` weighted by `weight` after quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureNode {
    pub theta: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelPath {
    pub segments: Vec<PathSegment>,
}

impl KernelPath {
    /// Path representation of a closed-form link kernel.
    pub fn from_mode(mode: KernelMode, p: &KernelParams) -> Result<Self> {
        p.validate()?;
        let n = p.num_spans;
        let l = p.span_length;
        let seg = |coeff: f64, theta0: f64, direction: f64| PathSegment {
            coeff,
            decay: p.alpha,
            theta0,
            direction,
            length: l,
        };
        let segments = match mode {
            KernelMode::VsfeForward => (0..n).map(|s| seg(1.0, s as f64 * l, 1.0)).collect(),
            KernelMode::VsfeBackward => (0..n).map(|m| seg(1.0, -((m + 1) as f64) * l, 1.0)).collect(),
            KernelMode::PerSpan => vec![seg(1.0, -l, 1.0)],
            KernelMode::VaoForward | KernelMode::VaoBackward => {
                if !n.is_multiple_of(2) {
                    return Err(invalid_config("OPC kernels need an even number of spans"));
                }
                let total = n as f64 * l;
                let mut v: Vec<PathSegment> = (n / 2..n).map(|s| seg(1.0, s as f64 * l - total, 1.0)).collect();
                v.extend((0..n / 2).map(|s| seg(-1.0, -(s as f64) * l, -1.0)));
                v
            }
        };
        Ok(Self { segments })
    }

    /// Exact value at `x = beta2 * dOmega`.
    pub fn value(&self, x: f64) -> Complex64 {
        self.segments.iter().map(|s| s.value(x)).sum()
    }

    /// Gauss-Legendre nodes per segment accurate for `|x| <= x_max`.
    ///
    /// `oversampling` scales the node count relative to the phase excursion of
    /// each segment; 1.0 gives double-precision accuracy.
    pub fn quadrature(&self, x_max: f64, oversampling: f64) -> Vec<QuadratureNode> {
        let mut out = Vec::new();
        for s in &self.segments {
            let kappa = x_max.abs() * s.length;
            let n = (oversampling * (0.6 * kappa + 24.0)).ceil().max(2.0) as usize;
            let rule = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
            let half = s.length / 2.0;
            for &(t, w) in rule.as_node_weight_pairs() {
                let u = half * (t + 1.0);
                out.push(QuadratureNode {
                    theta: s.theta0 + s.direction * u,
                    weight: s.coeff * (-s.decay * u).exp() * w * half,
                });
            }
        }
        out
    }
}

/// Evaluates `sum_q w_q e^{j x theta_q}`.
pub fn quadrature_value(nodes: &[QuadratureNode], x: f64) -> Complex64 {
    nodes.iter().map(|q| Complex64::from_polar(q.weight, x * q.theta)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FiberSpan;
    use crate::kernels::kernel_value;

    #[test]
    fn paths_match_closed_forms() {
        let p = KernelParams::from_span(&FiberSpan::ssmf(100e3), 10);
        for mode in [
            KernelMode::VsfeForward,
            KernelMode::VsfeBackward,
            KernelMode::VaoForward,
            KernelMode::VaoBackward,
            KernelMode::PerSpan,
        ] {
            let path = KernelPath::from_mode(mode, &p).unwrap();
            for &d in &[0.0, 3e19, -2e21, 5e22, -3.6e23] {
                let x = p.beta2 * d;
                let a = path.value(x);
                let b = kernel_value(mode, &p, d);
                assert!(
                    (a - b).norm() <= 1e-10 * b.norm().max(p.span_length * 1e-3),
                    "{mode:?} {d}"
                );
            }
        }
    }

    #[test]
    fn quadrature_converges() {
        let p = KernelParams::from_span(&FiberSpan::ssmf(100e3), 4);
        let x_max = 8e-3;
        for mode in [KernelMode::VsfeBackward, KernelMode::VaoBackward] {
            let path = KernelPath::from_mode(mode, &p).unwrap();
            let nodes = path.quadrature(x_max, 1.0);
            let scale = path.value(0.0).norm().max(2e4);
            for k in 0..=40 {
                let x = x_max * (k as f64 / 20.0 - 1.0);
                let err = (quadrature_value(&nodes, x) - path.value(x)).norm();
                assert!(err < 1e-10 * scale, "{mode:?} {x} {err}");
            }
        }
    }
}
