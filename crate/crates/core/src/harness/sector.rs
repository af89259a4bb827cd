//! The sector mean-value bound for nonnegative subharmonic functions that
//! vanish on the upper half-circle.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{InequalityRecord, DEFAULT_SLACK};
use crate::error::{Error, Result};

/// Relative allowance for the 64-point circle means in the sub-mean-value check.
const MEAN_QUADRATURE_SLACK: f64 = 1e-6;

/// Harmonic extension of `Σ w_i 1_{[θ1_i, θ2_i]}` with arcs inside `[π, 2π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcData {
    /// `(θ1, θ2, weight)` with `π <= θ1 < θ2 <= 2π`, `weight >= 0`.
    pub arcs: Vec<(f64, f64, f64)>,
}

/// Harmonic measure of the arc from `t1` to `t2` (length at most π) at `z`.
fn arc_measure(z: Complex64, t1: f64, t2: f64) -> f64 {
    let a = Complex64::from_polar(1.0, t2) - z;
    let b = Complex64::from_polar(1.0, t1) - z;
    let mut ang = (a / b).arg();
    if ang < 0.0 {
        ang += TAU;
    }
    ang / PI - (t2 - t1) / TAU
}

impl ArcData {
    pub fn value(&self, z: Complex64) -> f64 {
        self.arcs
            .iter()
            .map(|&(t1, t2, w)| {
                let mid = 0.5 * (t1 + t2);
                w * (arc_measure(z, t1, mid) + arc_measure(z, mid, t2))
            })
            .sum()
    }

    /// `∫_π^{2π} φ(e^{iθ}) dθ / π`.
    pub fn lower_mean(&self) -> f64 {
        self.arcs.iter().map(|&(t1, t2, w)| w * (t2 - t1) / PI).sum()
    }
}

/// `∫_π^{2π} φ(e^{iθ}) dθ / π` by the midpoint rule.
pub fn lower_mean_by_quadrature(phi: &dyn Fn(Complex64) -> f64, points: usize) -> f64 {
    let h = PI / points as f64;
    (0..points)
        .map(|i| phi(Complex64::from_polar(1.0, PI + (i as f64 + 0.5) * h)))
        .sum::<f64>()
        * h
        / PI
}

/// For each `ζ` in the sector `W_α = {r e^{iθ}: 0 < r <= 1, α < θ < π - α}`:
/// `φ(ζ) <= (1/sin²α) (∫_π^{2π} φ dθ/π) (1 - |ζ|)`.
///
/// Preconditions checked: `φ >= 0` at the samples, `φ <= tol` on the upper
/// half-circle, and the sub-mean-value inequality on 5 circles around each sample.
pub fn sector_mean_check(
    phi: &dyn Fn(Complex64) -> f64,
    lower_mean: f64,
    alpha: f64,
    samples: &[Complex64],
    tol: f64,
) -> Result<Vec<InequalityRecord>> {
    if !(alpha > 0.0 && alpha < 0.5 * PI) {
        return Err(Error::PreconditionFailed(format!("α = {alpha} outside ]0, π/2[")));
    }
    for i in 0..256 {
        let z = Complex64::from_polar(1.0, PI * (i as f64 + 0.5) / 256.0);
        let v = phi(z);
        if v.abs() > tol {
            return Err(Error::PreconditionFailed(format!("φ = {v:.3e} on the upper half-circle at {z}")));
        }
    }
    let mut out = Vec::with_capacity(samples.len());
    for &z in samples {
        let r = z.norm();
        let th = z.arg();
        if !(r > 0.0 && r <= 1.0 + 1e-12 && th > alpha && th < PI - alpha) {
            return Err(Error::PreconditionFailed(format!("{z} is not in W_α")));
        }
        let v = phi(z);
        if v < -tol {
            return Err(Error::PreconditionFailed(format!("φ({z}) = {v:.3e} is negative")));
        }
        if r < 1.0 {
            for k in 1..=5 {
                let rad = (1.0 - r) * k as f64 / 6.0;
                let mean = (0..64)
                    .map(|m| phi(z + Complex64::from_polar(rad, TAU * m as f64 / 64.0)))
                    .sum::<f64>()
                    / 64.0;
                // harmonic φ gives equality, so allow for the circle quadrature error
                if mean < v - tol - MEAN_QUADRATURE_SLACK * v.abs() {
                    return Err(Error::PreconditionFailed(format!(
                        "sub-mean-value fails at {z}, radius {rad:.3e}: mean {mean:.6e} < {v:.6e}"
                    )));
                }
            }
        }
        let s = alpha.sin();
        let rhs = lower_mean / (s * s) * (1.0 - r);
        out.push(
            InequalityRecord::new("sector_mean", v, rhs, DEFAULT_SLACK, format!("zeta={:.6},{:.6} alpha={alpha:.6}", z.re, z.im))
                .with_constant("lower_mean", lower_mean),
        );
    }
    Ok(out)
}
