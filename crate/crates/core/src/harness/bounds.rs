//! Boundary differential bound, half-Hölder bound and the `C^{1+α}` bootstrap
//! ratio, evaluated on attached discs solved in chart coordinates.
//!
//! The differential bound is stated for a disc whose upper half-circle is sent
//! into `{ρ = 0}`. An attached disc on the upper half-disc `Δ⁺` is brought to
//! that setting by the conformal map `F: Δ⁺ → Δ`,
//! `F(ζ) = (i - w²)/(i + w²)`, `w = (1 + ζ)/(1 - ζ)`, which sends the diameter
//! onto the upper half-circle and the upper arc onto the lower one.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{InequalityRecord, DEFAULT_SLACK};
use crate::constants::Constants;
use crate::disc::holder::{holder_norm, DiscRegion};
use crate::disc::solver::diameter_offset;
use crate::disc::{DiscGrid, DiscSolution};
use crate::charts::Coefficient;
use crate::error::{Error, Result};
use crate::linalg::{eig_extremes, Mat};
use crate::par::Execution;

/// `F(ζ)`.
pub fn half_disc_map(z: Complex64) -> Complex64 {
    let w = (1.0 + z) / (1.0 - z);
    let w2 = w * w;
    (Complex64::i() - w2) / (Complex64::i() + w2)
}

/// `F'(ζ) = -8 i w / ((i + w²)² (1 - ζ)²)`.
pub fn half_disc_map_derivative(z: Complex64) -> Complex64 {
    let w = (1.0 + z) / (1.0 - z);
    let d = Complex64::i() + w * w;
    -8.0 * Complex64::i() * w / (d * d * (1.0 - z) * (1.0 - z))
}

/// `F^{-1}(ω)`: `w² = i(1 - ω)/(1 + ω)`, principal root, `ζ = (w - 1)/(w + 1)`.
pub fn half_disc_map_inverse(omega: Complex64) -> Complex64 {
    let w = (Complex64::i() * (1.0 - omega) / (1.0 + omega)).sqrt();
    (w - 1.0) / (w + 1.0)
}

/// Boundary value of `g` at angle `s`, linear in angle between boundary nodes.
pub fn boundary_value(grid: &DiscGrid, g: &DiscSolution, s: f64) -> Vec<Complex64> {
    let m = grid.boundary_count;
    let x = s.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
    let k0 = x.floor() as usize % m;
    let k1 = (k0 + 1) % m;
    let f = x - x.floor();
    let a0 = grid.lattice_count + k0;
    let a1 = grid.lattice_count + k1;
    g.components.iter().map(|c| c[a0] * (1.0 - f) + c[a1] * f).collect()
}

/// `∫_0^{2π} ρ(g(F^{-1}(e^{iθ}))) dθ` with `ρ = Σ y_i²`; only the lower half
/// of the circle contributes.
pub fn boundary_rho_integral(grid: &DiscGrid, g: &DiscSolution, points: usize) -> f64 {
    let h = PI / points as f64;
    (0..points)
        .map(|i| {
            let theta = PI + (i as f64 + 0.5) * h;
            let zeta = half_disc_map_inverse(Complex64::from_polar(1.0, theta));
            boundary_value(grid, g, zeta.arg()).iter().map(|v| v.im * v.im).sum::<f64>()
        })
        .sum::<f64>()
        * h
}

/// Operator norm of the real differential `[∂_u g, ∂_v g]` at node `a`.
pub fn differential_norm(grid: &DiscGrid, g: &DiscSolution, a: usize) -> f64 {
    let n = g.n();
    let mut jac = Mat::zeros(2 * n, 2);
    for (c, comp) in g.components.iter().enumerate() {
        let (du, dv) = grid.partials(comp, a);
        jac[(c, 0)] = du.re;
        jac[(n + c, 0)] = du.im;
        jac[(c, 1)] = dv.re;
        jac[(n + c, 1)] = dv.im;
    }
    eig_extremes(&(jac.transpose() * jac)).1.max(0.0).sqrt()
}

/// Differential bound at lattice nodes of `Δ⁺` within `radius` of the diameter
/// point `a`, in both normalizations: `1/Im F(a)` (name `differential_bound`)
/// and `1/(1 - |a|)` (name `differential_bound_alt`). `lambda0` is the Levi
/// minimum of `Σ y_i²` for the chart structure.
#[allow(clippy::too_many_arguments)]
pub fn differential_bound_check(
    grid: &DiscGrid,
    g: &DiscSolution,
    lambda0: f64,
    a: f64,
    radius: f64,
    tol: f64,
    constants: &Constants,
    context: &str,
) -> Result<Vec<InequalityRecord>> {
    if !(a.abs() < 1.0) {
        return Err(Error::PreconditionFailed(format!("a = {a} is not on the open diameter")));
    }
    let off = diameter_offset(grid, g);
    if off * off > tol {
        return Err(Error::PreconditionFailed(format!("ρ∘h = {:.3e} on the diameter", off * off)));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::PreconditionFailed(format!("λ₀ = {lambda0:.3e} is not positive")));
    }
    let integral = boundary_rho_integral(grid, g, 4096);
    let fa = half_disc_map(Complex64::new(a, 0.0));
    let root = (integral / lambda0).sqrt();
    let cdd = constants.c_double_prime;
    let mut out = Vec::new();
    for idx in 0..grid.lattice_count {
        let z = grid.nodes[idx];
        if z.im <= 0.0 || (z - a).norm() > radius {
            continue;
        }
        let lhs = differential_norm(grid, g, idx);
        let fz = half_disc_map(z);
        let scale = half_disc_map_derivative(z).norm() * cdd * root / (1.0 - fz.norm()).sqrt();
        let ctx = format!("{context} zeta={:.6},{:.6} a={a:.6}", z.re, z.im);
        out.push(
            InequalityRecord::new("differential_bound", lhs, scale / fa.im, DEFAULT_SLACK, ctx.clone())
                .with_constant("c_double_prime", cdd)
                .with_constant("rho_integral", integral)
                .with_constant("lambda0", lambda0),
        );
        out.push(
            InequalityRecord::new("differential_bound_alt", lhs, scale / (1.0 - a.abs()), DEFAULT_SLACK, ctx)
                .with_constant("c_double_prime", cdd)
                .with_constant("rho_integral", integral)
                .with_constant("lambda0", lambda0),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfHolder {
    pub record: InequalityRecord,
    pub seminorm: f64,
    /// `sup_{Δ⁺} |z∘h|`.
    pub sup_norm: f64,
    pub lambda_e: f64,
    /// `c̃ / (1 - |a|)`, so that `rhs = coefficient · sup_norm / √λ_E`.
    pub coefficient: f64,
}

/// Half-Hölder seminorm of `z∘h` on `W = {|ζ - a| <= radius} ∩ Δ⁺` against
/// `c̃_eff/(1 - |a|) · |z∘h|_∞ / √λ_E`.
#[allow(clippy::too_many_arguments)]
pub fn half_holder_check(
    grid: &DiscGrid,
    g: &DiscSolution,
    a: f64,
    radius: f64,
    lambda_e: f64,
    tol: f64,
    constants: &Constants,
    seed: u64,
    exec: Execution,
    context: &str,
) -> Result<HalfHolder> {
    let off = diameter_offset(grid, g);
    if off > tol {
        return Err(Error::PreconditionFailed(format!("disc is not attached: |y*| = {off:.3e} on the diameter")));
    }
    if !(lambda_e > 0.0) {
        return Err(Error::PreconditionFailed(format!("λ_E = {lambda_e:.3e} is not positive")));
    }
    let w = DiscRegion::HalfBall { center: a, radius };
    let rep = holder_norm(grid, &g.components, &w, 0.5, 0, seed, exec)?;
    let sup_norm = (0..grid.len())
        .filter(|&i| grid.nodes[i].im >= 0.0)
        .map(|i| g.value(i).norm())
        .fold(0.0, f64::max);
    let coefficient = constants.c_tilde_effective / (1.0 - a.abs());
    let rhs = coefficient * sup_norm / lambda_e.sqrt();
    let record = InequalityRecord::new("half_holder", rep.seminorm, rhs, DEFAULT_SLACK, format!("{context} a={a:.6}"))
        .with_constant("c_tilde_effective", constants.c_tilde_effective)
        .with_constant("lambda_e", lambda_e)
        .with_constant("sup_norm", sup_norm);
    Ok(HalfHolder {
        record,
        seminorm: rep.seminorm,
        sup_norm,
        lambda_e,
        coefficient,
    })
}

/// Smallness proxy for the `C^α` norm of the coefficient along the disc.
pub const COEFFICIENT_SMALLNESS: f64 = 0.5;

/// `(|g|_{C^{1+α}(K)}, |g|_{C^{1/2}(K)}, |q∘g|_{C^α(K)})` for a converged disc.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_norms(
    grid: &DiscGrid,
    g: &DiscSolution,
    q: &dyn Coefficient,
    k: &DiscRegion,
    alpha: f64,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64, f64)> {
    if !g.converged || g.residual > tol {
        return Err(Error::PreconditionFailed(format!(
            "disc residual {:.3e} exceeds tolerance {tol:.3e}",
            g.residual
        )));
    }
    let n = g.n();
    let mut coef = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; n * n];
    for a in 0..grid.len() {
        let m = q.q(&g.value(a))?;
        for (i, v) in m.iter().enumerate() {
            coef[i][a] = *v;
        }
    }
    let qn = holder_norm(grid, &coef, k, alpha, 0, seed, exec)?.total;
    if qn > COEFFICIENT_SMALLNESS {
        return Err(Error::PreconditionFailed(format!(
            "coefficient C^α norm {qn:.3e} exceeds {COEFFICIENT_SMALLNESS}"
        )));
    }
    let high = holder_norm(grid, &g.components, k, alpha, 1, seed, exec)?.total;
    let half = holder_norm(grid, &g.components, k, 0.5, 0, seed, exec)?.total;
    Ok((high, half, qn))
}

/// `Λ_fit` = max of `C^{1+α}/C^{1/2}` over the calibration pairs; one record per
/// held-out pair asserting `ratio <= 1.1 Λ_fit`.
pub fn bootstrap_check(calibration: &[(f64, f64)], holdout: &[(f64, f64)]) -> (f64, Vec<InequalityRecord>) {
    let fit = calibration.iter().map(|(h, l)| h / l).fold(0.0, f64::max);
    let records = holdout
        .iter()
        .enumerate()
        .map(|(i, (h, l))| {
            InequalityRecord::new("bootstrap_ratio", h / l, 1.1 * fit, 0.0, format!("holdout={i}")).with_constant("lambda_fit", fit)
        })
        .collect();
    (fit, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_map_geometry() {
        for z in [Complex64::new(0.1, 0.3), Complex64::new(-0.5, 0.2), Complex64::new(0.7, 0.6)] {
            let w = half_disc_map(z);
            assert!(w.norm() < 1.0);
            assert!((half_disc_map_inverse(w) - z).norm() < 1e-12);
            let h = 1e-6;
            let fd = (half_disc_map(z + h) - half_disc_map(z - h)) / (2.0 * h);
            assert!((fd - half_disc_map_derivative(z)).norm() < 1e-6);
        }
        for x in [-0.8, 0.0, 0.5] {
            let w = half_disc_map(Complex64::new(x, 0.0));
            assert!((w.norm() - 1.0).abs() < 1e-14 && w.im > 0.0);
        }
        for s in [0.3, 1.5, 2.8] {
            let w = half_disc_map(Complex64::from_polar(1.0, s));
            assert!((w.norm() - 1.0).abs() < 1e-12 && w.im < 0.0);
        }
    }

    #[test]
    fn bootstrap_fit() {
        let (fit, rec) = bootstrap_check(&[(2.0, 1.0), (3.0, 1.0)], &[(3.2, 1.0), (4.0, 1.0)]);
        assert_eq!(fit, 3.0);
        assert!(rec[0].passed && !rec[1].passed);
    }
}
