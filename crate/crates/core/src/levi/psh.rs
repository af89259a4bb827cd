//! Strictly plurisubharmonic constructions: ε_m, the logarithmic barrier, the
//! quadratic deflation, minimal curvature and squared defining functions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cutoff::{k_constant, Cutoff};
use super::form::{lambda0, Lambda0Options, Lambda0Result};
use super::scalar::{Barrier, ScalarField};
use crate::acs::{deviation_c1, StructureField};
use crate::error::{Error, Result};
use crate::linalg::{j_st, op_norm, Mat, Vector};
use crate::region::{DomainSpec, Excluding, Region, SampledRegion};

/// `min(1/(32(1+m)), 1/(32 m (1+m)))`.
pub fn epsilon_m(m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::NonPositive(m));
    }
    Ok((1.0 / (32.0 * (1.0 + m))).min(1.0 / (32.0 * m * (1.0 + m))))
}

#[derive(Clone)]
pub struct PshBuilderParams {
    pub p: Vec<f64>,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub theta: Arc<dyn Cutoff>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PshCertificate {
    pub lambda0: Lambda0Result,
    pub excluded_radius: f64,
    pub k: f64,
    pub epsilon_m: f64,
    pub deviation_c1: f64,
}

/// Radius of the ball around the pole left out of the barrier certificate.
pub const POLE_EXCLUSION: f64 = 1e-4;

fn check_standard_at(j: &StructureField, p: &[f64], failures: &mut Vec<String>) {
    let dev = op_norm(&(j.value(p) - j_st(j.n())));
    if dev > 1e-10 {
        failures.push(format!("J(p) differs from J_st by {dev:.3e}"));
    }
}

/// Builds `ln θ(|x-p|²/r²) + A|x-p| + B|x-p|²/r²` and certifies λ₀ > 0 on `D`
/// minus a small ball around `p`.
pub fn psh_log_builder(
    params: &PshBuilderParams,
    j: &StructureField,
    d: &DomainSpec,
    opts: &Lambda0Options,
) -> Result<(ScalarField, PshCertificate)> {
    let k = k_constant(params.theta.as_ref())?;
    let eps = epsilon_m(d.bound)?;
    let (dev, _) = deviation_c1(j, d);
    let mut failures = Vec::new();
    check_standard_at(j, &params.p, &mut failures);
    if dev > eps {
        failures.push(format!("|J - J_st|_C1 = {dev:.4e} exceeds ε_m = {eps:.4e}"));
    }
    if !(params.a > 1.0) {
        failures.push(format!("A = {} is not > 1", params.a));
    }
    if !(params.b >= k * (1.0 - 1e-12)) {
        failures.push(format!("B = {} is below k = {k}", params.b));
    }
    if !(params.r > 0.0) {
        failures.push(format!("r = {} is not positive", params.r));
    }
    if !failures.is_empty() {
        return Err(Error::PreconditionFailed(failures.join("; ")));
    }
    let u = ScalarField::barrier(Barrier {
        p: params.p.clone(),
        r: params.r,
        a: params.a,
        b: params.b,
        theta: params.theta.clone(),
    });
    let region = Excluding {
        base: d,
        center: params.p.clone(),
        radius: POLE_EXCLUSION,
    };
    let l0 = lambda0(j, &u, &region, opts);
    if !(l0.value > 0.0) {
        return Err(Error::NotCertified(format!(
            "barrier λ₀ = {:.4e} at {:?}",
            l0.value, l0.argmin_point
        )));
    }
    Ok((
        u,
        PshCertificate {
            lambda0: l0,
            excluded_radius: POLE_EXCLUSION,
            k,
            epsilon_m: eps,
            deviation_c1: dev,
        },
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeflateCertificate {
    pub lambda0_input: f64,
    /// `λ₀(w) - (9/2) δ`
    pub guaranteed: f64,
    pub lambda0_output: Lambda0Result,
}

/// `w - δ|x - p|²`, valid for `δ <= (2/9) λ₀(D, J, w)`.
pub fn psh_deflate(
    w: &ScalarField,
    delta: f64,
    p: &[f64],
    j: &StructureField,
    d: &DomainSpec,
    opts: &Lambda0Options,
) -> Result<(ScalarField, DeflateCertificate)> {
    let eps = epsilon_m(d.bound)?;
    let (dev, worst) = deviation_c1(j, d);
    if dev > eps {
        return Err(Error::PreconditionFailed(format!(
            "|J - J_st|_C1 = {dev:.4e} exceeds ε_m = {eps:.4e} (at {worst:?})"
        )));
    }
    let l0 = lambda0(j, w, d, opts).value;
    if l0 < 0.0 {
        return Err(Error::PreconditionFailed(format!("w is not plurisubharmonic: λ₀ = {l0:.4e}")));
    }
    let limit = 2.0 / 9.0 * l0;
    if delta > limit {
        return Err(Error::DeltaTooLarge { delta, limit });
    }
    let out = if delta == 0.0 { w.clone() } else { w.minus_squared(delta, p.to_vec()) };
    let measured = lambda0(j, &out, d, opts);
    Ok((
        out,
        DeflateCertificate {
            lambda0_input: l0,
            guaranteed: l0 - 4.5 * delta,
            lambda0_output: measured,
        },
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalCurvature {
    pub value: f64,
    pub per_chart: Vec<f64>,
}

/// λ_E^J: the minimum over charts of λ₀(unit ball, z_*J, Σ y_i²).
pub fn minimal_curvature(charts: &[StructureField], opts: &Lambda0Options) -> Result<MinimalCurvature> {
    if charts.is_empty() {
        return Err(Error::EmptyAtlas);
    }
    let per_chart: Vec<f64> = charts
        .iter()
        .map(|j| {
            let ball = DomainSpec::unit_ball(j.n());
            lambda0(j, &ScalarField::sum_y_squared(j.n()), &ball, opts).value
        })
        .collect();
    let value = per_chart.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(MinimalCurvature { value, per_chart })
}

#[derive(Debug, Clone)]
pub struct DefiningRho {
    pub rho: ScalarField,
    /// Largest tube radius (found by bisection) on which λ₀ > 0 was measured.
    pub tube_radius: f64,
    pub tube_lambda0: f64,
    /// λ₀ on the sampled zero set itself.
    pub zero_set_lambda0: f64,
    pub zero_set_samples: usize,
    pub min_gram_det: f64,
}

const GRAM_TOL: f64 = 1e-8;

/// Gauss–Newton projection of `x` onto `{r_1 = ... = r_n = 0}`.
fn project_zero_set(rs: &[ScalarField], x: &[f64]) -> Result<Option<Vec<f64>>> {
    let mut y = x.to_vec();
    for _ in 0..50 {
        let vals = Vector::from_iterator(rs.len(), rs.iter().map(|r| r.value(&y)));
        if vals.norm() < 1e-13 {
            return Ok(Some(y));
        }
        let grads = Mat::from_fn(rs.len(), y.len(), |i, k| rs[i].gradient(&y)[k]);
        let gram = &grads * grads.transpose();
        if gram.determinant().abs() < GRAM_TOL {
            return Err(Error::DegenerateDefiningFunctions(format!("Gram determinant vanishes near {y:?}")));
        }
        let step = grads.transpose() * gram.try_inverse().expect("checked") * vals;
        for (yi, si) in y.iter_mut().zip(step.iter()) {
            *yi -= si;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
    }
    Ok(None)
}

/// `ρ = Σ r_i²`, with a Gram-determinant check on the sampled zero set and a
/// tube radius around it on which λ₀(ρ) > 0.
pub fn defining_rho(
    rs: &[ScalarField],
    j: &StructureField,
    d: &DomainSpec,
    opts: &Lambda0Options,
) -> Result<DefiningRho> {
    if rs.is_empty() || rs.len() != j.n() {
        return Err(Error::DegenerateDefiningFunctions(format!(
            "need {} defining functions, got {}",
            j.n(),
            rs.len()
        )));
    }
    let samples = d.samples();
    let mut zero_set = Vec::new();
    let mut dists = Vec::with_capacity(samples.len());
    for x in &samples {
        match project_zero_set(rs, x)? {
            Some(z) => {
                let dist = x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if d.contains(&z) {
                    zero_set.push(z);
                }
                dists.push(dist);
            }
            None => dists.push(f64::INFINITY),
        }
    }
    if zero_set.is_empty() {
        return Err(Error::DegenerateDefiningFunctions("zero set does not meet the domain".into()));
    }
    let mut min_gram_det = f64::INFINITY;
    for z in &zero_set {
        let grads = Mat::from_fn(rs.len(), z.len(), |i, k| rs[i].gradient(z)[k]);
        let det = (&grads * grads.transpose()).determinant();
        min_gram_det = min_gram_det.min(det);
    }
    if min_gram_det < GRAM_TOL {
        return Err(Error::DegenerateDefiningFunctions(format!("Gram determinant {min_gram_det:.3e}")));
    }
    let rho = ScalarField::sum_of_squares(rs.to_vec());
    let spacing = d.spacing();
    let rs_owned: Arc<Vec<ScalarField>> = Arc::new(rs.to_vec());
    let d_owned = d.clone();
    let tube = |tau: f64| -> SampledRegion {
        let mut pts = zero_set.clone();
        pts.extend(samples.iter().zip(&dists).filter(|(_, &dd)| dd <= tau).map(|(x, _)| x.clone()));
        let rs2 = rs_owned.clone();
        let dom = d_owned.clone();
        SampledRegion {
            dim: d.dim(),
            points: pts,
            member: Arc::new(move |x: &[f64]| {
                if !dom.contains(x) {
                    return false;
                }
                match project_zero_set(&rs2, x) {
                    Ok(Some(z)) => x.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= tau,
                    _ => false,
                }
            }),
            spacing,
        }
    };
    let zero_l0 = lambda0(j, &rho, &tube(0.0), opts).value;
    let mut radius = 0.0;
    let mut radius_l0 = zero_l0;
    if zero_l0 > 0.0 {
        let mut hi = dists.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let hi_l0 = lambda0(j, &rho, &tube(hi), opts).value;
        if hi_l0 > 0.0 {
            radius = hi;
            radius_l0 = hi_l0;
        } else {
            let mut lo = 0.0;
            for _ in 0..12 {
                let mid = 0.5 * (lo + hi);
                let v = lambda0(j, &rho, &tube(mid), opts).value;
                if v > 0.0 {
                    lo = mid;
                    radius_l0 = v;
                } else {
                    hi = mid;
                }
            }
            radius = lo;
        }
    }
    Ok(DefiningRho {
        rho,
        tube_radius: radius,
        tube_lambda0: radius_l0,
        zero_set_lambda0: zero_l0,
        zero_set_samples: zero_set.len(),
        min_gram_det,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_values() {
        assert_eq!(epsilon_m(1.0).unwrap(), 1.0 / 64.0);
        assert_eq!(epsilon_m(0.5).unwrap(), 1.0 / 48.0);
        assert_eq!(epsilon_m(2.0).unwrap(), 1.0 / 192.0);
        assert!(epsilon_m(0.0).is_err());
    }

    #[test]
    fn empty_atlas() {
        assert!(matches!(minimal_curvature(&[], &Lambda0Options::default()), Err(Error::EmptyAtlas)));
    }
}
