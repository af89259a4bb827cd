//! Bounds for the Kobayashi–Royden pseudometric `K(p, v)`: certified lower
//! bounds from a plurisubharmonic exhaustion, localization of small discs, and
//! upper bounds from solved discs.

use serde::{Deserialize, Serialize};

use crate::acs::{deviation_pointwise, StructureField};
use crate::charts::{frame_matrix, Chart, Coefficient};
use crate::constants::Constants;
use crate::disc::{solve_disc, DiscGrid, SolverOptions};
use crate::error::{Error, Result};
use crate::levi::form::{lambda0, Lambda0Options, Lambda0Result};
use crate::levi::psh::epsilon_m;
use crate::levi::scalar::ScalarField;
use crate::linalg::{self, j_st, op_norm, Mat, Vector};
use crate::par;
use crate::region::{DomainSpec, Region};

/// Number of verification points for the frame conditions.
const VERIFY_POINTS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonCheck {
    pub condition: String,
    pub worst: f64,
    pub limit: f64,
    pub point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundConstants {
    pub k: f64,
    pub c_prime: f64,
    /// `c_m` for the `m` used (absent for frame-based bounds).
    pub c_m: Option<f64>,
    pub m: Option<f64>,
    /// Radius bound of the domain entering `e^{-2t}`.
    pub t: Option<f64>,
    /// Chart dilation, for chart-based bounds.
    pub dilation: Option<f64>,
    pub epsilon_checks: Vec<EpsilonCheck>,
    pub manifest_sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// `c_m √λ₀ |v| / √|u(p)|` with `J(p) = J_st`.
    Basepoint,
    /// Frame-normalized bound with `c' e^{-2t}`.
    Frame,
    /// Frame bound applied in a dilated chart.
    Chart,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: Option<f64>,
    pub lambda0_used: f64,
    pub lambda0: Lambda0Result,
    pub constants: BoundConstants,
    pub basepoint: Vec<f64>,
    pub direction: Vec<f64>,
    pub u_at_p: f64,
    pub provenance: Provenance,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn negativity(u: &ScalarField, region: &dyn Region) -> (f64, Vec<f64>) {
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for x in region.samples() {
        let v = u.value(&x);
        if v > worst.0 {
            worst = (v, x);
        }
    }
    worst
}

/// `c_m √λ₀ |v| / √|u(p)|` for `D ⊂ m B`, `J(p) = J_st`, `|J - J_st|_{C¹} <= ε_m`.
pub fn lower_bound_basepoint(
    d: &DomainSpec,
    j: &StructureField,
    u: &ScalarField,
    p: &[f64],
    v: &[f64],
    constants: &Constants,
    opts: &Lambda0Options,
) -> Result<BoundReport> {
    let m = d.bound;
    let eps = epsilon_m(m)?;
    let mut failures = Vec::new();
    let at_p = op_norm(&(j.value(p) - j_st(j.n())));
    if at_p > 1e-10 {
        failures.push(format!("J(p) - J_st = {at_p:.3e}"));
    }
    let (dev, worst) = crate::acs::deviation_c1(j, d);
    if dev > eps {
        failures.push(format!("|J - J_st|_C1 = {dev:.4e} > ε_m = {eps:.4e} at {worst:?}"));
    }
    let (umax, uarg) = negativity(u, d);
    if !(umax < 0.0) {
        failures.push(format!("u = {umax:.3e} >= 0 at {uarg:?}"));
    }
    let up = u.value(p);
    if !(up < 0.0) {
        failures.push(format!("u(p) = {up:.3e} is not negative"));
    }
    if !failures.is_empty() {
        return Err(Error::PreconditionFailed(failures.join("; ")));
    }
    let l0 = lambda0(j, u, d, opts);
    if !(l0.value > 0.0) {
        return Err(Error::PreconditionFailed(format!("λ₀ = {:.4e} is not positive", l0.value)));
    }
    let c_m = constants.c_m(m);
    Ok(BoundReport {
        lower: c_m * l0.value.sqrt() * norm(v) / up.abs().sqrt(),
        upper: None,
        lambda0_used: l0.value,
        lambda0: l0,
        constants: BoundConstants {
            k: constants.k,
            c_prime: constants.c_prime,
            c_m: Some(c_m),
            m: Some(m),
            t: None,
            dilation: None,
            epsilon_checks: Vec::new(),
            manifest_sha256: constants.hash(),
        },
        basepoint: p.to_vec(),
        direction: v.to_vec(),
        u_at_p: up,
        provenance: Provenance::Basepoint,
    })
}

/// Checks on a deterministic subsample `q` of the region: `P_q` invertible,
/// `|P_q| <= 2`, `|P_q^{-1}| <= 2` and `|P_q^{-1} J(P_q x + q) P_q - J_st|_{C¹} <= ε_m(2)`
/// over the images `P_q^{-1}(x - q)` of the region samples.
pub fn frame_conditions(j: &StructureField, region: &dyn Region, constants: &Constants) -> Vec<EpsilonCheck> {
    let samples = region.samples();
    let stride = samples.len().div_ceil(VERIFY_POINTS).max(1);
    let verify: Vec<&Vec<f64>> = samples.iter().step_by(stride).collect();
    let rows = par::map_slice(par::Execution::Parallel, &verify, |q| {
        let jq = j.value(q);
        let p = frame_matrix(&jq);
        let p_norm = op_norm(&p);
        let Ok(p_inv) = linalg::inverse(&p, "frame") else {
            return (p_norm, f64::INFINITY, f64::INFINITY);
        };
        let pushed = match j.pushforward_affine(&p, q) {
            Ok(s) => s,
            Err(_) => return (p_norm, op_norm(&p_inv), f64::INFINITY),
        };
        let dev = samples
            .iter()
            .map(|x| {
                let w = &p_inv * Vector::from_iterator(x.len(), x.iter().zip(q.iter()).map(|(a, b)| a - b));
                deviation_pointwise(&pushed, w.as_slice()).1
            })
            .fold(0.0, f64::max);
        (p_norm, op_norm(&p_inv), dev)
    });
    let mut checks = vec![
        ("frame norm |P_q|", 2.0),
        ("inverse frame norm |P_q^-1|", 2.0),
        ("frame-normalized |J - J_st|_C1", constants.epsilon_2),
    ]
    .into_iter()
    .map(|(c, limit)| EpsilonCheck {
        condition: c.to_string(),
        worst: f64::NEG_INFINITY,
        limit,
        point: Vec::new(),
        passed: true,
    })
    .collect::<Vec<_>>();
    for (q, (a, b, c)) in verify.iter().zip(rows) {
        for (check, val) in checks.iter_mut().zip([a, b, c]) {
            let val = if val.is_nan() { f64::INFINITY } else { val };
            if val > check.worst {
                check.worst = val;
                check.point = q.to_vec();
            }
        }
    }
    for c in &mut checks {
        c.passed = c.worst <= c.limit;
    }
    checks
}

fn first_failure(checks: &[EpsilonCheck]) -> Option<Error> {
    checks.iter().find(|c| !c.passed).map(|c| Error::EpsilonPrimeViolated {
        condition: format!("{} = {:.4e} > {:.4e}", c.condition, c.worst, c.limit),
        point: c.point.clone(),
        value: c.worst,
    })
}

#[allow(clippy::too_many_arguments)]
fn frame_bound(
    region: &dyn Region,
    t: f64,
    j: &StructureField,
    u: &ScalarField,
    v_norm: f64,
    u_p: f64,
    constants: &Constants,
    opts: &Lambda0Options,
) -> Result<(f64, Lambda0Result, Vec<EpsilonCheck>)> {
    if !(t <= 1.0 + 1e-12) {
        return Err(Error::PreconditionFailed(format!("domain radius t = {t} exceeds 1")));
    }
    let checks = frame_conditions(j, region, constants);
    if let Some(e) = first_failure(&checks) {
        return Err(e);
    }
    let (umax, uarg) = negativity(u, region);
    if !(umax < 0.0) || !(u_p < 0.0) {
        return Err(Error::PreconditionFailed(format!(
            "u must be negative: max {umax:.3e} at {uarg:?}, u(p) = {u_p:.3e}"
        )));
    }
    let l0 = lambda0(j, u, region, opts);
    if !(l0.value > 0.0) {
        return Err(Error::PreconditionFailed(format!("λ₀ = {:.4e} is not positive", l0.value)));
    }
    let lower = constants.c_prime * (-2.0 * t).exp() * l0.value.sqrt() * v_norm / u_p.abs().sqrt();
    Ok((lower, l0, checks))
}

/// `c' e^{-2t} √λ₀ |v| / √|u(p)|` for `D ⊂ t B`, `t <= 1`, with the frame
/// conditions checked directly.
pub fn lower_bound(
    d: &DomainSpec,
    j: &StructureField,
    u: &ScalarField,
    p: &[f64],
    v: &[f64],
    constants: &Constants,
    opts: &Lambda0Options,
) -> Result<BoundReport> {
    let t = d.bound;
    let up = u.value(p);
    let (lower, l0, checks) = frame_bound(d, t, j, u, norm(v), up, constants, opts)?;
    Ok(BoundReport {
        lower,
        upper: None,
        lambda0_used: l0.value,
        lambda0: l0,
        constants: BoundConstants {
            k: constants.k,
            c_prime: constants.c_prime,
            c_m: None,
            m: None,
            t: Some(t),
            dilation: None,
            epsilon_checks: checks,
            manifest_sha256: constants.hash(),
        },
        basepoint: p.to_vec(),
        direction: v.to_vec(),
        u_at_p: up,
        provenance: Provenance::Frame,
    })
}

/// Chart data for [`lower_bound_chart`], kept for the two-route check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartBound {
    pub report: BoundReport,
    /// `t = min(1, ε_m(2) / |z_*J - J_st|_{C¹(B)})`.
    pub dilation: f64,
    /// λ₀ of `(z(D) ∩ tB, z_*J, u∘z^{-1})`.
    pub lambda0_chart: f64,
    /// λ₀ of the dilated data on `z(D)/t ∩ B`; equals `t² lambda0_chart`.
    pub lambda0_dilated: f64,
}

/// `z(D) ∩ rB`, scaled by `1/scale`, with membership through the inverse chart.
struct ChartRegion<'a> {
    chart: &'a dyn Chart,
    domain: &'a DomainSpec,
    points: Vec<Vec<f64>>,
    radius: f64,
    scale: f64,
    spacing: f64,
}

impl Region for ChartRegion<'_> {
    fn dim(&self) -> usize {
        self.chart.dim()
    }
    fn samples(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|x| x.iter().map(|c| c / self.scale).collect()).collect()
    }
    fn contains(&self, x: &[f64]) -> bool {
        let y: Vec<f64> = x.iter().map(|c| c * self.scale).collect();
        norm(&y) <= self.radius + 1e-12 && self.chart.inverse(&y).is_ok_and(|q| self.domain.contains(&q))
    }
    fn spacing(&self) -> f64 {
        self.spacing / self.scale
    }
}

/// The frame bound in a chart with `z_*J(0) = J_st`, after dilating by
/// `t = min(1, ε_m(2) / |z_*J - J_st|_{C¹(B)})`. `u` is given in base coordinates.
pub fn lower_bound_chart(
    d: &DomainSpec,
    chart: &dyn Chart,
    u: &ScalarField,
    p: &[f64],
    v: &[f64],
    constants: &Constants,
    opts: &Lambda0Options,
) -> Result<ChartBound> {
    let dim = chart.dim();
    let zj = chart.structure();
    let (dev, _) = crate::acs::deviation_c1(&zj, &DomainSpec::unit_ball(dim / 2));
    let t = if dev > 0.0 { (constants.epsilon_2 / dev).min(1.0) } else { 1.0 };
    let zp = chart.forward(p);
    if norm(&zp) > t + 1e-12 {
        return Err(Error::PreconditionFailed(format!(
            "z(p) has norm {:.4e} outside the dilation radius {t:.4e}",
            norm(&zp)
        )));
    }
    let points: Vec<Vec<f64>> = d
        .samples()
        .iter()
        .map(|q| chart.forward(q))
        .filter(|x| norm(x) <= t + 1e-12)
        .collect();
    let dz = chart.differential(p);
    let region = |scale: f64| ChartRegion {
        chart,
        domain: d,
        points: points.clone(),
        radius: t,
        scale,
        spacing: d.spacing() * op_norm(&dz),
    };
    let zu = chart.pull_scalar(u);
    let chart_l0 = lambda0(&zj, &zu, &region(1.0), opts);

    let tmat = Mat::identity(dim, dim) * t;
    let dilated_j = zj.pushforward_affine(&tmat, &vec![0.0; dim])?;
    let dilated_u = zu.compose_affine(tmat, vec![0.0; dim]);
    let dilated = region(t);
    let radius = dilated.samples().iter().map(|x| norm(x)).fold(0.0, f64::max).min(1.0);
    let up = u.value(p);
    let dv = (&dz * Vector::from_column_slice(v)).norm() / t;
    let (lower, l0, checks) = frame_bound(&dilated, radius, &dilated_j, &dilated_u, dv, up, constants, opts)?;
    Ok(ChartBound {
        report: BoundReport {
            lower,
            upper: None,
            lambda0_used: l0.value,
            lambda0: l0.clone(),
            constants: BoundConstants {
                k: constants.k,
                c_prime: constants.c_prime,
                c_m: None,
                m: None,
                t: Some(radius),
                dilation: Some(t),
                epsilon_checks: checks,
                manifest_sha256: constants.hash(),
            },
            basepoint: p.to_vec(),
            direction: v.to_vec(),
            u_at_p: up,
            provenance: Provenance::Chart,
        },
        dilation: t,
        lambda0_chart: chart_l0.value,
        lambda0_dilated: l0.value,
    })
}

// --- localization ------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationReport {
    #[serde(rename = "N")]
    pub n: f64,
    pub s: f64,
    /// `1 - |z(q)|`, the distance of `z(q)` to the unit sphere.
    pub dist: f64,
    /// `V` is the chart ball of this radius around `z(q)`.
    pub radius: f64,
    pub center: Vec<f64>,
    pub c: f64,
    pub u_at_q: f64,
    /// λ₀ of `u - c|z|²`, the certificate for `c`.
    pub deflated_lambda0: f64,
    pub manifest_sha256: String,
}

/// `N = e^{-1}/√k · √(c/|u(q)|)` and `s = 1 - e^{-N dist}`.
pub fn localization_constants(k: f64, c: f64, u_q: f64, dist: f64) -> (f64, f64) {
    let n = (-1.0f64).exp() / k.sqrt() * (c / u_q.abs()).sqrt();
    (n, -(-n * dist).exp_m1())
}

/// Localization at `q` for discs in `D`: certifies that `u - c|z|²` is strictly
/// plurisubharmonic on `D` and reports `N`, `s` and `V = B(z(q), 1 - |z(q)|)`.
#[allow(clippy::too_many_arguments)]
pub fn localization(
    d: &DomainSpec,
    j: &StructureField,
    u: &ScalarField,
    c: f64,
    chart: &dyn Chart,
    q: &[f64],
    constants: &Constants,
    opts: &Lambda0Options,
) -> Result<LocalizationReport> {
    let uq = u.value(q);
    if !(uq < 0.0) {
        return Err(Error::PreconditionFailed(format!("u(q) = {uq:.3e} is not negative")));
    }
    if !(c > 0.0) {
        return Err(Error::NonPositive(c));
    }
    let combined = ScalarField::combination(u.dim(), 0.0, vec![(1.0, u.clone()), (-c, chart.squared_norm_field())]);
    let l0 = lambda0(j, &combined, d, opts);
    if !(l0.value > 0.0) {
        return Err(Error::NotCertified(format!(
            "u - {c}|z|² has λ₀ = {:.4e} at {:?}",
            l0.value, l0.argmin_point
        )));
    }
    let zq = chart.forward(q);
    let dist = 1.0 - norm(&zq);
    if !(dist > 0.0) {
        return Err(Error::PreconditionFailed(format!("z(q) = {zq:?} is outside the unit ball")));
    }
    let (n, s) = localization_constants(constants.k, c, uq, dist);
    Ok(LocalizationReport {
        n,
        s,
        dist,
        radius: dist,
        center: zq,
        c,
        u_at_q: uq,
        deflated_lambda0: l0.value,
        manifest_sha256: constants.hash(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Containment {
    pub checked: usize,
    pub violations: usize,
    /// Largest `|z(h(ζ)) - z(q)| / radius` over the checked nodes.
    pub worst_ratio: f64,
}

/// Checks `z(h(ζ)) ∈ V` for every grid node with `|ζ| <= s`. `to_chart` maps a
/// disc value to chart coordinates (the identity when the disc was solved there).
pub fn containment_check(
    grid: &DiscGrid,
    disc: &crate::disc::DiscSolution,
    report: &LocalizationReport,
    to_chart: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Containment {
    let mut out = Containment {
        checked: 0,
        violations: 0,
        worst_ratio: 0.0,
    };
    for a in 0..grid.len() {
        if grid.nodes[a].norm() > report.s {
            continue;
        }
        let z = to_chart(&disc.real_value(a));
        let r = z.iter().zip(&report.center).map(|(x, c)| (x - c).powi(2)).sum::<f64>().sqrt();
        out.checked += 1;
        let ratio = r / report.radius;
        out.worst_ratio = out.worst_ratio.max(ratio);
        if !(ratio < 1.0) {
            out.violations += 1;
        }
    }
    out
}

// --- upper bounds --------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperBoundOptions {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub trials: usize,
    /// Containment slack for nodes on the boundary of `D`.
    pub slack: f64,
    pub solver: SolverOptions,
}

impl Default for UpperBoundOptions {
    fn default() -> Self {
        UpperBoundOptions {
            alpha_min: 0.02,
            alpha_max: 50.0,
            trials: 50,
            slack: 1e-9,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperBound {
    /// Smallest admissible trial `α`, or `+∞` if none.
    pub value: f64,
    pub trials: Vec<(f64, bool)>,
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Smallest `α` on a geometric grid (refined once) for which the solved disc
/// with `h(0) = p`, `∂h/∂x(0) = v/α` has all nodes inside `inside` (up to `slack`).
pub fn upper_bound(
    q: &dyn Coefficient,
    inside: &(dyn Fn(&[f64], f64) -> bool + Sync),
    p: &[f64],
    v: &[f64],
    grid: &DiscGrid,
    opts: &UpperBoundOptions,
) -> UpperBound {
    let admissible = |alpha: f64| -> bool {
        let w: Vec<f64> = v.iter().map(|x| x / alpha).collect();
        match solve_disc(q, p, &w, grid, &opts.solver) {
            Ok(sol) => (0..grid.len()).all(|a| inside(&sol.real_value(a), opts.slack)),
            Err(_) => false,
        }
    };
    let mut trials = Vec::new();
    let coarse = geometric(opts.alpha_min, opts.alpha_max, opts.trials);
    let ok = par::map_slice(opts.solver.execution, &coarse, |&a| admissible(a));
    trials.extend(coarse.iter().copied().zip(ok.iter().copied()));
    let Some(best) = coarse.iter().zip(&ok).find(|(_, &o)| o).map(|(a, _)| *a) else {
        return UpperBound {
            value: f64::INFINITY,
            trials,
        };
    };
    let mut value = best;
    let idx = coarse.iter().position(|&a| a == best).expect("present");
    if idx > 0 {
        let fine = geometric(coarse[idx - 1], best, opts.trials);
        let ok = par::map_slice(opts.solver.execution, &fine, |&a| admissible(a));
        for (a, o) in fine.iter().zip(&ok) {
            trials.push((*a, *o));
        }
        if let Some((a, _)) = fine.iter().zip(&ok).find(|(_, &o)| o) {
            value = value.min(*a);
        }
    }
    UpperBound { value, trials }
}

/// Membership in a domain spec with an absolute slack.
pub fn domain_membership(d: &DomainSpec) -> impl Fn(&[f64], f64) -> bool + Sync + '_ {
    move |x: &[f64], slack: f64| match &d.shape {
        crate::region::Shape::Ball { radius } => {
            x.iter().zip(&d.center).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() <= radius + slack
        }
        crate::region::Shape::Box { half_widths } => {
            x.iter().zip(&d.center).zip(half_widths).all(|((a, c), w)| (a - c).abs() <= w + slack)
        }
    }
}
