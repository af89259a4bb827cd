//! Amplitude sweep: attached discs for a family `J_s` with `H = s · H₀`,
//! their norms on `K` against `λ_E`, and every inequality record.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bounds::{bootstrap_norms, differential_bound_check, half_holder_check};
use super::{InequalityRecord, DEFAULT_SLACK};
use crate::acs::{structure_from_h, HField, H_CAP};
use crate::charts::{build_tamed_chart, TameOptions};
use crate::constants::Constants;
use crate::disc::holder::DiscRegion;
use crate::disc::solver::BAND_FLOOR;
use crate::disc::{reflect_extend, solve_attached_disc, DiscGrid, SolverOptions};
use crate::error::Result;
use crate::levi::form::Lambda0Options;
use crate::levi::psh::minimal_curvature;
use crate::par::{self, Execution};
use crate::poly::{ComplexPolyMatrix, Polynomial};
use crate::region::DomainSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscSpec {
    /// Anchor on `{y* = 0}` in chart coordinates.
    pub anchor: Vec<f64>,
    /// `∂h/∂x(0)`, tangent to `{y* = 0}`.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    /// `H₀`; the structure at amplitude `s` is built from `s · H₀`.
    pub template: ComplexPolyMatrix,
    pub amplitudes: Vec<f64>,
    /// C¹ tolerance for the tamed chart at the origin.
    pub chart_epsilon: f64,
    pub discs: Vec<DiscSpec>,
    pub grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// `K` for the `C^{1/2}` and `C^{1+α}` norms.
    pub k_region: DiscRegion,
    pub alpha: f64,
    /// Diameter point `a` for the boundary checks.
    pub diameter_point: f64,
    /// Radius of the neighbourhood of `a` used by the boundary checks.
    pub neighbourhood: f64,
    pub seed: u64,
    pub execution: Execution,
}

/// `H₀ = x_1 y_1 + 0.5 y_1 + i(x_1² + y_1²)` placed on the diagonal.
pub fn default_template(n: usize) -> ComplexPolyMatrix {
    let mut h = ComplexPolyMatrix::zeros(n);
    for c in 0..n {
        let mono = |xe: u32, ye: u32, coef: f64| {
            let mut exp = vec![0; 2 * n];
            exp[c] = xe;
            exp[n + c] = ye;
            Polynomial::monomial(exp, coef)
        };
        h.re.set(c, c, mono(1, 1, 1.0).add(&mono(0, 1, 0.5)));
        h.im.set(c, c, mono(2, 0, 1.0).add(&mono(0, 2, 1.0)));
    }
    h
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let disc = |x: f64, d: f64| DiscSpec {
            anchor: vec![x, 0.0],
            direction: vec![d, 0.0],
        };
        ExperimentConfig {
            n: 1,
            template: default_template(1),
            amplitudes: vec![0.0, 0.01, 0.02, 0.04],
            chart_epsilon: 0.25,
            discs: vec![disc(-0.2, 0.3), disc(0.0, 0.35), disc(0.2, 0.3)],
            grid: 64,
            tol: 1e-7,
            max_iter: 200,
            k_region: DiscRegion::UpperHalf { radius: 0.5 },
            alpha: 0.5,
            diameter_point: 0.0,
            neighbourhood: 0.25,
            seed: 7,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyRow {
    pub amplitude: f64,
    pub lambda_e: f64,
    pub dilation: f64,
    pub disc: usize,
    pub iterations: usize,
    pub residual: f64,
    pub sup_norm: f64,
    pub half_norm: f64,
    pub high_norm: f64,
    pub coefficient_norm: f64,
    pub half_seminorm: f64,
    pub band_residual: f64,
    pub interior_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggedRecord {
    pub amplitude: f64,
    pub disc: usize,
    pub record: InequalityRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: ExperimentConfig,
    pub constants_sha256: String,
    pub rows: Vec<StudyRow>,
    pub records: Vec<TaggedRecord>,
    /// `c(K)` per norm: max of `norm / (|h|_∞ (1 + 1/√λ_E))`.
    pub fitted: BTreeMap<String, f64>,
    /// Norms do not drop by more than 10% as `λ_E` decreases along the sweep.
    pub monotone: BTreeMap<String, bool>,
    pub failures: Vec<String>,
}

/// Record for the worst node of a batch: largest `lhs/rhs`, passed iff all passed.
fn worst_of(records: Vec<InequalityRecord>) -> Option<InequalityRecord> {
    let all = records.iter().all(|r| r.passed);
    let count = records.len();
    let mut worst = records
        .into_iter()
        .max_by(|a, b| (a.lhs / a.rhs).total_cmp(&(b.lhs / b.rhs)))?;
    worst.passed = all;
    worst.constants.insert("nodes_checked".into(), count as f64);
    Some(worst)
}

struct DiscOutcome {
    row: StudyRow,
    records: Vec<InequalityRecord>,
}

#[allow(clippy::too_many_arguments)]
fn run_disc(
    config: &ExperimentConfig,
    constants: &Constants,
    grid: &DiscGrid,
    chart: &crate::charts::TamedChart,
    amplitude: f64,
    lambda_e: f64,
    index: usize,
    spec: &DiscSpec,
) -> Result<DiscOutcome> {
    let opts = SolverOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        execution: config.execution,
        ..SolverOptions::default()
    };
    let exec = config.execution;
    let context = format!("amplitude={amplitude} disc={index}");
    let sol = solve_attached_disc(chart, &spec.anchor, &spec.direction, grid, &opts)?;
    let refl = reflect_extend(chart, &sol, grid, config.tol, &opts)?;
    let mut records = Vec::new();
    records.push(
        InequalityRecord::new(
            "reflection_band",
            refl.band_residual,
            10.0 * refl.interior_residual + BAND_FLOOR,
            0.0,
            context.clone(),
        )
        .with_constant("interior_residual", refl.interior_residual),
    );
    let diff = differential_bound_check(
        grid,
        &sol,
        lambda_e,
        config.diameter_point,
        config.neighbourhood,
        config.tol,
        constants,
        &context,
    )?;
    for name in ["differential_bound", "differential_bound_alt"] {
        if let Some(r) = worst_of(diff.iter().filter(|r| r.name == name).cloned().collect()) {
            records.push(r);
        }
    }
    let hh = half_holder_check(
        grid,
        &sol,
        config.diameter_point,
        config.neighbourhood,
        lambda_e,
        config.tol,
        constants,
        config.seed,
        exec,
        &context,
    )?;
    records.push(hh.record.clone());
    let (high, half, qn) = bootstrap_norms(grid, &sol, chart, &config.k_region, config.alpha, config.tol, config.seed, exec)?;
    Ok(DiscOutcome {
        row: StudyRow {
            amplitude,
            lambda_e,
            dilation: chart.t,
            disc: index,
            iterations: sol.iterations,
            residual: sol.residual,
            sup_norm: hh.sup_norm,
            half_norm: half,
            high_norm: high,
            coefficient_norm: qn,
            half_seminorm: hh.seminorm,
            band_residual: refl.band_residual,
            interior_residual: refl.interior_residual,
        },
        records,
    })
}

/// Runs the sweep. Per-disc failures are collected and the study continues.
pub fn theorem_scaling_study(config: &ExperimentConfig, constants: &Constants) -> Result<StudyReport> {
    let grid = DiscGrid::new(config.grid);
    let n = config.n;
    let domain = DomainSpec::ball_with_resolution(vec![0.0; 2 * n], 1.0, if n == 1 { 21 } else { 7 })?;
    let lopts = Lambda0Options {
        execution: config.execution,
        ..Lambda0Options::default()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for &amp in &config.amplitudes {
        if config.discs.is_empty() {
            continue;
        }
        let built = (|| -> Result<_> {
            let j = structure_from_h(HField::Poly(config.template.scale(amp)), &domain, H_CAP)?;
            let chart = build_tamed_chart(&j, &vec![0.0; 2 * n], config.chart_epsilon, &TameOptions::default())?;
            let lambda_e = minimal_curvature(&[crate::charts::Chart::structure(&chart)], &lopts)?.value;
            Ok((chart, lambda_e))
        })();
        let (chart, lambda_e) = match built {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("amplitude={amp}: {e}"));
                continue;
            }
        };
        let outcomes = par::map_indexed(config.execution, config.discs.len(), |i| {
            run_disc(config, constants, &grid, &chart, amp, lambda_e, i, &config.discs[i])
        });
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok(o) => {
                    records.extend(o.records.into_iter().map(|record| TaggedRecord {
                        amplitude: amp,
                        disc: i,
                        record,
                    }));
                    rows.push(o.row);
                }
                Err(e) => failures.push(format!("amplitude={amp} disc={i}: {e}")),
            }
        }
    }
    let mut fitted = BTreeMap::new();
    let mut monotone = BTreeMap::new();
    let norms: [(&str, fn(&StudyRow) -> f64); 2] = [("half", |r| r.half_norm), ("one_plus_alpha", |r| r.high_norm)];
    for (name, get) in norms {
        let scale = |r: &StudyRow| r.sup_norm * (1.0 + 1.0 / r.lambda_e.sqrt());
        let fit = rows.iter().map(|r| get(r) / scale(r)).fold(0.0, f64::max);
        fitted.insert(name.to_string(), fit);
        for r in &rows {
            records.push(TaggedRecord {
                amplitude: r.amplitude,
                disc: r.disc,
                record: InequalityRecord::new(
                    &format!("scaling_{name}"),
                    get(r),
                    fit * scale(r),
                    DEFAULT_SLACK,
                    format!("amplitude={} disc={}", r.amplitude, r.disc),
                )
                .with_constant("c_fit", fit)
                .with_constant("lambda_e", r.lambda_e),
            });
        }
        let mut ok = true;
        for d in 0..config.discs.len() {
            let mut series: Vec<&StudyRow> = rows.iter().filter(|r| r.disc == d).collect();
            series.sort_by(|a, b| b.lambda_e.total_cmp(&a.lambda_e));
            for w in series.windows(2) {
                if w[1].lambda_e < w[0].lambda_e && get(w[1]) < 0.9 * get(w[0]) {
                    ok = false;
                }
            }
        }
        monotone.insert(name.to_string(), ok);
    }
    Ok(StudyReport {
        config: config.clone(),
        constants_sha256: constants.hash(),
        rows,
        records,
        fitted,
        monotone,
        failures,
    })
}

impl StudyReport {
    /// One line per disc × inequality.
    pub fn csv(&self) -> String {
        let mut s = String::from("amplitude,disc,inequality,lhs,rhs,margin,passed,context\n");
        for t in &self.records {
            let r = &t.record;
            let _ = writeln!(
                s,
                "{},{},{},{:.12e},{:.12e},{:.12e},{},\"{}\"",
                t.amplitude, t.disc, r.name, r.lhs, r.rhs, r.margin, r.passed, r.context
            );
        }
        s
    }

    /// Plot-ready table, one line per disc.
    pub fn dat(&self) -> String {
        let mut s = String::from("# amplitude lambda_e disc sup_norm half_norm high_norm half_seminorm band interior\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} {:.12e} {} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e}",
                r.amplitude, r.lambda_e, r.disc, r.sup_norm, r.half_norm, r.high_norm, r.half_seminorm, r.band_residual, r.interior_residual
            );
        }
        s
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|t| t.record.passed)
    }

    /// Writes `study.csv`, `study.json` and `study.dat` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("study.csv"), self.csv())?;
        std::fs::write(dir.join("study.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("study.dat"), self.dat())?;
        Ok(())
    }
}
