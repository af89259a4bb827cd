use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use acdisc::acs::{deviation_c1, structure_norms, validate_structure};
use acdisc::charts::{build_tamed_chart, Coefficient, StructureCoefficient, TameOptions};
use acdisc::constants::Constants;
use acdisc::disc::solver::fd_residuals;
use acdisc::disc::{reflect_extend, solve_attached_disc, solve_disc, DiscGrid, DiscSolution, SolverOptions};
use acdisc::harness::{theorem_scaling_study, ExperimentConfig};
use acdisc::kobayashi::{domain_membership, lower_bound, lower_bound_basepoint, upper_bound, UpperBoundOptions};
use acdisc::levi::form::levi_quadratic;
use acdisc::levi::{lambda0, levi_matrix, psh_log_builder, Lambda0Options};
use acdisc::scene::{BoundMode, SceneFile};
use acdisc::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::CliError;

/// Everything needed to repeat a run: the subcommand, the resolved scene and
/// the numeric flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Invocation {
    pub command: String,
    pub scene: SceneFile,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub anchor: Option<Vec<f64>>,
    pub dir: Option<Vec<f64>>,
    pub scalar: Option<String>,
}

/// The number a `--check` run recomputes, with its acceptance tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Headline {
    pub key: String,
    pub value: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Headline {
    fn new(key: &str, value: f64) -> Self {
        Headline {
            key: key.into(),
            value,
            abs_tol: 1e-12,
            rel_tol: 1e-9,
        }
    }

    pub fn agrees(&self, other: f64) -> bool {
        if self.value == other {
            return true;
        }
        (self.value - other).abs() <= self.abs_tol + self.rel_tol * self.value.abs().max(other.abs())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub invocation: Invocation,
    pub constants_sha256: String,
    pub headline: Headline,
    /// False when the run completed but its own check failed.
    pub passed: bool,
    pub result: Value,
}

pub struct Outcome {
    pub report: Report,
    /// Extra `key=value` pairs for the summary line.
    pub summary: Vec<(String, String)>,
}

fn need<'a, T>(v: &'a Option<T>, flag: &str, cmd: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Usage(format!("{cmd} requires {flag}")))
}

fn solver_options(inv: &Invocation) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = inv.tol {
        o.tol = t;
    }
    o
}

fn grid_of(inv: &Invocation) -> Result<DiscGrid, CliError> {
    let n = inv.grid.unwrap_or(64);
    if n < 4 {
        return Err(CliError::Usage(format!("--grid {n} is too coarse (minimum 4)")));
    }
    Ok(DiscGrid::new(n))
}

/// Chart coordinates when the scene declares a chart, the raw structure otherwise.
fn coefficient(scene: &SceneFile) -> Result<Box<dyn Coefficient>, CliError> {
    let j = scene.structure()?;
    match &scene.chart {
        Some(c) => {
            let opts = TameOptions {
                resolution: c.resolution,
                ..TameOptions::default()
            };
            Ok(Box::new(build_tamed_chart(&j, &c.anchor, c.epsilon, &opts)?))
        }
        None => Ok(Box::new(StructureCoefficient(j))),
    }
}

fn write_disc(out: &Path, grid: &DiscGrid, sol: &DiscSolution, residuals: &[f64]) -> Result<(), CliError> {
    let file = BufWriter::new(File::create(out.join("disc.csv"))?);
    sol.write_csv(grid, residuals, file)?;
    Ok(())
}

fn disc_summary(sol: &DiscSolution) -> Value {
    json!({
        "residual": sol.residual,
        "fd_residual": sol.fd_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "contraction_ratio": sol.contraction_ratio,
        "attached": sol.attached,
        "center": sol.center,
        "direction": sol.direction,
    })
}

pub fn execute(inv: &Invocation, constants: &Constants, out: &Path) -> Result<Outcome, CliError> {
    let scene = &inv.scene;
    let mut summary = Vec::new();
    let mut passed = true;
    let (headline, result) = match inv.command.as_str() {
        "validate" => {
            let d = scene.domain()?;
            let j = scene.structure()?;
            let tol = inv.tol.unwrap_or(1e-10);
            let v = validate_structure(&j, &d, tol);
            let norms = structure_norms(&j, &d);
            let (dev, worst) = deviation_c1(&j, &d);
            passed = v.passed;
            (
                Headline::new("max_residual", v.max_residual),
                json!({"validation": v, "norms": norms, "deviation_c1": dev, "deviation_worst_point": worst}),
            )
        }
        "levi" => {
            let p = need(&inv.anchor, "--anchor", "levi")?;
            let j = scene.structure()?;
            let u = scene.scalar(inv.scalar.as_deref())?;
            if p.len() != j.dim() {
                return Err(Error::Dimension(format!("--anchor needs {} coordinates", j.dim())).into());
            }
            let eval = levi_matrix(&j, &u, p);
            let quad = inv.dir.as_ref().map(|x| levi_quadratic(&j, &u, p, x));
            (Headline::new("min_eig", eval.min_eig), json!({"levi": eval, "quadratic": quad}))
        }
        "lambda0" => {
            let j = scene.structure()?;
            let u = scene.scalar(inv.scalar.as_deref())?;
            let d = scene.domain()?;
            let r = lambda0(&j, &u, &d, &Lambda0Options::default());
            (Headline::new("lambda0", r.value), serde_json::to_value(&r)?)
        }
        "psh-build" => {
            let j = scene.structure()?;
            let d = scene.domain()?;
            let params = scene.psh_params(constants)?;
            let (_, cert) = psh_log_builder(&params, &j, &d, &Lambda0Options::default())?;
            (
                Headline::new("lambda0", cert.lambda0.value),
                json!({"certificate": cert, "a": params.a, "b": params.b, "r": params.r, "pole": params.p}),
            )
        }
        "chart" => {
            let spec = scene
                .chart
                .as_ref()
                .ok_or_else(|| CliError::Lib(Error::Scene("scene has no chart section".into())))?;
            let j = scene.structure()?;
            let anchor = inv.anchor.clone().unwrap_or_else(|| spec.anchor.clone());
            let opts = TameOptions {
                resolution: spec.resolution,
                ..TameOptions::default()
            };
            let chart = build_tamed_chart(&j, &anchor, spec.epsilon, &opts)?;
            let export = chart.export();
            summary.push(("dilation".into(), format!("{}", export.dilation)));
            (Headline::new("taming_constant", export.taming_constant), serde_json::to_value(&export)?)
        }
        "solve-disc" | "attach" => {
            let p = need(&inv.anchor, "--anchor", &inv.command)?;
            let v = need(&inv.dir, "--dir", &inv.command)?;
            let q = coefficient(scene)?;
            let grid = grid_of(inv)?;
            let opts = solver_options(inv);
            if inv.command == "solve-disc" {
                let sol = solve_disc(q.as_ref(), p, v, &grid, &opts)?;
                let res = fd_residuals(q.as_ref(), &grid, &sol.components, false, opts.execution)?;
                write_disc(out, &grid, &sol, &res)?;
                summary.push(("iterations".into(), sol.iterations.to_string()));
                (Headline::new("residual", sol.residual), json!({"disc": disc_summary(&sol), "grid": grid.resolution}))
            } else {
                let sol = solve_attached_disc(q.as_ref(), p, v, &grid, &opts)?;
                let refl = reflect_extend(q.as_ref(), &sol, &grid, 1e-9, &opts)?;
                write_disc(out, &grid, &refl.solution, &refl.residuals)?;
                passed = refl.band_ok;
                summary.push(("band".into(), format!("{:.3e}", refl.band_residual)));
                summary.push(("interior".into(), format!("{:.3e}", refl.interior_residual)));
                (
                    Headline::new("residual", sol.residual),
                    json!({
                        "disc": disc_summary(&sol),
                        "grid": grid.resolution,
                        "band_residual": refl.band_residual,
                        "interior_residual": refl.interior_residual,
                        "band_width": refl.band_width,
                        "band_ok": refl.band_ok,
                    }),
                )
            }
        }
        "kobayashi" => {
            let p = need(&inv.anchor, "--anchor", "kobayashi")?;
            let v = need(&inv.dir, "--dir", "kobayashi")?;
            let j = scene.structure()?;
            let d = scene.domain()?;
            let spec = scene.kobayashi.clone();
            let name = inv.scalar.clone().or_else(|| spec.as_ref().map(|s| s.scalar.clone()));
            let u = scene.scalar(name.as_deref())?;
            let mode = spec.as_ref().map(|s| s.mode).unwrap_or_default();
            let opts = Lambda0Options::default();
            let mut report = match mode {
                BoundMode::Basepoint => lower_bound_basepoint(&d, &j, &u, p, v, constants, &opts)?,
                BoundMode::Frame => lower_bound(&d, &j, &u, p, v, constants, &opts)?,
            };
            if spec.as_ref().is_some_and(|s| s.upper) {
                let q = StructureCoefficient(j.clone());
                let grid = grid_of(inv)?;
                let uopts = UpperBoundOptions {
                    solver: solver_options(inv),
                    ..UpperBoundOptions::default()
                };
                let inside = domain_membership(&d);
                let ub = upper_bound(&q, &inside, p, v, &grid, &uopts);
                report.upper = Some(ub.value);
                summary.push(("upper".into(), format!("{:.6}", ub.value)));
            }
            (Headline::new("lower", report.lower), serde_json::to_value(&report)?)
        }
        "study" => {
            let mut config = match &scene.experiment {
                Some(c) => c.clone(),
                None if scene.n() == 1 => ExperimentConfig::default(),
                None => {
                    return Err(Error::Scene("the built-in study is for n = 1; add an experiment section".into()).into())
                }
            };
            if let Some(s) = inv.seed {
                config.seed = s;
            }
            if let Some(g) = inv.grid {
                config.grid = g;
            }
            if let Some(t) = inv.tol {
                config.tol = t;
            }
            let report = theorem_scaling_study(&config, constants)?;
            report.write(out)?;
            passed = report.all_passed();
            summary.push(("records".into(), report.records.len().to_string()));
            summary.push(("failures".into(), report.failures.len().to_string()));
            let half = report.fitted.get("half").copied().unwrap_or(f64::NAN);
            let fitted: BTreeMap<_, _> = report.fitted.clone();
            (
                Headline::new("fitted_half", half),
                json!({"fitted": fitted, "monotone": report.monotone, "failures": report.failures, "all_passed": passed}),
            )
        }
        "constants" => {
            let m = constants.manifest();
            (Headline::new("c_tilde_effective", constants.c_tilde_effective), serde_json::to_value(&m)?)
        }
        other => return Err(CliError::Usage(format!("unknown command {other:?}"))),
    };
    Ok(Outcome {
        report: Report {
            invocation: inv.clone(),
            constants_sha256: constants.hash(),
            headline,
            passed,
            result,
        },
        summary,
    })
}
