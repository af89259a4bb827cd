//! The Levi form `L^J u(X) = d(d^c_J u)(X, JX)` as a symmetric matrix, its
//! perturbative lower bound, and the λ₀ scan.

use serde::{Deserialize, Serialize};

use super::scalar::{Jet, ScalarField};
use crate::acs::{norm1_of, StructureField};
use crate::linalg::{eig_extremes, j_st, op_norm, sym_eigen, Mat, Vector};
use crate::par::{self, Execution};
use crate::region::Region;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeviEvaluation {
    pub point: Vec<f64>,
    pub matrix: Mat,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Symmetric `M` with `XᵀMX = XᵀDX + (JX)ᵀD(JX) + Xᵀ(A - Aᵀ)JX`, where `D` is
/// the Hessian of `u` and `A_{jk} = Σ_i ∂_i u ∂_k J_{ij}`.
pub fn levi_matrix_from(j: &Mat, dj: &[Mat], jet: &Jet) -> Mat {
    let dim = j.nrows();
    let d = &jet.hess;
    let mut a = Mat::zeros(dim, dim);
    for (k, djk) in dj.iter().enumerate() {
        for jj in 0..dim {
            let mut s = 0.0;
            for i in 0..dim {
                s += jet.grad[i] * djk[(i, jj)];
            }
            a[(jj, k)] = s;
        }
    }
    let raw = d + j.transpose() * d * j + (&a - a.transpose()) * j;
    (&raw + raw.transpose()) * 0.5
}

pub fn levi_matrix(j: &StructureField, u: &ScalarField, p: &[f64]) -> LeviEvaluation {
    let (jv, dj) = j.jet(p);
    let m = levi_matrix_from(&jv, &dj, &u.jet(p));
    let (lo, hi) = eig_extremes(&m);
    LeviEvaluation {
        point: p.to_vec(),
        matrix: m,
        min_eig: lo,
        max_eig: hi,
    }
}

/// The Levi quadratic form evaluated term by term (no symmetrization).
pub fn levi_quadratic(j: &StructureField, u: &ScalarField, p: &[f64], x: &[f64]) -> f64 {
    let (jv, dj) = j.jet(p);
    let jet = u.jet(p);
    let xv = Vector::from_column_slice(x);
    let jx = &jv * &xv;
    let dim = jv.nrows();
    let mut a = Mat::zeros(dim, dim);
    for (k, djk) in dj.iter().enumerate() {
        for jj in 0..dim {
            a[(jj, k)] = (0..dim).map(|i| jet.grad[i] * djk[(i, jj)]).sum();
        }
    }
    xv.dot(&(&jet.hess * &xv)) + jx.dot(&(&jet.hess * &jx)) + xv.dot(&((&a - a.transpose()) * &jx))
}

/// Lower bound for the smallest Levi eigenvalue at `p` from the decomposition
/// `J = J_st + H`:
/// `λ_min(L^{J_st}) - 2ρ|H|₀ + min(μ, 0)|H|₀² - 2|∇u|(1 + |H|₀)|H|₁`,
/// with `ρ` the spectral radius and `μ` the smallest eigenvalue of the Hessian.
pub fn levi_perturbation_bound(j: &StructureField, u: &ScalarField, p: &[f64]) -> f64 {
    let n = j.n();
    let (jv, dj) = j.jet(p);
    let jet = u.jet(p);
    let js = j_st(n);
    let zero: Vec<Mat> = vec![Mat::zeros(2 * n, 2 * n); 2 * n];
    let standard = levi_matrix_from(&js, &zero, &jet);
    let (std_min, _) = eig_extremes(&standard);
    let h = jv - &js;
    let h0 = op_norm(&h);
    let h1 = norm1_of(&h, &dj);
    let (vals, _) = sym_eigen(&jet.hess);
    let mu = vals[0];
    let rho = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    std_min - 2.0 * rho * h0 + mu.min(0.0) * h0 * h0 - 2.0 * jet.grad.norm() * (1.0 + h0) * h1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lambda0Options {
    /// Number of grid minima used as descent starts.
    pub k_best: usize,
    /// Descent stops once the compass step falls below this.
    pub step_tol: f64,
    pub refine: bool,
    pub execution: Execution,
}

impl Default for Lambda0Options {
    fn default() -> Self {
        Lambda0Options {
            k_best: 8,
            step_tol: 1e-7,
            refine: true,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lambda0Result {
    pub value: f64,
    pub argmin_point: Vec<f64>,
    pub argmin_direction: Vec<f64>,
    pub grid_min: f64,
    pub refined: bool,
    pub samples: usize,
}

fn min_eig_at(j: &StructureField, u: &ScalarField, p: &[f64]) -> f64 {
    let v = levi_matrix(j, u, p).min_eig;
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Compass search from `start`, staying inside `region`.
fn descend(j: &StructureField, u: &ScalarField, region: &dyn Region, start: &[f64], f0: f64, opts: &Lambda0Options) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut x = start.to_vec();
    let mut fx = f0;
    let mut step = 0.5 * region.spacing();
    let mut guard = 0;
    while step >= opts.step_tol && guard < 10_000 {
        guard += 1;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for axis in 0..dim {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[axis] += sign * step;
                if !region.contains(&y) {
                    continue;
                }
                let fy = min_eig_at(j, u, &y);
                if fy < fx && best.as_ref().is_none_or(|b| fy < b.1) {
                    best = Some((y, fy));
                }
            }
        }
        match best {
            Some((y, fy)) => {
                x = y;
                fx = fy;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}

/// λ₀(D, J, u): the minimum over the region of the smallest Levi eigenvalue.
///
/// Every sample is evaluated exactly (the direction minimum is an eigenproblem);
/// the `k_best` lowest samples then seed a compass descent.
pub fn lambda0(j: &StructureField, u: &ScalarField, region: &dyn Region, opts: &Lambda0Options) -> Lambda0Result {
    let samples = region.samples();
    let values = par::map_slice(opts.execution, &samples, |p| min_eig_at(j, u, p));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    if order.is_empty() {
        return Lambda0Result {
            value: f64::INFINITY,
            argmin_point: Vec::new(),
            argmin_direction: Vec::new(),
            grid_min: f64::INFINITY,
            refined: false,
            samples: 0,
        };
    }
    let grid_min = values[order[0]];
    let mut best_point = samples[order[0]].clone();
    let mut best = grid_min;
    let mut refined = false;
    if opts.refine && grid_min.is_finite() {
        let starts: Vec<usize> = order.iter().take(opts.k_best.max(1)).copied().collect();
        let results = par::map_slice(opts.execution, &starts, |&i| descend(j, u, region, &samples[i], values[i], opts));
        for (x, fx) in results {
            if fx < best {
                best = fx;
                best_point = x;
                refined = true;
            }
        }
    }
    let ev = levi_matrix(j, u, &best_point);
    let (_, vecs) = sym_eigen(&ev.matrix);
    let dir: Vec<f64> = vecs.column(0).iter().copied().collect();
    Lambda0Result {
        value: best,
        argmin_point: best_point,
        argmin_direction: dir,
        grid_min,
        refined,
        samples: samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::DomainSpec;

    #[test]
    fn standard_squared_norm_is_four() {
        let j = StructureField::standard(2);
        let u = ScalarField::squared_norm(vec![0.1, 0.2, 0.0, -0.3]);
        let e = levi_matrix(&j, &u, &[0.5, 0.1, 0.2, 0.3]);
        assert!((e.matrix - Mat::identity(4, 4) * 4.0).norm() < 1e-14);
    }

    #[test]
    fn sum_y_squared_is_two() {
        let j = StructureField::standard(2);
        let u = ScalarField::sum_y_squared(2);
        let e = levi_matrix(&j, &u, &[0.5, 0.1, 0.2, 0.3]);
        assert!((e.matrix - Mat::identity(4, 4) * 2.0).norm() < 1e-14);
    }

    #[test]
    fn lambda0_of_constant_form() {
        let d = DomainSpec::unit_ball(1);
        let r = lambda0(&StructureField::standard(1), &ScalarField::squared_norm(vec![0.0; 2]), &d, &Lambda0Options::default());
        assert!((r.value - 4.0).abs() < 1e-12);
        assert!(r.value <= r.grid_min);
        let norm: f64 = r.argmin_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
