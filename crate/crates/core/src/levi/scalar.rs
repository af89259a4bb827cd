//! Real functions with gradient and Hessian access.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cutoff::Cutoff;
use crate::linalg::{Mat, Vector};
use crate::poly::Polynomial;

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub grad: Vector,
    pub hess: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `|x - c|`
    Norm,
    /// `ln |x - c|`
    LogNorm,
    /// `|x - c|²`
    SquaredNorm,
}

/// `ln θ(|x-p|²/r²) + A|x-p| + B|x-p|²/r²`.
#[derive(Clone)]
pub struct Barrier {
    pub p: Vec<f64>,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub theta: Arc<dyn Cutoff>,
}

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Poly {
        p: Polynomial,
        grad: Vec<Polynomial>,
        hess: Vec<Vec<Polynomial>>,
    },
    Radial {
        center: Vec<f64>,
        profile: Profile,
    },
    Barrier(Barrier),
    Combination {
        constant: f64,
        terms: Vec<(f64, ScalarField)>,
    },
    SumOfSquares(Vec<ScalarField>),
    /// `x -> u(P x + offset)`
    Affine {
        p: Mat,
        offset: Vec<f64>,
        inner: Arc<ScalarField>,
    },
    Callable {
        f: ScalarFn,
        step: f64,
    },
}

/// A real C² function on a domain of R^{dim}.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    repr: Repr,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Poly { .. } => "poly",
            Repr::Radial { .. } => "radial",
            Repr::Barrier(_) => "barrier",
            Repr::Combination { .. } => "combination",
            Repr::SumOfSquares(_) => "sum_of_squares",
            Repr::Affine { .. } => "affine",
            Repr::Callable { .. } => "callable",
        };
        write!(f, "ScalarField {{ dim: {}, repr: {kind} }}", self.dim)
    }
}

impl ScalarField {
    pub fn polynomial(dim: usize, p: Polynomial) -> Self {
        let grad: Vec<Polynomial> = (0..dim).map(|i| p.derivative(i)).collect();
        let hess = grad
            .iter()
            .map(|g| (0..dim).map(|j| g.derivative(j)).collect())
            .collect();
        ScalarField {
            dim,
            repr: Repr::Poly { p, grad, hess },
        }
    }

    pub fn radial(center: Vec<f64>, profile: Profile) -> Self {
        ScalarField {
            dim: center.len(),
            repr: Repr::Radial { center, profile },
        }
    }

    pub fn squared_norm(center: Vec<f64>) -> Self {
        Self::radial(center, Profile::SquaredNorm)
    }

    /// `y_1² + ... + y_n²` on R^{2n}.
    pub fn sum_y_squared(n: usize) -> Self {
        let dim = 2 * n;
        let p = (0..n).fold(Polynomial::zero(), |acc, i| {
            let mut e = vec![0; dim];
            e[n + i] = 2;
            acc.add(&Polynomial::monomial(e, 1.0))
        });
        Self::polynomial(dim, p)
    }

    pub fn barrier(b: Barrier) -> Self {
        ScalarField {
            dim: b.p.len(),
            repr: Repr::Barrier(b),
        }
    }

    pub fn combination(dim: usize, constant: f64, terms: Vec<(f64, ScalarField)>) -> Self {
        ScalarField {
            dim,
            repr: Repr::Combination { constant, terms },
        }
    }

    pub fn sum_of_squares(parts: Vec<ScalarField>) -> Self {
        let dim = parts.first().map_or(0, |p| p.dim);
        ScalarField {
            dim,
            repr: Repr::SumOfSquares(parts),
        }
    }

    /// `x -> self(P x + offset)`.
    pub fn compose_affine(&self, p: Mat, offset: Vec<f64>) -> Self {
        ScalarField {
            dim: p.ncols(),
            repr: Repr::Affine {
                p,
                offset,
                inner: Arc::new(self.clone()),
            },
        }
    }

    /// Opaque function; gradient and Hessian by central differences.
    pub fn callable(dim: usize, f: ScalarFn, step: f64) -> Self {
        ScalarField {
            dim,
            repr: Repr::Callable { f, step },
        }
    }

    /// `self - c |x - p|²`.
    pub fn minus_squared(&self, c: f64, p: Vec<f64>) -> Self {
        Self::combination(self.dim, 0.0, vec![(1.0, self.clone()), (-c, Self::squared_norm(p))])
    }

    /// `self + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self::combination(self.dim, c, vec![(1.0, self.clone())])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.repr {
            Repr::Poly { p, .. } => p.eval(x),
            Repr::Radial { center, profile } => {
                let d2 = dist2(x, center);
                match profile {
                    Profile::Norm => d2.sqrt(),
                    Profile::LogNorm => 0.5 * d2.ln(),
                    Profile::SquaredNorm => d2,
                }
            }
            Repr::Barrier(b) => {
                let d2 = dist2(x, &b.p);
                let t = d2 / (b.r * b.r);
                b.theta.eval(t).0.ln() + b.a * d2.sqrt() + b.b * t
            }
            Repr::Combination { constant, terms } => {
                constant + terms.iter().map(|(w, u)| w * u.value(x)).sum::<f64>()
            }
            Repr::SumOfSquares(parts) => parts.iter().map(|u| u.value(x).powi(2)).sum(),
            Repr::Affine { p, offset, inner } => inner.value(&affine(p, offset, x)),
            Repr::Callable { f, .. } => f(x),
        }
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        let dim = self.dim;
        match &self.repr {
            Repr::Poly { p, grad, hess } => Jet {
                value: p.eval(x),
                grad: Vector::from_fn(dim, |i, _| grad[i].eval(x)),
                hess: Mat::from_fn(dim, dim, |i, j| hess[i][j].eval(x)),
            },
            Repr::Radial { center, profile } => radial_jet(x, center, *profile),
            Repr::Barrier(b) => barrier_jet(b, x),
            Repr::Combination { constant, terms } => {
                let mut out = Jet {
                    value: *constant,
                    grad: Vector::zeros(dim),
                    hess: Mat::zeros(dim, dim),
                };
                for (w, u) in terms {
                    let j = u.jet(x);
                    out.value += w * j.value;
                    out.grad += j.grad * *w;
                    out.hess += j.hess * *w;
                }
                out
            }
            Repr::SumOfSquares(parts) => {
                let mut out = Jet {
                    value: 0.0,
                    grad: Vector::zeros(dim),
                    hess: Mat::zeros(dim, dim),
                };
                for u in parts {
                    let j = u.jet(x);
                    out.value += j.value * j.value;
                    out.grad += &j.grad * (2.0 * j.value);
                    out.hess += (&j.grad * j.grad.transpose()) * 2.0 + &j.hess * (2.0 * j.value);
                }
                out
            }
            Repr::Affine { p, offset, inner } => {
                let j = inner.jet(&affine(p, offset, x));
                Jet {
                    value: j.value,
                    grad: p.transpose() * j.grad,
                    hess: p.transpose() * j.hess * p,
                }
            }
            Repr::Callable { f, step } => callable_jet(f.as_ref(), x, *step),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vector {
        self.jet(x).grad
    }

    pub fn hessian(&self, x: &[f64]) -> Mat {
        self.jet(x).hess
    }
}

fn dist2(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum()
}

fn affine(p: &Mat, offset: &[f64], x: &[f64]) -> Vec<f64> {
    (0..p.nrows())
        .map(|i| offset[i] + (0..p.ncols()).map(|j| p[(i, j)] * x[j]).sum::<f64>())
        .collect()
}

fn radial_jet(x: &[f64], center: &[f64], profile: Profile) -> Jet {
    let dim = x.len();
    let d = Vector::from_fn(dim, |i, _| x[i] - center[i]);
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let id = Mat::identity(dim, dim);
    let ddt = &d * d.transpose();
    match profile {
        Profile::SquaredNorm => Jet {
            value: r2,
            grad: &d * 2.0,
            hess: id * 2.0,
        },
        Profile::Norm => Jet {
            value: r,
            grad: &d / r,
            hess: (id - ddt / r2) / r,
        },
        Profile::LogNorm => Jet {
            value: r.ln(),
            grad: &d / r2,
            hess: (id - ddt * (2.0 / r2)) / r2,
        },
    }
}

/// Jet of the barrier. At `x = p` the conic term `A|x-p|` has no derivative
/// and is left out of gradient and Hessian.
fn barrier_jet(b: &Barrier, x: &[f64]) -> Jet {
    let dim = x.len();
    let d = Vector::from_fn(dim, |i, _| x[i] - b.p[i]);
    let r2 = d.norm_squared();
    let rho = r2.sqrt();
    let rr = b.r * b.r;
    let t = r2 / rr;
    let (th, th1, th2) = b.theta.eval(t);
    let id = Mat::identity(dim, dim);
    let ddt = &d * d.transpose();
    let ratio1 = th1 / th;
    let ratio2 = (th2 * th - th1 * th1) / (th * th);
    let mut grad = &d * (ratio1 * 2.0 / rr + 2.0 * b.b / rr);
    let mut hess = &id * (ratio1 * 2.0 / rr + 2.0 * b.b / rr) + &ddt * (ratio2 * 4.0 / (rr * rr));
    if rho > 0.0 {
        grad += &d * (b.a / rho);
        hess += (&id / rho - &ddt / (rho * r2)) * b.a;
    }
    Jet {
        value: th.ln() + b.a * rho + b.b * t,
        grad,
        hess,
    }
}

fn callable_jet(f: &(dyn Fn(&[f64]) -> f64 + Send + Sync), x: &[f64], step: f64) -> Jet {
    let dim = x.len();
    let v0 = f(x);
    let shifted = |i: usize, si: f64, j: usize, sj: f64| {
        let mut y = x.to_vec();
        y[i] += si;
        y[j] += sj;
        f(&y)
    };
    let h = step;
    let hh = step.max(1e-4);
    let grad = Vector::from_fn(dim, |i, _| (shifted(i, h, i, 0.0) - shifted(i, -h, i, 0.0)) / (2.0 * h));
    let mut hess = Mat::zeros(dim, dim);
    for i in 0..dim {
        hess[(i, i)] = (shifted(i, hh, i, 0.0) - 2.0 * v0 + shifted(i, -hh, i, 0.0)) / (hh * hh);
        for j in (i + 1)..dim {
            let v = (shifted(i, hh, j, hh) - shifted(i, hh, j, -hh) - shifted(i, -hh, j, hh)
                + shifted(i, -hh, j, -hh))
                / (4.0 * hh * hh);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Jet { value: v0, grad, hess }
}

/// Scene-file description of a scalar field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarSpec {
    Poly { dim: usize, terms: Polynomial },
    SquaredNorm { center: Vec<f64> },
    Norm { center: Vec<f64> },
    LogNorm { center: Vec<f64> },
    SumYSquared { n: usize },
    /// `sum_i w_i f_i + constant`
    Combination {
        #[serde(default)]
        constant: f64,
        terms: Vec<(f64, ScalarSpec)>,
    },
}

impl ScalarSpec {
    pub fn build(&self) -> ScalarField {
        match self {
            ScalarSpec::Poly { dim, terms } => ScalarField::polynomial(*dim, terms.clone()),
            ScalarSpec::SquaredNorm { center } => ScalarField::radial(center.clone(), Profile::SquaredNorm),
            ScalarSpec::Norm { center } => ScalarField::radial(center.clone(), Profile::Norm),
            ScalarSpec::LogNorm { center } => ScalarField::radial(center.clone(), Profile::LogNorm),
            ScalarSpec::SumYSquared { n } => ScalarField::sum_y_squared(*n),
            ScalarSpec::Combination { constant, terms } => {
                let built: Vec<(f64, ScalarField)> = terms.iter().map(|(w, s)| (*w, s.build())).collect();
                let dim = built.first().map_or(0, |(_, f)| f.dim());
                ScalarField::combination(dim, *constant, built)
            }
        }
    }
}
