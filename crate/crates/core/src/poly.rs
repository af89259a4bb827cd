//! Multivariate polynomials with exact differentiation.

use serde::{Deserialize, Serialize};

use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exp: Vec<u32>,
    pub coef: f64,
}

/// A real polynomial in `dim` variables, stored as a list of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial {
            terms: vec![Term { exp: vec![0; dim], coef: c }],
        }
    }

    /// The coordinate function `x_var`.
    pub fn variable(dim: usize, var: usize) -> Self {
        let mut exp = vec![0; dim];
        exp[var] = 1;
        Polynomial {
            terms: vec![Term { exp, coef: 1.0 }],
        }
    }

    pub fn monomial(exp: Vec<u32>, coef: f64) -> Self {
        Polynomial {
            terms: vec![Term { exp, coef }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.exp
                    .iter()
                    .zip(x)
                    .fold(t.coef, |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exp.get(var).copied().unwrap_or(0) > 0 && t.coef != 0.0)
            .map(|t| {
                let mut exp = t.exp.clone();
                let e = exp[var];
                exp[var] -= 1;
                Term {
                    exp,
                    coef: t.coef * e as f64,
                }
            })
            .collect();
        Polynomial { terms }
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    exp: t.exp.clone(),
                    coef: t.coef * s,
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Polynomial { terms }
    }

    /// Largest number of variables referenced by any term.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|t| t.exp.len()).max().unwrap_or(0)
    }
}

/// A matrix of polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn constant(m: &Mat) -> Self {
        let dim = m.nrows().max(m.ncols());
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| {
                if m[(i, j)] == 0.0 {
                    Polynomial::zero()
                } else {
                    Polynomial::constant(dim, m[(i, j)])
                }
            })
            .collect();
        PolyMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        self.entries[i * self.cols + j] = p;
    }

    pub fn eval(&self, x: &[f64]) -> Mat {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).eval(x))
    }

    pub fn derivative(&self, var: usize) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.derivative(var)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.scale(s)).collect(),
        }
    }
}

/// An n×n matrix of complex polynomials `re + i im`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolyMatrix {
    pub re: PolyMatrix,
    pub im: PolyMatrix,
}

impl ComplexPolyMatrix {
    pub fn zeros(n: usize) -> Self {
        let z = PolyMatrix {
            rows: n,
            cols: n,
            entries: vec![Polynomial::zero(); n * n],
        };
        ComplexPolyMatrix { re: z.clone(), im: z }
    }

    pub fn size(&self) -> usize {
        self.re.rows
    }

    pub fn derivative(&self, var: usize) -> Self {
        ComplexPolyMatrix {
            re: self.re.derivative(var),
            im: self.im.derivative(var),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        ComplexPolyMatrix {
            re: self.re.scale(s),
            im: self.im.scale(s),
        }
    }
}
