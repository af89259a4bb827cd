//! Almost complex structures on domains of R^{2n}: representation, validation,
//! norms and block form.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, blocks, from_blocks, j_st, op_norm, CMat, Mat};
use crate::poly::{ComplexPolyMatrix, PolyMatrix};
use crate::region::Region;

/// Default central-difference step for opaque callables.
pub const FD_STEP: f64 = 1e-5;
/// Default cap on `|H|_0` when building a structure from `H`.
pub const H_CAP: f64 = 0.25;

pub type MatFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
pub type CMatFn = Arc<dyn Fn(&[f64]) -> CMat + Send + Sync>;

/// The n×n complex field `H` of the (1,0)-forms `dz + H dy`.
#[derive(Clone)]
pub enum HField {
    Poly(ComplexPolyMatrix),
    Callable { n: usize, f: CMatFn, step: f64 },
}

impl fmt::Debug for HField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HField::Poly(p) => f.debug_tuple("Poly").field(p).finish(),
            HField::Callable { n, step, .. } => write!(f, "Callable {{ n: {n}, step: {step} }}"),
        }
    }
}

impl HField {
    pub fn n(&self) -> usize {
        match self {
            HField::Poly(p) => p.size(),
            HField::Callable { n, .. } => *n,
        }
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        match self {
            HField::Poly(p) => linalg::complexify(&p.re.eval(x), &p.im.eval(x)),
            HField::Callable { f, .. } => f(x),
        }
    }

    /// Value and the 2n partial derivatives.
    pub fn jet(&self, x: &[f64]) -> (CMat, Vec<CMat>) {
        let dim = 2 * self.n();
        match self {
            HField::Poly(p) => {
                let d = (0..dim)
                    .map(|k| {
                        let dk = p.derivative(k);
                        linalg::complexify(&dk.re.eval(x), &dk.im.eval(x))
                    })
                    .collect();
                (self.value(x), d)
            }
            HField::Callable { f, step, .. } => {
                let d = (0..dim)
                    .map(|k| {
                        let mut xp = x.to_vec();
                        let mut xm = x.to_vec();
                        xp[k] += step;
                        xm[k] -= step;
                        (f(&xp) - f(&xm)) / Complex64::new(2.0 * step, 0.0)
                    })
                    .collect();
                (f(x), d)
            }
        }
    }
}

#[derive(Clone)]
enum Repr {
    Constant(Mat),
    Poly {
        value: PolyMatrix,
        d1: Vec<PolyMatrix>,
    },
    FromH(HField),
    /// `x -> P^{-1} J(P x + offset) P`.
    Linear {
        p: Mat,
        p_inv: Mat,
        offset: Vec<f64>,
        inner: Arc<StructureField>,
    },
    /// Tangent lift in the coordinate order `(x, X, y, Y)`.
    Lift(Arc<StructureField>),
    Callable {
        f: MatFn,
        step: f64,
    },
}

/// An almost complex structure `J` on a domain of R^{2n}.
#[derive(Clone)]
pub struct StructureField {
    n: usize,
    regularity: f64,
    repr: Repr,
}

impl fmt::Debug for StructureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            Repr::Constant(_) => "constant",
            Repr::Poly { .. } => "poly",
            Repr::FromH(_) => "from_h",
            Repr::Linear { .. } => "linear",
            Repr::Lift(_) => "lift",
            Repr::Callable { .. } => "callable",
        };
        write!(f, "StructureField {{ n: {}, repr: {kind} }}", self.n)
    }
}

fn fd_derivative(f: &dyn Fn(&[f64]) -> Mat, x: &[f64], k: usize, step: f64) -> Mat {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += step;
    xm[k] -= step;
    (f(&xp) - f(&xm)) / (2.0 * step)
}

impl StructureField {
    pub fn standard(n: usize) -> Self {
        Self::constant(j_st(n))
    }

    pub fn constant(m: Mat) -> Self {
        assert!(m.is_square() && m.nrows() % 2 == 0, "structure matrix must be 2n x 2n");
        StructureField {
            n: m.nrows() / 2,
            regularity: f64::INFINITY,
            repr: Repr::Constant(m),
        }
    }

    /// Polynomial entries; derivatives are exact.
    pub fn polynomial(value: PolyMatrix) -> Self {
        assert!(value.rows == value.cols && value.rows % 2 == 0);
        let dim = value.rows;
        let d1 = (0..dim).map(|k| value.derivative(k)).collect();
        StructureField {
            n: dim / 2,
            regularity: f64::INFINITY,
            repr: Repr::Poly { value, d1 },
        }
    }

    /// Opaque callable; derivatives by central differences with `step`.
    pub fn callable(n: usize, f: MatFn, step: f64) -> Self {
        StructureField {
            n,
            regularity: 1.5,
            repr: Repr::Callable { f, step },
        }
    }

    pub fn with_regularity(mut self, r: f64) -> Self {
        self.regularity = r;
        self
    }

    pub fn regularity(&self) -> f64 {
        self.regularity
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    /// True when derivatives are exact (no finite differences anywhere).
    pub fn has_exact_derivatives(&self) -> bool {
        match &self.repr {
            Repr::Constant(_) | Repr::Poly { .. } => true,
            Repr::FromH(h) => matches!(h, HField::Poly(_)),
            Repr::Linear { inner, .. } => inner.has_exact_derivatives(),
            Repr::Lift(_) | Repr::Callable { .. } => false,
        }
    }

    pub fn value(&self, x: &[f64]) -> Mat {
        match &self.repr {
            Repr::Constant(m) => m.clone(),
            Repr::Poly { value, .. } => value.eval(x),
            Repr::FromH(h) => from_h_value(&h.value(x)),
            Repr::Linear {
                p,
                p_inv,
                offset,
                inner,
            } => {
                let y = affine(p, offset, x);
                p_inv * inner.value(&y) * p
            }
            Repr::Lift(base) => lift_value(base, x),
            Repr::Callable { f, .. } => f(x),
        }
    }

    /// `∂J/∂x_k` at `x`.
    pub fn derivative(&self, x: &[f64], k: usize) -> Mat {
        match &self.repr {
            Repr::Constant(m) => Mat::zeros(m.nrows(), m.ncols()),
            Repr::Poly { d1, .. } => d1[k].eval(x),
            Repr::FromH(_) => self.jet(x).1.swap_remove(k),
            Repr::Linear {
                p,
                p_inv,
                offset,
                inner,
            } => {
                let y = affine(p, offset, x);
                let mut acc = Mat::zeros(self.dim(), self.dim());
                for l in 0..self.dim() {
                    if p[(l, k)] != 0.0 {
                        acc += inner.derivative(&y, l) * p[(l, k)];
                    }
                }
                p_inv * acc * p
            }
            Repr::Lift(base) => lift_derivative(base, x, k),
            Repr::Callable { f, step } => fd_derivative(f.as_ref(), x, k, *step),
        }
    }

    /// Value and all first derivatives.
    pub fn jet(&self, x: &[f64]) -> (Mat, Vec<Mat>) {
        match &self.repr {
            Repr::FromH(h) => {
                let (hv, dh) = h.jet(x);
                from_h_jet(&hv, &dh)
            }
            _ => {
                let v = self.value(x);
                let d = (0..self.dim()).map(|k| self.derivative(x, k)).collect();
                (v, d)
            }
        }
    }

    /// `∂²J/∂x_k∂x_l`; exact for polynomial entries, central differences otherwise.
    pub fn second_derivative(&self, x: &[f64], k: usize, l: usize) -> Mat {
        match &self.repr {
            Repr::Constant(m) => Mat::zeros(m.nrows(), m.ncols()),
            Repr::Poly { d1, .. } => d1[k].derivative(l).eval(x),
            Repr::Linear {
                p,
                p_inv,
                offset,
                inner,
            } => {
                let y = affine(p, offset, x);
                let mut acc = Mat::zeros(self.dim(), self.dim());
                for a in 0..self.dim() {
                    for b in 0..self.dim() {
                        let w = p[(a, k)] * p[(b, l)];
                        if w != 0.0 {
                            acc += inner.second_derivative(&y, a, b) * w;
                        }
                    }
                }
                p_inv * acc * p
            }
            _ => {
                let step = FD_STEP;
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[l] += step;
                xm[l] -= step;
                (self.derivative(&xp, k) - self.derivative(&xm, k)) / (2.0 * step)
            }
        }
    }

    /// The pushforward `x -> P^{-1} J(P x + offset) P` by the affine map
    /// `x -> P x + offset` (the structure seen in coordinates `x`).
    pub fn pushforward_affine(&self, p: &Mat, offset: &[f64]) -> Result<StructureField> {
        if p.nrows() != self.dim() || !p.is_square() || offset.len() != self.dim() {
            return Err(Error::Dimension("frame must be 2n x 2n".into()));
        }
        let p_inv = linalg::inverse(p, "pushforward frame")?;
        Ok(StructureField {
            n: self.n,
            regularity: self.regularity,
            repr: Repr::Linear {
                p: p.clone(),
                p_inv,
                offset: offset.to_vec(),
                inner: Arc::new(self.clone()),
            },
        })
    }

    /// The structure `x -> J(x) - J_st`, as a matrix field value.
    pub fn deviation(&self, x: &[f64]) -> Mat {
        self.value(x) - j_st(self.n)
    }

    fn lift(base: &StructureField) -> StructureField {
        StructureField {
            n: 2 * base.n,
            regularity: (base.regularity - 1.0).max(0.0),
            repr: Repr::Lift(Arc::new(base.clone())),
        }
    }
}

fn affine(p: &Mat, offset: &[f64], x: &[f64]) -> Vec<f64> {
    (0..p.nrows())
        .map(|i| offset[i] + (0..p.ncols()).map(|j| p[(i, j)] * x[j]).sum::<f64>())
        .collect()
}

/// Blocks of `J` from `H = R + iS`: `C = (S+I)^{-1}`, `A = -RC`,
/// `B = -(I+A²)(S+I)`, `D = -CA(S+I)`.
fn from_h_value(h: &CMat) -> Mat {
    from_h_jet(h, &[]).0
}

fn from_h_jet(h: &CMat, dh: &[CMat]) -> (Mat, Vec<Mat>) {
    let n = h.nrows();
    let id = Mat::identity(n, n);
    let r = h.map(|c| c.re);
    let s = h.map(|c| c.im);
    let sp = &s + &id;
    let c = match sp.clone().try_inverse() {
        Some(c) => c,
        None => {
            let nan = Mat::from_element(2 * n, 2 * n, f64::NAN);
            return (nan.clone(), vec![nan; dh.len()]);
        }
    };
    let a = -&r * &c;
    let a2 = &a * &a;
    let b = -(&id + &a2) * &sp;
    let d = -(&c * &a * &sp);
    let value = from_blocks(&a, &b, &c, &d);
    let derivs = dh
        .iter()
        .map(|dhk| {
            let dr = dhk.map(|z| z.re);
            let ds = dhk.map(|z| z.im);
            let dc = -(&c * &ds * &c);
            let da = -(&dr * &c) - &r * &dc;
            let db = -((&da * &a + &a * &da) * &sp) - (&id + &a2) * &ds;
            let dd = -(&dc * &a * &sp + &c * &da * &sp + &c * &a * &ds);
            from_blocks(&da, &db, &dc, &dd)
        })
        .collect();
    (value, derivs)
}

/// The perturbation `H` with `(1,0)`-forms `dz + H dy` for a structure matrix:
/// `H = (iI - A) C^{-1} - iI`.
pub fn extract_h(j: &Mat) -> Result<CMat> {
    let n = j.nrows() / 2;
    let (a, _, c, _) = blocks(j);
    let c_inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularBlock("C block is not invertible".into()))?;
    let i_n = CMat::from_diagonal_element(n, n, Complex64::i());
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let cc = c_inv.map(|v| Complex64::new(v, 0.0));
    Ok((&i_n - ac) * cc - i_n)
}

/// Builds `J` from the (1,0)-form perturbation `H`, checking `I + S` and the
/// cap `|H|_0 <= cap` at every sample of `domain`.
pub fn structure_from_h(h: HField, domain: &dyn Region, cap: f64) -> Result<StructureField> {
    let n = h.n();
    if domain.dim() != 2 * n {
        return Err(Error::Dimension(format!("H is {n}x{n} but the domain has dimension {}", domain.dim())));
    }
    let id = Mat::identity(n, n);
    for x in domain.samples() {
        let hv = h.value(&x);
        let norm = linalg::cop_norm(&hv);
        if !norm.is_finite() || norm > cap {
            return Err(Error::TooLarge { norm, cap });
        }
        let sp = hv.map(|c| c.im) + &id;
        match sp.clone().try_inverse() {
            Some(inv) if op_norm(&inv) * op_norm(&sp) < 1e12 => {}
            _ => return Err(Error::SingularBlock(format!("I + S is singular at {x:?}"))),
        }
    }
    Ok(StructureField {
        n,
        regularity: f64::INFINITY,
        repr: Repr::FromH(h),
    })
}

// --- tangent lift -----------------------------------------------------------

/// Split a lifted point `(x, X, y, Y)` into base point `(x, y)` and fibre `(X, Y)`.
fn split_lift(x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut base = Vec::with_capacity(2 * n);
    let mut fibre = Vec::with_capacity(2 * n);
    base.extend_from_slice(&x[0..n]);
    fibre.extend_from_slice(&x[n..2 * n]);
    base.extend_from_slice(&x[2 * n..3 * n]);
    fibre.extend_from_slice(&x[3 * n..4 * n]);
    (base, fibre)
}

/// Lifted coordinate index of the base coordinate `k` (or fibre coordinate when `fibre`).
pub fn lift_index(n: usize, k: usize, fibre: bool) -> usize {
    let (block, off) = if k < n { (0, k) } else { (2, k - n) };
    (block + usize::from(fibre)) * n + off
}

/// Assemble the lifted 4n matrix from base blocks and their fibre contractions.
fn assemble_lift(j: &Mat, dj: &Mat) -> Mat {
    let n = j.nrows() / 2;
    let (a, b, c, d) = blocks(j);
    let (al, be, ga, de) = blocks(dj);
    let mut m = Mat::zeros(4 * n, 4 * n);
    let put = |m: &mut Mat, bi: usize, bj: usize, blk: &Mat| {
        m.view_mut((bi * n, bj * n), (n, n)).copy_from(blk);
    };
    put(&mut m, 0, 0, &a);
    put(&mut m, 0, 2, &b);
    put(&mut m, 1, 0, &al);
    put(&mut m, 1, 1, &a);
    put(&mut m, 1, 2, &be);
    put(&mut m, 1, 3, &b);
    put(&mut m, 2, 0, &c);
    put(&mut m, 2, 2, &d);
    put(&mut m, 3, 0, &ga);
    put(&mut m, 3, 1, &c);
    put(&mut m, 3, 2, &de);
    put(&mut m, 3, 3, &d);
    m
}

fn lift_value(base: &StructureField, x: &[f64]) -> Mat {
    let n = base.n;
    let (p, v) = split_lift(x, n);
    let (j, dj) = base.jet(&p);
    let mut contraction = Mat::zeros(2 * n, 2 * n);
    for (k, dk) in dj.iter().enumerate() {
        contraction += dk * v[k];
    }
    assemble_lift(&j, &contraction)
}

fn lift_derivative(base: &StructureField, x: &[f64], k: usize) -> Mat {
    let n = base.n;
    let (p, v) = split_lift(x, n);
    let dim = 2 * n;
    // which base or fibre coordinate does lifted index k refer to?
    let block = k / n;
    let off = k % n;
    let fibre = block == 1 || block == 3;
    let base_k = if block < 2 { off } else { n + off };
    if fibre {
        // derivative in X_k / Y_k: only the contraction blocks change
        let dj = base.derivative(&p, base_k);
        assemble_lift(&Mat::zeros(dim, dim), &dj)
    } else {
        let dj = base.derivative(&p, base_k);
        let mut contraction = Mat::zeros(dim, dim);
        for (l, vl) in v.iter().enumerate() {
            if *vl != 0.0 {
                contraction += base.second_derivative(&p, l, base_k) * *vl;
            }
        }
        assemble_lift(&dj, &contraction)
    }
}

/// The tangent lift `J^c` of `J` together with its lifted normalization.
#[derive(Clone, Debug)]
pub struct TangentLift {
    pub base: StructureField,
    pub lifted: StructureField,
}

/// Lifts `J` to the tangent bundle in coordinates `(x, X, y, Y)`.
pub fn tangent_lift(j: &StructureField) -> TangentLift {
    TangentLift {
        base: j.clone(),
        lifted: StructureField::lift(j),
    }
}

impl TangentLift {
    /// The normalization `φ(x, y) = (x - A C^{-1} y, C^{-1} y)` of the base structure.
    pub fn phi(&self, q: &[f64]) -> Result<Vec<f64>> {
        normalization(&self.base.value(q), q)
    }

    /// The lifted normalization `φ^c` at `(x, X, y, Y)`, built from the
    /// 2n-blocks `[[A,0],[α,A]]` and `[[C,0],[γ,C]]` of `J^c`.
    pub fn phi_c(&self, q: &[f64]) -> Result<Vec<f64>> {
        normalization(&self.lifted.value(q), q)
    }

    /// Inclusion of the zero section: `(x, y) -> (x, 0, y, 0)`.
    pub fn include(&self, q: &[f64]) -> Vec<f64> {
        let n = self.base.n;
        let mut out = vec![0.0; 4 * n];
        out[..n].copy_from_slice(&q[..n]);
        out[2 * n..3 * n].copy_from_slice(&q[n..]);
        out
    }

    /// Projection `(x, X, y, Y) -> (x, y)`.
    pub fn project(&self, q: &[f64]) -> Vec<f64> {
        split_lift(q, self.base.n).0
    }
}

/// `φ(x, y) = (x - A C^{-1} y, C^{-1} y)` with `A`, `C` the blocks of `j`.
pub fn normalization(j: &Mat, q: &[f64]) -> Result<Vec<f64>> {
    let n = j.nrows() / 2;
    let (a, _, c, _) = blocks(j);
    let c_inv = c
        .try_inverse()
        .ok_or_else(|| Error::SingularBlock("C block is not invertible".into()))?;
    let x = linalg::Vector::from_column_slice(&q[..n]);
    let y = linalg::Vector::from_column_slice(&q[n..]);
    let ys = &c_inv * &y;
    let xs = x - &a * &ys;
    Ok(xs.iter().chain(ys.iter()).copied().collect())
}

// --- validation and norms ----------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
    pub samples: usize,
}

/// Max over samples of the operator norm of `J(p)^2 + I`.
pub fn validate_structure(j: &StructureField, domain: &dyn Region, tol: f64) -> ValidationReport {
    let id = Mat::identity(j.dim(), j.dim());
    let samples = domain.samples();
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for p in &samples {
        let m = j.value(p);
        let r = op_norm(&(&m * &m + &id));
        let r = if r.is_finite() { r } else { f64::INFINITY };
        if r > worst.0 {
            worst = (r, p.clone());
        }
    }
    let max_residual = worst.0.max(0.0);
    ValidationReport {
        max_residual,
        worst_point: worst.1,
        passed: max_residual <= tol,
        samples: samples.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm0: f64,
    pub norm1: f64,
    pub c1_norm: f64,
}

/// `|M|_0 + (Σ_i |(∂_k M_ij)_{jk}|_0²)^{1/2}` for a matrix with derivatives.
pub fn norm1_of(value: &Mat, derivs: &[Mat]) -> f64 {
    let dim = value.nrows();
    let mut sum = 0.0;
    for i in 0..dim {
        let row = Mat::from_fn(value.ncols(), derivs.len(), |jj, k| derivs[k][(i, jj)]);
        sum += op_norm(&row).powi(2);
    }
    op_norm(value) + sum.sqrt()
}

/// Pointwise `(|J_p|_0, |J_p|_1)`.
pub fn pointwise_norms(j: &StructureField, x: &[f64]) -> (f64, f64) {
    let (v, d) = j.jet(x);
    (op_norm(&v), norm1_of(&v, &d))
}

/// Sup over samples of `|J_p|_0` and `|J_p|_1`; the C¹ norm is the latter.
pub fn structure_norms(j: &StructureField, domain: &dyn Region) -> NormReport {
    let mut n0: f64 = 0.0;
    let mut n1: f64 = 0.0;
    for p in domain.samples() {
        let (a, b) = pointwise_norms(j, &p);
        n0 = n0.max(a);
        n1 = n1.max(b);
    }
    NormReport {
        norm0: n0,
        norm1: n1,
        c1_norm: n1,
    }
}

/// Pointwise `(|H_p|_0, |H_p|_1)` for `H = J - J_st`.
pub fn deviation_pointwise(j: &StructureField, x: &[f64]) -> (f64, f64) {
    let (v, d) = j.jet(x);
    let h = v - j_st(j.n());
    (op_norm(&h), norm1_of(&h, &d))
}

/// `|J - J_st|_{C¹}` over the samples of `domain`, with the worst point.
pub fn deviation_c1(j: &StructureField, domain: &dyn Region) -> (f64, Vec<f64>) {
    let mut worst = (0.0, Vec::new());
    for p in domain.samples() {
        let (_, n1) = deviation_pointwise(j, &p);
        if n1 > worst.0 || worst.1.is_empty() {
            worst = (n1, p);
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct BlockForm {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
    /// `|B + (I + A²) C^{-1}|`
    pub residual_b: f64,
    /// `|D + C A C^{-1}|`
    pub residual_d: f64,
}

/// Blocks of `J(p)` and the residuals of the near-standard completion identities.
pub fn block_form(j: &StructureField, p: &[f64]) -> Result<BlockForm> {
    block_form_of(&j.value(p))
}

pub fn block_form_of(m: &Mat) -> Result<BlockForm> {
    let (a, b, c, d) = blocks(m);
    let n = a.nrows();
    let c_inv = linalg::inverse(&c, "C block").map_err(|_| Error::SingularBlock("C block is not invertible".into()))?;
    let id = Mat::identity(n, n);
    let residual_b = op_norm(&(&b + (&id + &a * &a) * &c_inv));
    let residual_d = op_norm(&(&d + &c * &a * &c_inv));
    Ok(BlockForm {
        a,
        b,
        c,
        d,
        residual_b,
        residual_d,
    })
}

/// Scene-file description of a structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "repr", rename_all = "snake_case")]
pub enum StructureSpec {
    Standard {
        n: usize,
    },
    Constant {
        n: usize,
        /// Row-major 2n×2n entries.
        entries: Vec<f64>,
    },
    Poly {
        n: usize,
        entries: PolyMatrix,
    },
    #[serde(rename = "from_H")]
    FromH {
        n: usize,
        #[serde(rename = "H")]
        h: ComplexPolyMatrix,
        #[serde(default)]
        cap: Option<f64>,
    },
}

impl StructureSpec {
    pub fn n(&self) -> usize {
        match self {
            StructureSpec::Standard { n }
            | StructureSpec::Constant { n, .. }
            | StructureSpec::Poly { n, .. }
            | StructureSpec::FromH { n, .. } => *n,
        }
    }

    pub fn build(&self, domain: &dyn Region) -> Result<StructureField> {
        match self {
            StructureSpec::Standard { n } => Ok(StructureField::standard(*n)),
            StructureSpec::Constant { n, entries } => {
                if entries.len() != 4 * n * n {
                    return Err(Error::Scene(format!("constant structure needs {} entries", 4 * n * n)));
                }
                Ok(StructureField::constant(Mat::from_row_slice(2 * n, 2 * n, entries)))
            }
            StructureSpec::Poly { n, entries } => {
                if entries.rows != 2 * n || entries.cols != 2 * n || entries.entries.len() != 4 * n * n {
                    return Err(Error::Scene("polynomial structure must be 2n x 2n".into()));
                }
                Ok(StructureField::polynomial(entries.clone()))
            }
            StructureSpec::FromH { n, h, cap } => {
                if h.size() != *n || h.re.entries.len() != n * n || h.im.entries.len() != n * n {
                    return Err(Error::Scene("H must be n x n".into()));
                }
                structure_from_h(HField::Poly(h.clone()), domain, cap.unwrap_or(H_CAP))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::region::DomainSpec;

    fn small_h(n: usize) -> ComplexPolyMatrix {
        let mut h = ComplexPolyMatrix::zeros(n);
        let dim = 2 * n;
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0; dim];
                e[(i + j) % dim] = 1;
                h.re.set(i, j, Polynomial::monomial(e.clone(), 0.01 * (1.0 + i as f64)));
                let mut e2 = vec![0; dim];
                e2[n + j] = 1;
                h.im.set(i, j, Polynomial::monomial(e2, 0.007).add(&Polynomial::constant(dim, 0.003)));
            }
        }
        h
    }

    #[test]
    fn zero_h_gives_standard() {
        let d = DomainSpec::unit_ball(1);
        let j = structure_from_h(HField::Poly(ComplexPolyMatrix::zeros(1)), &d, H_CAP).unwrap();
        assert_eq!(j.value(&[0.3, 0.2]), j_st(1));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = DomainSpec::ball_with_resolution(vec![0.0; 4], 1.0, 3).unwrap();
        let j = structure_from_h(HField::Poly(small_h(2)), &d, H_CAP).unwrap();
        let x = [0.2, -0.1, 0.3, 0.05];
        let (_, dj) = j.jet(&x);
        for (k, djk) in dj.iter().enumerate() {
            let fd = fd_derivative(&|p: &[f64]| j.value(p), &x, k, 1e-6);
            assert!((djk - fd).norm() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn extracted_h_roundtrips() {
        let d = DomainSpec::ball_with_resolution(vec![0.0; 4], 1.0, 3).unwrap();
        let h = small_h(2);
        let hf = HField::Poly(h);
        let j = structure_from_h(hf.clone(), &d, H_CAP).unwrap();
        let x = [0.1, 0.4, -0.2, 0.3];
        let back = extract_h(&j.value(&x)).unwrap();
        assert!((back - hf.value(&x)).norm() < 1e-12);
    }

    #[test]
    fn lift_of_standard_is_standard_in_lift_order() {
        let l = tangent_lift(&StructureField::standard(1));
        let m = l.lifted.value(&[0.1, 0.5, -0.2, 0.7]);
        // (x, X, y, Y): J^c = [[0,0,-1,0],[0,0,0,-1],[1,0,0,0],[0,1,0,0]]
        assert_eq!(m, j_st(2));
    }

    #[test]
    fn lift_index_layout() {
        assert_eq!(lift_index(2, 0, false), 0);
        assert_eq!(lift_index(2, 1, true), 3);
        assert_eq!(lift_index(2, 2, false), 4);
        assert_eq!(lift_index(2, 3, true), 7);
    }
}
