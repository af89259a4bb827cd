//! Small dense linear algebra: symmetric eigenvalues by cyclic Jacobi, operator
//! norms, block access and the real representations of complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// The standard structure `[[0, -I], [I, 0]]` on R^{2n}.
pub fn j_st(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.
///
/// Cyclic Jacobi sweeps until the off-diagonal mass is below `1e-15` of the
/// Frobenius norm. Only the symmetric part of `m` is used.
pub fn sym_eigen(m: &Mat) -> (Vec<f64>, Mat) {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Mat::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &Mat) -> (f64, f64) {
    let (vals, _) = sym_eigen(m);
    (vals[0], vals[vals.len() - 1])
}

/// Largest singular value, computed from the Gram matrix.
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    let (_, top) = eig_extremes(&gram);
    top.max(0.0).sqrt()
}

/// Inverse with a conditioning guard: fails when `cond > 1e12`.
pub fn inverse(m: &Mat, what: &str) -> Result<Mat> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix(what.to_string()))?;
    let cond = op_norm(m) * op_norm(&inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularMatrix(format!("{what} (condition {cond:.3e})")));
    }
    Ok(inv)
}

/// Complex inverse with the same guard, via the real representation.
pub fn cinverse(m: &CMat, what: &str) -> Result<CMat> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix(what.to_string()))?;
    let cond = cop_norm(m) * cop_norm(&inv);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularMatrix(format!("{what} (condition {cond:.3e})")));
    }
    Ok(inv)
}

/// The four n×n blocks `(A, B, C, D)` of a 2n×2n matrix.
pub fn blocks(j: &Mat) -> (Mat, Mat, Mat, Mat) {
    let n = j.nrows() / 2;
    (
        j.view((0, 0), (n, n)).into_owned(),
        j.view((0, n), (n, n)).into_owned(),
        j.view((n, 0), (n, n)).into_owned(),
        j.view((n, n), (n, n)).into_owned(),
    )
}

pub fn from_blocks(a: &Mat, b: &Mat, c: &Mat, d: &Mat) -> Mat {
    let n = a.nrows();
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, n)).copy_from(b);
    m.view_mut((n, 0), (n, n)).copy_from(c);
    m.view_mut((n, n), (n, n)).copy_from(d);
    m
}

/// Real matrix of `w -> Z w` on C^n = R^n x R^n: `[[Re, -Im], [Im, Re]]`.
pub fn real_rep(z: &CMat) -> Mat {
    let re = z.map(|c| c.re);
    let im = z.map(|c| c.im);
    from_blocks(&re, &(-&im), &im, &re)
}

/// Real matrix of the anti-linear map `w -> Z conj(w)`: `[[Re, Im], [Im, -Re]]`.
pub fn antilinear_rep(z: &CMat) -> Mat {
    let re = z.map(|c| c.re);
    let im = z.map(|c| c.im);
    from_blocks(&re, &im, &im, &(-&re))
}

/// Operator norm of a complex matrix.
pub fn cop_norm(z: &CMat) -> f64 {
    op_norm(&real_rep(z))
}

/// Complex matrix from real and imaginary parts.
pub fn complexify(re: &Mat, im: &Mat) -> CMat {
    CMat::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// `(x, y)` in R^{2n} to `x + i y` in C^n.
pub fn to_complex(p: &[f64]) -> CVector {
    let n = p.len() / 2;
    CVector::from_fn(n, |i, _| Complex64::new(p[i], p[n + i]))
}

pub fn to_real(z: &CVector) -> Vector {
    let n = z.len();
    Vector::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

/// Euclidean norm of a complex vector slice.
pub fn cnorm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}
