#![allow(dead_code)]

use acdisc::acs::{deviation_c1, structure_from_h, HField, StructureField};
use acdisc::levi::ScalarField;
use acdisc::linalg::Mat;
use acdisc::poly::{ComplexPolyMatrix, Polynomial};
use acdisc::region::DomainSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random polynomial of total degree at most 2 in `dim` variables.
pub fn random_quadratic(rng: &mut ChaCha8Rng, dim: usize) -> Polynomial {
    let mut p = Polynomial::constant(dim, rng.random_range(-1.0..1.0));
    for a in 0..dim {
        p = p.add(&Polynomial::variable(dim, a).scale(rng.random_range(-1.0..1.0)));
        for b in a..dim {
            let mut e = vec![0; dim];
            e[a] += 1;
            e[b] += 1;
            p = p.add(&Polynomial::monomial(e, rng.random_range(-1.0..1.0)));
        }
    }
    p
}

pub fn random_h(rng: &mut ChaCha8Rng, n: usize) -> ComplexPolyMatrix {
    let mut h = ComplexPolyMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            h.re.set(i, j, random_quadratic(rng, 2 * n));
            h.im.set(i, j, random_quadratic(rng, 2 * n));
        }
    }
    h
}

/// A structure built from a random quadratic `H`, rescaled until the sampled
/// `|J - J_st|_{C¹}` over `d` is at most `target`.
pub fn admissible_structure(rng: &mut ChaCha8Rng, n: usize, d: &DomainSpec, target: f64) -> (StructureField, f64) {
    let h = random_h(rng, n);
    let mut scale = target;
    for _ in 0..40 {
        let j = match structure_from_h(HField::Poly(h.scale(scale)), d, 0.25) {
            Ok(j) => j,
            Err(_) => {
                scale *= 0.5;
                continue;
            }
        };
        let (dev, _) = deviation_c1(&j, d);
        if dev <= target {
            return (j, dev);
        }
        scale *= 0.97 * target / dev;
    }
    panic!("could not bring the deviation under {target}");
}

/// Uniform sample of the closed ball of radius `r` centred at the origin.
pub fn ball_point(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= r * r {
            return x;
        }
    }
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return x.iter().map(|v| v / n).collect();
        }
    }
}

pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `d(d^c u)(X, JX)` with `d^c u = -du ∘ J`, the exterior derivative taken by
/// central differences of the one-form `α_j = -Σ_i ∂_i u J_ij`.
pub fn levi_by_exterior_derivative(j: &StructureField, u: &ScalarField, p: &[f64], x: &[f64]) -> f64 {
    let dim = p.len();
    let alpha = |q: &[f64]| -> Vec<f64> {
        let g = u.gradient(q);
        let m = j.value(q);
        (0..dim).map(|c| -(0..dim).map(|i| g[i] * m[(i, c)]).sum::<f64>()).collect()
    };
    let step = 1e-5;
    // dalpha[k][c] = ∂_k α_c
    let mut dalpha = vec![vec![0.0; dim]; dim];
    for k in 0..dim {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[k] += step;
        b[k] -= step;
        let (fa, fb) = (alpha(&a), alpha(&b));
        for c in 0..dim {
            dalpha[k][c] = (fa[c] - fb[c]) / (2.0 * step);
        }
    }
    let jm = j.value(p);
    let y: Vec<f64> = (0..dim).map(|r| (0..dim).map(|c| jm[(r, c)] * x[c]).sum()).collect();
    let mut out = 0.0;
    for k in 0..dim {
        for c in 0..dim {
            out += (dalpha[k][c] - dalpha[c][k]) * x[k] * y[c];
        }
    }
    out
}

/// Real matrix from row-major entries.
pub fn mat(rows: usize, entries: &[f64]) -> Mat {
    Mat::from_row_slice(rows, entries.len() / rows, entries)
}
