//! Fixed-point solver for `∂̄h + q(h) conj(∂h) = 0` on the disc, attached
//! discs via conjugate symmetrization, and Schwarz reflection.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cauchy::cauchy_p;
use super::grid::DiscGrid;
use crate::acs::StructureField;
use crate::charts::{raw_system, Coefficient};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVector};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference residuals are reported over `|ζ| <= fd_radius`.
    pub fd_radius: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-7,
            max_iter: 200,
            fd_radius: 0.9,
            execution: Execution::Parallel,
        }
    }
}

/// Steps without decrease of the iterate distance that count as divergence.
const STALL_LIMIT: usize = 5;
const BLOWUP: f64 = 1e8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscSolution {
    /// `components[c][a]`: component `c` of `h` at node `a`.
    pub components: Vec<Vec<Complex64>>,
    /// Sup of the change of the right-hand side in the last step; this is the
    /// residual of the discrete equation `∂̄_P h = -q(h) conj(T h)`.
    pub residual: f64,
    /// Sup of `|∂̄h + q(h) conj(∂h)|` with finite-difference derivatives over `|ζ| <= fd_radius`.
    pub fd_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub center: Vec<Complex64>,
    pub direction: Vec<Complex64>,
    /// Largest ratio of consecutive iterate distances.
    pub contraction_ratio: f64,
    pub distances: Vec<f64>,
    pub attached: bool,
}

impl DiscSolution {
    pub fn n(&self) -> usize {
        self.components.len()
    }

    /// `h(ζ_a)` in C^n.
    pub fn value(&self, a: usize) -> CVector {
        CVector::from_iterator(self.n(), self.components.iter().map(|c| c[a]))
    }

    /// `h(ζ_a)` in R^{2n} = (x, y).
    pub fn real_value(&self, a: usize) -> Vec<f64> {
        linalg::to_real(&self.value(a)).iter().copied().collect()
    }

    /// Writes `zeta_re,zeta_im,re_1,im_1,...,residual` rows.
    pub fn write_csv<W: Write>(&self, grid: &DiscGrid, residuals: &[f64], mut w: W) -> std::io::Result<()> {
        write!(w, "zeta_re,zeta_im")?;
        for c in 0..self.n() {
            write!(w, ",re_{},im_{}", c + 1, c + 1)?;
        }
        writeln!(w, ",residual")?;
        for a in 0..grid.len() {
            let z = grid.nodes[a];
            write!(w, "{:.17e},{:.17e}", z.re, z.im)?;
            for c in &self.components {
                write!(w, ",{:.17e},{:.17e}", c[a].re, c[a].im)?;
            }
            writeln!(w, ",{:.17e}", residuals.get(a).copied().unwrap_or(f64::NAN))?;
        }
        Ok(())
    }
}

fn dz_components(grid: &DiscGrid, h: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    h.iter().map(|c| grid.dz(c)).collect()
}

fn node_vector(comp: &[Vec<Complex64>], a: usize) -> CVector {
    CVector::from_iterator(comp.len(), comp.iter().map(|c| c[a]))
}

/// Coefficient at node `a`: `q(h(ζ))`, or in symmetric mode
/// `conj(q(h(conj ζ)))` below the diameter.
fn coefficient_at(q: &dyn Coefficient, grid: &DiscGrid, h: &[Vec<Complex64>], a: usize, symmetric: bool) -> Result<CMat> {
    if symmetric && grid.nodes[a].im < 0.0 {
        let m = grid.mirror(a);
        Ok(q.q(&node_vector(h, m))?.map(|z| z.conj()))
    } else {
        q.q(&node_vector(h, a))
    }
}

/// Replaces `h` by the average of `h` and its reflection `conj(h(conj ζ))`.
pub fn symmetrize(grid: &DiscGrid, h: &mut [Vec<Complex64>]) {
    for comp in h.iter_mut() {
        let old = comp.clone();
        for a in 0..grid.len() {
            comp[a] = 0.5 * (old[a] + old[grid.mirror(a)].conj());
        }
    }
}

/// Pointwise `|∂̄h + A conj(∂h)|` with finite differences.
pub fn fd_residuals(q: &dyn Coefficient, grid: &DiscGrid, h: &[Vec<Complex64>], symmetric: bool, exec: Execution) -> Result<Vec<f64>> {
    let dz = dz_components(grid, h);
    let dzb: Vec<Vec<Complex64>> = h.iter().map(|c| grid.dzbar(c)).collect();
    let rows = par::map_indexed(exec, grid.len(), |a| -> Result<f64> {
        let coef = coefficient_at(q, grid, h, a, symmetric)?;
        let r = node_vector(&dzb, a) + coef * node_vector(&dz, a).map(|z| z.conj());
        Ok(r.norm())
    });
    rows.into_iter().collect()
}

fn sup_within(grid: &DiscGrid, values: &[f64], radius: f64) -> f64 {
    grid.nodes
        .iter()
        .zip(values)
        .filter(|(z, _)| z.norm() <= radius + 1e-12)
        .map(|(_, v)| *v)
        .fold(0.0, f64::max)
}

fn solve_core(
    q: &dyn Coefficient,
    grid: &DiscGrid,
    p: &CVector,
    v: &CVector,
    symmetric: bool,
    opts: &SolverOptions,
) -> Result<DiscSolution> {
    let n = q.n();
    if p.len() != n || v.len() != n {
        return Err(Error::Dimension(format!("disc data must lie in C^{n}")));
    }
    let nodes = grid.len();
    let origin = grid.origin();
    let exec = opts.execution;
    let mut f = vec![vec![Complex64::new(0.0, 0.0); nodes]; n];
    let mut distances = Vec::new();
    let mut stall = 0usize;
    let mut ratio: f64 = 0.0;
    for iteration in 1..=opts.max_iter.max(1) {
        let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for c in 0..n {
            let pf = cauchy_p(grid, &f[c], exec);
            let a = p[c] - pf[origin];
            let b = v[c] - grid.partials(&pf, origin).0;
            h.push(pf.iter().zip(&grid.nodes).map(|(w, z)| a + b * z + w).collect());
        }
        if symmetric {
            symmetrize(grid, &mut h);
        }
        let dz = dz_components(grid, &h);
        let rows = par::map_indexed(exec, nodes, |a| -> Result<CVector> {
            let coef = coefficient_at(q, grid, &h, a, symmetric)?;
            Ok(-(coef * node_vector(&dz, a).map(|z| z.conj())))
        });
        let mut f_new = vec![vec![Complex64::new(0.0, 0.0); nodes]; n];
        for (a, row) in rows.into_iter().enumerate() {
            let row = row?;
            for c in 0..n {
                f_new[c][a] = row[c];
            }
        }
        let dist = f_new
            .iter()
            .zip(&f)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(s, t)| (s - t).norm()))
            .fold(0.0, |m: f64, d| if d.is_nan() { f64::NAN } else { m.max(d) });
        if let Some(&prev) = distances.last() {
            if prev > 0.0 {
                ratio = ratio.max(dist / prev);
            }
        }
        distances.push(dist);
        if dist <= opts.tol {
            let res = fd_residuals(q, grid, &h, symmetric, exec)?;
            return Ok(DiscSolution {
                components: h,
                residual: dist,
                fd_residual: sup_within(grid, &res, opts.fd_radius),
                iterations: iteration,
                converged: true,
                center: p.iter().copied().collect(),
                direction: v.iter().copied().collect(),
                contraction_ratio: ratio,
                distances,
                attached: symmetric,
            });
        }
        if !dist.is_finite() || dist > BLOWUP {
            return Err(Error::NoContraction { iterations: iteration });
        }
        if distances.len() >= 2 && dist >= distances[distances.len() - 2] {
            stall += 1;
            if stall >= STALL_LIMIT {
                return Err(Error::NoContraction { iterations: iteration });
            }
        } else {
            stall = 0;
        }
        f = f_new;
    }
    Err(Error::MaxIter {
        iterations: opts.max_iter,
        residual: distances.last().copied().unwrap_or(f64::NAN),
    })
}

/// Solves for `h` with `h(0) = p` and `∂h/∂x(0) = v` (points of R^{2n} = (x, y)).
pub fn solve_disc(q: &dyn Coefficient, p: &[f64], v: &[f64], grid: &DiscGrid, opts: &SolverOptions) -> Result<DiscSolution> {
    if p.len() != 2 * q.n() || v.len() != 2 * q.n() {
        return Err(Error::Dimension("p and v must lie in R^{2n}".into()));
    }
    solve_core(q, grid, &linalg::to_complex(p), &linalg::to_complex(v), false, opts)
}

/// Solves for a disc symmetric under `g(conj ζ) = conj(g(ζ))`, so that its
/// diameter lies in `{y* = 0}`. Anchor and direction must both lie in that slice.
pub fn solve_attached_disc(
    q: &dyn Coefficient,
    anchor: &[f64],
    direction: &[f64],
    grid: &DiscGrid,
    opts: &SolverOptions,
) -> Result<DiscSolution> {
    let n = q.n();
    if anchor.len() != 2 * n || direction.len() != 2 * n {
        return Err(Error::Dimension("anchor and direction must lie in R^{2n}".into()));
    }
    let off = |v: &[f64]| v[n..].iter().map(|x| x.abs()).fold(0.0, f64::max);
    if off(anchor) > 0.0 {
        return Err(Error::PreconditionFailed(format!("anchor has y* = {:?}", &anchor[n..])));
    }
    if off(direction) > 0.0 {
        return Err(Error::PreconditionFailed(format!(
            "direction is not tangent to the slice: y* = {:?}",
            &direction[n..]
        )));
    }
    solve_core(q, grid, &linalg::to_complex(anchor), &linalg::to_complex(direction), true, opts)
}

/// Largest `|Im h_c|` over the diameter nodes.
pub fn diameter_offset(grid: &DiscGrid, sol: &DiscSolution) -> f64 {
    (0..grid.len())
        .filter(|&a| grid.nodes[a].im == 0.0)
        .flat_map(|a| sol.components.iter().map(move |c| c[a].im.abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reflection {
    pub solution: DiscSolution,
    pub residuals: Vec<f64>,
    /// Sup residual over `|Im ζ| <= band_width`, `|ζ| <= fd_radius`.
    pub band_residual: f64,
    /// Sup residual over `|Im ζ| > band_width`, `|ζ| <= fd_radius`.
    pub interior_residual: f64,
    pub band_width: f64,
    pub band_ok: bool,
}

/// Floor under which band residuals count as zero in the band comparison.
pub const BAND_FLOOR: f64 = 1e-12;

/// Extends the upper half of `h` by `g(ζ) = conj(h(conj ζ))` below the
/// diameter and measures the residual of the reflected equation.
pub fn reflect_extend(
    q: &dyn Coefficient,
    sol: &DiscSolution,
    grid: &DiscGrid,
    tol: f64,
    opts: &SolverOptions,
) -> Result<Reflection> {
    let off = diameter_offset(grid, sol);
    if off > tol {
        return Err(Error::NotAttached(off));
    }
    let mut g = sol.components.clone();
    for (comp, src) in g.iter_mut().zip(&sol.components) {
        for a in 0..grid.len() {
            if grid.nodes[a].im < 0.0 {
                comp[a] = src[grid.mirror(a)].conj();
            }
        }
    }
    let residuals = fd_residuals(q, grid, &g, true, opts.execution)?;
    let band_width = 3.0 * grid.h + 1e-12;
    let mut band: f64 = 0.0;
    let mut interior: f64 = 0.0;
    for (a, z) in grid.nodes.iter().enumerate() {
        if z.norm() > opts.fd_radius + 1e-12 {
            continue;
        }
        if z.im.abs() <= band_width {
            band = band.max(residuals[a]);
        } else {
            interior = interior.max(residuals[a]);
        }
    }
    let mut solution = sol.clone();
    solution.fd_residual = sup_within(grid, &residuals, opts.fd_radius);
    solution.components = g;
    Ok(Reflection {
        solution,
        residuals,
        band_residual: band,
        interior_residual: interior,
        band_width,
        band_ok: band <= 10.0 * interior + BAND_FLOOR,
    })
}

/// Sup over `|ζ| <= radius` of the real block system evaluated on the
/// finite-difference derivatives of `h`, for a structure in disc coordinates.
pub fn raw_residual(j: &StructureField, sol: &DiscSolution, grid: &DiscGrid, radius: f64) -> Result<f64> {
    let dz = dz_components(grid, &sol.components);
    let dzb: Vec<Vec<Complex64>> = sol.components.iter().map(|c| grid.dzbar(c)).collect();
    let mut worst: f64 = 0.0;
    for a in 0..grid.len() {
        if grid.nodes[a].norm() > radius + 1e-12 {
            continue;
        }
        let jm = j.value(&sol.real_value(a));
        let r = raw_system(&jm, &node_vector(&dz, a), &node_vector(&dzb, a))?;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{Scaled, ZeroCoefficient};

    #[test]
    fn holomorphic_disc_for_zero_coefficient() {
        let g = DiscGrid::new(16);
        let q = ZeroCoefficient(2);
        let p = [0.1, -0.2, 0.3, 0.05];
        let v = [1.0, 0.5, -0.25, 0.0];
        let s = solve_disc(&q, &p, &v, &g, &SolverOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.residual < 1e-10 && s.fd_residual < 1e-10);
        let pc = linalg::to_complex(&p);
        let vc = linalg::to_complex(&v);
        for a in 0..g.len() {
            let expect = &pc + &vc * g.nodes[a];
            assert!((s.value(a) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn attached_rejects_transverse_direction() {
        let g = DiscGrid::new(8);
        let q = ZeroCoefficient(1);
        let err = solve_attached_disc(&q, &[0.0, 0.0], &[1.0, 0.1], &g, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::PreconditionFailed(_)));
    }

    #[test]
    fn reflection_of_real_linear_disc() {
        let g = DiscGrid::new(16);
        let q = ZeroCoefficient(1);
        let s = solve_attached_disc(&q, &[0.2, 0.0], &[0.5, 0.0], &g, &SolverOptions::default()).unwrap();
        assert_eq!(diameter_offset(&g, &s), 0.0);
        let r = reflect_extend(&q, &s, &g, 1e-12, &SolverOptions::default()).unwrap();
        assert!(r.solution.fd_residual < 1e-10);
        let twice = reflect_extend(&q, &r.solution, &g, 1e-12, &SolverOptions::default()).unwrap();
        assert_eq!(twice.solution.components, r.solution.components);
    }

    #[test]
    fn large_coefficient_does_not_contract() {
        struct Wild;
        impl Coefficient for Wild {
            fn n(&self) -> usize {
                1
            }
            fn q(&self, w: &CVector) -> Result<CMat> {
                Ok(CMat::from_element(1, 1, Complex64::new(0.0, 3.0) * (1.0 + w[0].norm_sqr())))
            }
        }
        let g = DiscGrid::new(12);
        let q = Scaled { inner: Wild, factor: 1.0 };
        let err = solve_disc(&q, &[0.0, 0.0], &[1.0, 0.0], &g, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NoContraction { .. }), "{err:?}");
    }
}
