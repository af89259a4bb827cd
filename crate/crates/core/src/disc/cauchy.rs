//! The Cauchy–Green transform `Pf(z) = (1/π) ∫_Δ f(ζ)/(z - ζ) dA(ζ)` on a
//! [`DiscGrid`], with `∂̄P = id` and `T = ∂∘P`.
//!
//! The lattice-to-lattice part is a discrete convolution done by FFT; sums
//! involving boundary nodes are direct. [`cauchy_p_direct`] is the plain
//! `O(nodes²)` quadrature and serves as a reference.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::{DiscGrid, NodeKind};
use crate::par::{self, Execution};

pub(crate) struct FftKernel {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
}

impl std::fmt::Debug for FftKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftKernel").field("size", &self.size).finish()
    }
}

fn transpose(data: &mut [Complex64], size: usize) {
    for r in 0..size {
        for c in (r + 1)..size {
            data.swap(r * size + c, c * size + r);
        }
    }
}

fn fft_rows(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], size: usize, exec: Execution) {
    #[cfg(feature = "parallel")]
    {
        if exec.is_parallel() {
            use rayon::prelude::*;
            data.par_chunks_mut(size).for_each(|row| fft.process(row));
            return;
        }
    }
    let _ = (exec, size);
    fft.process(data);
}

fn fft_2d(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], size: usize, exec: Execution) {
    fft_rows(fft, data, size, exec);
    transpose(data, size);
    fft_rows(fft, data, size, exec);
    transpose(data, size);
}

impl FftKernel {
    fn new(grid: &DiscGrid) -> Self {
        let n = grid.resolution;
        let size = (4 * n + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); size * size];
        let reach = 2 * n as i64;
        for di in -reach..=reach {
            for dj in -reach..=reach {
                if di == 0 && dj == 0 {
                    continue;
                }
                let r = di.rem_euclid(size as i64) as usize;
                let c = dj.rem_euclid(size as i64) as usize;
                spectrum[r * size + c] = Complex64::new(1.0, 0.0) / Complex64::new(di as f64 * grid.h, dj as f64 * grid.h);
            }
        }
        fft_2d(&forward, &mut spectrum, size, Execution::Sequential);
        FftKernel {
            size,
            forward,
            inverse,
            spectrum,
        }
    }

    /// `Σ_{b lattice, b≠a} w_b f_b / (z_a - ζ_b)` for every lattice node `a`.
    fn lattice_sums(&self, grid: &DiscGrid, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let n = grid.resolution as i32;
        let size = self.size;
        let mut data = vec![Complex64::new(0.0, 0.0); size * size];
        for a in 0..grid.lattice_count {
            if let NodeKind::Lattice { i, j } = grid.kinds[a] {
                data[(i + n) as usize * size + (j + n) as usize] = f[a] * grid.weights[a];
            }
        }
        fft_2d(&self.forward, &mut data, size, exec);
        for (d, k) in data.iter_mut().zip(&self.spectrum) {
            *d *= k;
        }
        fft_2d(&self.inverse, &mut data, size, exec);
        let scale = 1.0 / (size * size) as f64;
        (0..grid.lattice_count)
            .map(|a| match grid.kinds[a] {
                NodeKind::Lattice { i, j } => data[(i + n) as usize * size + (j + n) as usize] * scale,
                NodeKind::Boundary { .. } => unreachable!(),
            })
            .collect()
    }
}

fn direct_sum(grid: &DiscGrid, f: &[Complex64], a: usize, sources: std::ops::Range<usize>) -> Complex64 {
    let z = grid.nodes[a];
    let mut s = Complex64::new(0.0, 0.0);
    for b in sources {
        if b != a {
            s += f[b] * grid.weights[b] / (z - grid.nodes[b]);
        }
    }
    s
}

/// `Pf` by FFT convolution on the lattice plus direct boundary sums.
pub fn cauchy_p(grid: &DiscGrid, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
    assert_eq!(f.len(), grid.len());
    if f.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return vec![Complex64::new(0.0, 0.0); grid.len()];
    }
    let kernel = grid.fft.get_or_init(|| FftKernel::new(grid));
    let lattice = kernel.lattice_sums(grid, f, exec);
    let nl = grid.lattice_count;
    let total = grid.len();
    par::map_indexed(exec, total, |a| {
        let s = if a < nl {
            lattice[a] + direct_sum(grid, f, a, nl..total)
        } else {
            direct_sum(grid, f, a, 0..total)
        };
        (s + f[a] * grid.self_terms[a]) / PI
    })
}

/// `Pf` by direct quadrature over all node pairs.
pub fn cauchy_p_direct(grid: &DiscGrid, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
    assert_eq!(f.len(), grid.len());
    let total = grid.len();
    par::map_indexed(exec, total, |a| (direct_sum(grid, f, a, 0..total) + f[a] * grid.self_terms[a]) / PI)
}

/// `Tf = ∂(Pf)` by finite differences.
pub fn cauchy_t(grid: &DiscGrid, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
    grid.dz(&cauchy_p(grid, f, exec))
}

/// Max of `|∂̄(Pg) - g|` over nodes with `|ζ| <= radius`.
pub fn dbar_p_error(grid: &DiscGrid, g: &[Complex64], radius: f64, exec: Execution) -> f64 {
    let pg = cauchy_p(grid, g, exec);
    let d = grid.dzbar(&pg);
    grid.nodes
        .iter()
        .zip(d.iter().zip(g))
        .filter(|(z, _)| z.norm() <= radius)
        .map(|(_, (a, b))| (a - b).norm())
        .fold(0.0, f64::max)
}
