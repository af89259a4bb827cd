//! Cartesian grid on the closed unit disc with exact cell-area weights.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cauchy::FftKernel;

/// Subdivision used for rim cells.
const RIM_SUBDIVISION: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Lattice node `(i h, j h)`.
    Lattice { i: i32, j: i32 },
    /// Boundary node `e^{2πik/M}`.
    Boundary { k: usize },
}

/// Nodes: lattice points `|ζ| <= 1 - h/2` followed by `M = round(2π/h)`
/// equally spaced points on the circle. Each lattice node owns the part of its
/// square cell inside the disc; rim cells whose centre falls outside are split
/// and lumped onto the boundary nodes by angle.
#[derive(Debug)]
pub struct DiscGrid {
    /// `N = 1/h`.
    pub resolution: usize,
    pub h: f64,
    pub nodes: Vec<Complex64>,
    pub kinds: Vec<NodeKind>,
    pub weights: Vec<f64>,
    pub lattice_count: usize,
    pub boundary_count: usize,
    /// `∫_{cell} dA / (z_a - ζ)` for the cell owned by node `a`.
    pub(crate) self_terms: Vec<Complex64>,
    lattice_index: Vec<Option<usize>>,
    nearest_lattice: Vec<usize>,
    mirror: Vec<usize>,
    pub(crate) fft: OnceLock<FftKernel>,
}

/// `∫_0^x √(1-s²) ds`.
fn s_int(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    0.5 * (x * (1.0 - x * x).max(0.0).sqrt() + x.asin())
}

/// Area of `{s² + t² <= 1, s <= a, t <= b}`.
fn corner_area(a: f64, b: f64) -> f64 {
    let a = a.clamp(-1.0, 1.0);
    let quarter = std::f64::consts::FRAC_PI_4;
    if b >= 0.0 {
        let b = b.min(1.0);
        let c = (1.0 - b * b).max(0.0).sqrt();
        let upper = if a <= -c {
            s_int(a) + quarter
        } else if a <= c {
            s_int(-c) + quarter + b * (a + c)
        } else {
            s_int(-c) + quarter + 2.0 * b * c + s_int(a) - s_int(c)
        };
        s_int(a) + quarter + upper
    } else {
        if b <= -1.0 {
            return 0.0;
        }
        let c = (1.0 - b * b).sqrt();
        if a <= -c {
            return 0.0;
        }
        let x = a.min(c);
        s_int(x) - s_int(-c) + b * (x + c)
    }
}

/// Exact area of `[x0, x1] × [y0, y1] ∩ Δ`.
pub fn rect_disc_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let far = |a: f64, b: f64| a * a + b * b;
    let nx = if x0 > 0.0 { x0 } else if x1 < 0.0 { x1 } else { 0.0 };
    let ny = if y0 > 0.0 { y0 } else if y1 < 0.0 { y1 } else { 0.0 };
    if far(nx, ny) >= 1.0 {
        return 0.0;
    }
    let corners_in = [(x0, y0), (x0, y1), (x1, y0), (x1, y1)].iter().all(|&(a, b)| far(a, b) <= 1.0);
    if corners_in {
        return (x1 - x0) * (y1 - y0);
    }
    let v = corner_area(x1, y1) - corner_area(x0, y1) - corner_area(x1, y0) + corner_area(x0, y0);
    v.max(0.0)
}

fn angle_index(z: Complex64, m: usize) -> usize {
    let mut t = z.arg();
    if t < 0.0 {
        t += std::f64::consts::TAU;
    }
    ((t / std::f64::consts::TAU * m as f64).round() as usize) % m
}

impl DiscGrid {
    /// Grid with spacing `h = 1/resolution`.
    pub fn new(resolution: usize) -> Self {
        assert!(resolution >= 2, "disc grid needs resolution >= 2");
        let n = resolution as i32;
        let h = 1.0 / resolution as f64;
        let m = (std::f64::consts::TAU * resolution as f64).round() as usize;
        let side = (2 * n + 1) as usize;
        let inner = 1.0 - 0.5 * h + 1e-12;
        let mut nodes = Vec::new();
        let mut kinds = Vec::new();
        let mut weights = Vec::new();
        let mut self_terms = Vec::new();
        let mut lattice_index = vec![None; side * side];
        let mut boundary_weights = vec![0.0; m];
        let mut boundary_self = vec![Complex64::new(0.0, 0.0); m];
        // lower half built as exact conjugates so that mirroring is exact
        let mut boundary_nodes: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64))
            .collect();
        for k in (m / 2 + 1)..m {
            boundary_nodes[k] = boundary_nodes[m - k].conj();
        }
        if m % 2 == 0 {
            boundary_nodes[m / 2] = Complex64::new(-1.0, 0.0);
        }
        let sub = RIM_SUBDIVISION;
        let sh = h / sub as f64;
        for i in -(n + 1)..=(n + 1) {
            for j in -(n + 1)..=(n + 1) {
                let c = Complex64::new(i as f64 * h, j as f64 * h);
                let (x0, x1, y0, y1) = (c.re - 0.5 * h, c.re + 0.5 * h, c.im - 0.5 * h, c.im + 0.5 * h);
                let area = rect_disc_area(x0, x1, y0, y1);
                if c.norm() <= inner {
                    let full = area >= h * h * (1.0 - 1e-14);
                    let mut st = Complex64::new(0.0, 0.0);
                    if !full {
                        for a in 0..sub {
                            for b in 0..sub {
                                let sx = x0 + a as f64 * sh;
                                let sy = y0 + b as f64 * sh;
                                let outside = sh * sh - rect_disc_area(sx, sx + sh, sy, sy + sh);
                                if outside > 0.0 {
                                    let sc = Complex64::new(sx + 0.5 * sh, sy + 0.5 * sh);
                                    st -= outside / (c - sc);
                                }
                            }
                        }
                    }
                    lattice_index[((i + n) as usize) * side + (j + n) as usize] = Some(nodes.len());
                    nodes.push(c);
                    kinds.push(NodeKind::Lattice { i, j });
                    weights.push(area);
                    self_terms.push(st);
                } else if area > 0.0 {
                    for a in 0..sub {
                        for b in 0..sub {
                            let sx = x0 + a as f64 * sh;
                            let sy = y0 + b as f64 * sh;
                            let inside = rect_disc_area(sx, sx + sh, sy, sy + sh);
                            if inside > 0.0 {
                                let sc = Complex64::new(sx + 0.5 * sh, sy + 0.5 * sh);
                                let k = angle_index(sc, m);
                                boundary_weights[k] += inside;
                                let d = boundary_nodes[k] - sc;
                                if d.norm() > 0.5 * sh {
                                    boundary_self[k] += inside / d;
                                }
                            }
                        }
                    }
                }
            }
        }
        let lattice_count = nodes.len();
        for k in 0..m {
            nodes.push(boundary_nodes[k]);
            kinds.push(NodeKind::Boundary { k });
            weights.push(boundary_weights[k]);
            self_terms.push(boundary_self[k]);
        }
        let lookup = |i: i32, j: i32| -> Option<usize> {
            if i.abs() > n || j.abs() > n {
                return None;
            }
            lattice_index[((i + n) as usize) * side + (j + n) as usize]
        };
        let mut nearest_lattice = Vec::with_capacity(nodes.len());
        let mut mirror = Vec::with_capacity(nodes.len());
        for (a, kind) in kinds.iter().enumerate() {
            match *kind {
                NodeKind::Lattice { i, j } => {
                    nearest_lattice.push(a);
                    mirror.push(lookup(i, -j).expect("lattice is symmetric"));
                }
                NodeKind::Boundary { k } => {
                    let z = nodes[a];
                    let (ci, cj) = ((z.re / h).round() as i32, (z.im / h).round() as i32);
                    let mut best = (f64::INFINITY, 0);
                    for di in -3..=3 {
                        for dj in -3..=3 {
                            if let Some(b) = lookup(ci + di, cj + dj) {
                                let d = (nodes[b] - z).norm();
                                if d < best.0 - 1e-15 {
                                    best = (d, b);
                                }
                            }
                        }
                    }
                    nearest_lattice.push(best.1);
                    mirror.push(lattice_count + (m - k) % m);
                }
            }
        }
        DiscGrid {
            resolution,
            h,
            nodes,
            kinds,
            weights,
            lattice_count,
            boundary_count: m,
            self_terms,
            lattice_index,
            nearest_lattice,
            mirror,
            fft: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lattice(&self, i: i32, j: i32) -> Option<usize> {
        let n = self.resolution as i32;
        if i.abs() > n || j.abs() > n {
            return None;
        }
        let side = (2 * n + 1) as usize;
        self.lattice_index[((i + n) as usize) * side + (j + n) as usize]
    }

    /// Index of `ζ = 0`.
    pub fn origin(&self) -> usize {
        self.lattice(0, 0).expect("origin is a node")
    }

    /// Index of the node at `conj(ζ)`.
    pub fn mirror(&self, a: usize) -> usize {
        self.mirror[a]
    }

    pub fn is_boundary(&self, a: usize) -> bool {
        a >= self.lattice_count
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Finite-difference `(∂_u f, ∂_v f)` at node `a`: centred where both
    /// neighbours exist, one-sided otherwise. Boundary nodes borrow from the
    /// nearest lattice node.
    pub fn partials<T>(&self, f: &[T], a: usize) -> (T, T)
    where
        T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let a = self.nearest_lattice[a];
        let NodeKind::Lattice { i, j } = self.kinds[a] else {
            unreachable!("nearest lattice node is a lattice node")
        };
        let diff = |plus: Option<usize>, minus: Option<usize>| -> T {
            match (plus, minus) {
                (Some(p), Some(m)) => (f[p] - f[m]) * (0.5 / self.h),
                (Some(p), None) => (f[p] - f[a]) * (1.0 / self.h),
                (None, Some(m)) => (f[a] - f[m]) * (1.0 / self.h),
                (None, None) => T::default(),
            }
        };
        (
            diff(self.lattice(i + 1, j), self.lattice(i - 1, j)),
            diff(self.lattice(i, j + 1), self.lattice(i, j - 1)),
        )
    }

    /// `∂f = (∂_u f - i ∂_v f)/2` at every node.
    pub fn dz(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|a| {
                let (fu, fv) = self.partials(f, a);
                (fu - Complex64::i() * fv) * 0.5
            })
            .collect()
    }

    /// `∂̄f = (∂_u f + i ∂_v f)/2` at every node.
    pub fn dzbar(&self, f: &[Complex64]) -> Vec<Complex64> {
        (0..self.len())
            .map(|a| {
                let (fu, fv) = self.partials(f, a);
                (fu + Complex64::i() * fv) * 0.5
            })
            .collect()
    }

    /// `∂_u f` and `∂_v f` of a real grid function.
    pub fn gradient(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (0..self.len()).map(|a| self.partials(f, a)).unzip()
    }
}
