//! Sampled domains in R^{2n}.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed region with a finite sample set used for grid scans.
pub trait Region: Send + Sync {
    fn dim(&self) -> usize;
    fn samples(&self) -> Vec<Vec<f64>>;
    fn contains(&self, x: &[f64]) -> bool;
    /// Typical distance between neighbouring samples.
    fn spacing(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { radius: f64 },
    Box { half_widths: Vec<f64> },
}

/// A ball or axis box with a tensor sampling grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub center: Vec<f64>,
    pub shape: Shape,
    /// Upper bound of `|x|` over the closure.
    pub bound: f64,
    /// Grid counts per axis.
    pub resolution: Vec<usize>,
}

/// Default grid count per axis for a given ambient dimension.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0..=2 => 41,
        3..=4 => 11,
        5..=6 => 7,
        _ => 5,
    }
}

impl DomainSpec {
    pub fn new(center: Vec<f64>, shape: Shape, resolution: Vec<usize>) -> Result<Self> {
        let dim = center.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Dimension(format!("domain dimension {dim} is not even and positive")));
        }
        if resolution.len() != dim || resolution.iter().any(|&r| r < 2) {
            return Err(Error::Dimension("resolution must list at least 2 points per axis".into()));
        }
        let cnorm = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        let bound = match &shape {
            Shape::Ball { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::NonPositive(*radius));
                }
                cnorm + radius
            }
            Shape::Box { half_widths } => {
                if half_widths.len() != dim || half_widths.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Dimension("box half widths must be positive, one per axis".into()));
                }
                center
                    .iter()
                    .zip(half_widths)
                    .map(|(c, w)| (c.abs() + w).powi(2))
                    .sum::<f64>()
                    .sqrt()
            }
        };
        Ok(DomainSpec {
            center,
            shape,
            bound,
            resolution,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let res = default_resolution(center.len());
        let dim = center.len();
        Self::new(center, Shape::Ball { radius }, vec![res; dim])
    }

    pub fn ball_with_resolution(center: Vec<f64>, radius: f64, res: usize) -> Result<Self> {
        let dim = center.len();
        Self::new(center, Shape::Ball { radius }, vec![res; dim])
    }

    /// The unit ball of R^{2n}.
    pub fn unit_ball(n: usize) -> Self {
        Self::ball(vec![0.0; 2 * n], 1.0).expect("unit ball is valid")
    }

    /// Same domain, every axis resolution multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut d = self.clone();
        d.resolution = self.resolution.iter().map(|r| (r - 1) * factor + 1).collect();
        d
    }

    fn half_widths(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Ball { radius } => vec![*radius; self.center.len()],
            Shape::Box { half_widths } => half_widths.clone(),
        }
    }

    fn grid_points(&self) -> Vec<Vec<f64>> {
        let dim = self.center.len();
        let hw = self.half_widths();
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                let r = self.resolution[a];
                (0..r)
                    .map(|i| self.center[a] - hw[a] + 2.0 * hw[a] * i as f64 / (r - 1) as f64)
                    .collect()
            })
            .collect();
        let total: usize = self.resolution.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            out.push((0..dim).map(|a| axes[a][idx[a]]).collect());
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < self.resolution[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

impl Region for DomainSpec {
    fn dim(&self) -> usize {
        self.center.len()
    }

    /// Tensor grid points inside the closure. For a ball, grid points lying
    /// within one cell diagonal outside the sphere are projected onto it so the
    /// boundary is represented.
    fn samples(&self) -> Vec<Vec<f64>> {
        let pts = self.grid_points();
        match &self.shape {
            Shape::Box { .. } => pts,
            Shape::Ball { radius } => {
                let reach = self.spacing() * (self.dim() as f64).sqrt();
                pts.into_iter()
                    .filter_map(|p| {
                        let d: f64 = p
                            .iter()
                            .zip(&self.center)
                            .map(|(a, c)| (a - c).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        if d <= *radius {
                            Some(p)
                        } else if d <= radius + reach {
                            Some(
                                p.iter()
                                    .zip(&self.center)
                                    .map(|(a, c)| c + (a - c) * radius / d)
                                    .collect(),
                            )
                        } else {
                            None
                        }
                    })
                    .collect()
            }
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { radius } => {
                let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
                d2.sqrt() <= radius * (1.0 + 1e-12)
            }
            Shape::Box { half_widths } => x
                .iter()
                .zip(&self.center)
                .zip(half_widths)
                .all(|((a, c), w)| (a - c).abs() <= w * (1.0 + 1e-12)),
        }
    }

    fn spacing(&self) -> f64 {
        self.half_widths()
            .iter()
            .zip(&self.resolution)
            .map(|(w, r)| 2.0 * w / (*r - 1) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// A region with a ball around `center` removed.
pub struct Excluding<'a> {
    pub base: &'a dyn Region,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Excluding<'_> {
    fn outside(&self, x: &[f64]) -> bool {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
        d2.sqrt() >= self.radius
    }
}

impl Region for Excluding<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn samples(&self) -> Vec<Vec<f64>> {
        self.base.samples().into_iter().filter(|p| self.outside(p)).collect()
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.base.contains(x) && self.outside(x)
    }
    fn spacing(&self) -> f64 {
        self.base.spacing()
    }
}

/// An explicit sample list with a membership predicate.
#[derive(Clone)]
pub struct SampledRegion {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub member: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    pub spacing: f64,
}

impl Region for SampledRegion {
    fn dim(&self) -> usize {
        self.dim
    }
    fn samples(&self) -> Vec<Vec<f64>> {
        self.points.clone()
    }
    fn contains(&self, x: &[f64]) -> bool {
        (self.member)(x)
    }
    fn spacing(&self) -> f64 {
        self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_bound_and_samples() {
        let d = DomainSpec::ball_with_resolution(vec![0.5, 0.0], 0.5, 11).unwrap();
        assert!((d.bound - 1.0).abs() < 1e-15);
        let s = d.samples();
        assert!(!s.is_empty());
        for p in &s {
            assert!(d.contains(p));
            assert!(p.iter().map(|x| x * x).sum::<f64>().sqrt() <= d.bound + 1e-12);
        }
    }

    #[test]
    fn resolution_below_two_rejected() {
        assert!(DomainSpec::new(vec![0.0, 0.0], Shape::Ball { radius: 1.0 }, vec![1, 5]).is_err());
    }

    #[test]
    fn excluding_removes_center() {
        let d = DomainSpec::ball_with_resolution(vec![0.0, 0.0], 1.0, 11).unwrap();
        let e = Excluding {
            base: &d,
            center: vec![0.0, 0.0],
            radius: 1e-4,
        };
        assert_eq!(e.samples().len() + 1, d.samples().len());
    }
}
