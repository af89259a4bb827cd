//! Finite-difference `C^{k+β}` norms of grid functions.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::DiscGrid;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Cap on the number of pairs closer than `2h` that enter the seminorm.
pub const SHORT_PAIR_CAP: usize = 1_000_000;
const MIN_NODES: usize = 10;

/// Compact subsets of the closed disc used as `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscRegion {
    /// `|ζ - center| <= radius`.
    Ball { center: [f64; 2], radius: f64 },
    /// `|ζ| <= radius`, `Im ζ >= 0`.
    UpperHalf { radius: f64 },
    /// `|ζ - center| <= radius`, `|ζ| <= 1`, `Im ζ >= 0`, for a real centre.
    HalfBall { center: f64, radius: f64 },
}

impl DiscRegion {
    pub fn contains(&self, z: Complex64) -> bool {
        match *self {
            DiscRegion::Ball { center, radius } => (z - Complex64::new(center[0], center[1])).norm() <= radius + 1e-12,
            DiscRegion::UpperHalf { radius } => z.norm() <= radius + 1e-12 && z.im >= 0.0,
            DiscRegion::HalfBall { center, radius } => {
                (z - center).norm() <= radius + 1e-12 && z.norm() <= 1.0 + 1e-12 && z.im >= 0.0
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderReport {
    pub beta: f64,
    pub order: usize,
    /// `[D^k g]_β` over the sampled pairs.
    pub seminorm: f64,
    /// `Σ_{j<=k} sup |D^j g|`.
    pub sup_norm: f64,
    pub total: f64,
    pub pair_count: usize,
    pub nodes: usize,
}

/// `C^{k+β}` estimate of `g` (given by complex components) over the nodes in `region`.
/// Pairs at distance `>= 2h` are all used; closer pairs are used up to
/// [`SHORT_PAIR_CAP`], beyond which a seeded sample is drawn.
pub fn holder_norm(
    grid: &DiscGrid,
    components: &[Vec<Complex64>],
    region: &DiscRegion,
    beta: f64,
    order: usize,
    seed: u64,
    exec: Execution,
) -> Result<HolderReport> {
    let members: Vec<usize> = (0..grid.len()).filter(|&a| region.contains(grid.nodes[a])).collect();
    if members.len() < MIN_NODES {
        return Err(Error::RegionTooSmall(members.len()));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::PreconditionFailed(format!("Hölder exponent {beta} outside (0, 1]")));
    }
    let mut fields: Vec<Vec<f64>> = components
        .iter()
        .flat_map(|c| [c.iter().map(|z| z.re).collect(), c.iter().map(|z| z.im).collect()])
        .collect();
    let sup_of = |fields: &[Vec<f64>]| -> f64 {
        members
            .iter()
            .map(|&a| fields.iter().map(|f| f[a] * f[a]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let mut sup_norm = sup_of(&fields);
    for _ in 0..order {
        fields = fields
            .iter()
            .flat_map(|f| {
                let (u, v) = grid.gradient(f);
                [u, v]
            })
            .collect();
        sup_norm += sup_of(&fields);
    }
    let gap = |a: usize, b: usize| -> f64 {
        let d = fields.iter().map(|f| (f[a] - f[b]).powi(2)).sum::<f64>().sqrt();
        d / (grid.nodes[a] - grid.nodes[b]).norm().powf(beta)
    };
    let near = 2.0 * grid.h;
    let per_row = par::map_indexed(exec, members.len(), |i| {
        let a = members[i];
        let mut best: f64 = 0.0;
        let mut long = 0usize;
        let mut short = Vec::new();
        for &b in &members[i + 1..] {
            if (grid.nodes[a] - grid.nodes[b]).norm() >= near {
                best = best.max(gap(a, b));
                long += 1;
            } else {
                short.push((a, b));
            }
        }
        (best, long, short)
    });
    let mut seminorm: f64 = 0.0;
    let mut pair_count = 0usize;
    let mut short = Vec::new();
    for (best, long, s) in per_row {
        seminorm = seminorm.max(best);
        pair_count += long;
        short.extend(s);
    }
    let chosen: Vec<(usize, usize)> = if short.len() > SHORT_PAIR_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, short.len(), SHORT_PAIR_CAP)
            .into_iter()
            .map(|i| short[i])
            .collect()
    } else {
        short
    };
    for &(a, b) in &chosen {
        seminorm = seminorm.max(gap(a, b));
    }
    pair_count += chosen.len();
    Ok(HolderReport {
        beta,
        order,
        seminorm,
        sup_norm,
        total: sup_norm + seminorm,
        pair_count,
        nodes: members.len(),
    })
}
