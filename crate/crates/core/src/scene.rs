//! Scene files: one JSON document describing a structure, scalar fields, a
//! domain and the optional inputs of the chart, barrier, bound and study runs.
//!
//! ```json
//! {
//!   "structure": {"repr": "standard", "n": 1},
//!   "scalars": {"u": {"kind": "squared_norm", "center": [0, 0]}},
//!   "domain": {"kind": "ball", "radius": 1.0}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acs::{StructureField, StructureSpec};
use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::levi::cutoff::DefaultBlend;
use crate::levi::psh::PshBuilderParams;
use crate::levi::{ScalarField, ScalarSpec};
use crate::region::{default_resolution, DomainSpec, Shape};

/// Domain as written in a scene. `center` defaults to the origin and
/// `resolution` to the per-dimension default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

impl DomainDesc {
    pub fn unit_ball() -> Self {
        DomainDesc {
            center: None,
            shape: Shape::Ball { radius: 1.0 },
            resolution: None,
        }
    }

    pub fn build(&self, dim: usize) -> Result<DomainSpec> {
        let center = self.center.clone().unwrap_or_else(|| vec![0.0; dim]);
        if center.len() != dim {
            return Err(Error::Scene(format!("domain center has {} coordinates, expected {dim}", center.len())));
        }
        let res = self.resolution.unwrap_or_else(|| default_resolution(dim));
        DomainSpec::new(center, self.shape.clone(), vec![res; dim])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    /// Point of `E = {y = 0}` the chart is centred at.
    pub anchor: Vec<f64>,
    pub epsilon: f64,
    /// Per-axis sample count of the C¹ check; 0 picks a default.
    #[serde(default)]
    pub resolution: usize,
}

/// Parameters of the logarithmic barrier; `b` defaults to the cutoff's `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PshSpec {
    pub pole: Vec<f64>,
    pub r: f64,
    pub a: f64,
    #[serde(default)]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Basepoint,
    #[default]
    Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KobayashiSpec {
    /// Name of the negative psh function in `scalars`.
    pub scalar: String,
    #[serde(default)]
    pub mode: BoundMode,
    /// Also run the disc search for an upper bound.
    #[serde(default)]
    pub upper: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub structure: StructureSpec,
    #[serde(default)]
    pub scalars: BTreeMap<String, ScalarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psh: Option<PshSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kobayashi: Option<KobayashiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    /// Path of a constants manifest, relative to the scene file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<PathBuf>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        let scene: SceneFile = serde_json::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        scene.check()?;
        Ok(scene)
    }

    /// Reads and checks a scene; a relative `constants` path is resolved
    /// against the scene's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Scene(format!("{}: {e}", path.display())))?;
        let mut scene = Self::parse(&text)?;
        if let Some(c) = &scene.constants {
            if c.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                scene.constants = Some(base.join(c));
            }
        }
        Ok(scene)
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    /// Checks dimensions and names across sections.
    pub fn check(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Scene("structure dimension n must be positive".into()));
        }
        let dim = 2 * n;
        self.domain()?;
        for (name, spec) in &self.scalars {
            if let Some(d) = scalar_dim(spec) {
                if d != dim {
                    return Err(Error::Scene(format!("scalar {name:?} lives in R^{d}, structure in R^{dim}")));
                }
            }
        }
        if let Some(c) = &self.chart {
            if c.anchor.len() != dim {
                return Err(Error::Scene(format!("chart anchor needs {dim} coordinates")));
            }
            if !(c.epsilon > 0.0) {
                return Err(Error::Scene("chart epsilon must be positive".into()));
            }
        }
        if let Some(p) = &self.psh {
            if p.pole.len() != dim {
                return Err(Error::Scene(format!("psh pole needs {dim} coordinates")));
            }
        }
        if let Some(k) = &self.kobayashi {
            if !self.scalars.contains_key(&k.scalar) {
                return Err(Error::Scene(format!("kobayashi refers to unknown scalar {:?}", k.scalar)));
            }
        }
        if let Some(e) = &self.experiment {
            if e.n != n {
                return Err(Error::Scene(format!("experiment n = {} but structure n = {n}", e.n)));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<DomainSpec> {
        self.domain
            .clone()
            .unwrap_or_else(DomainDesc::unit_ball)
            .build(2 * self.n())
    }

    pub fn structure(&self) -> Result<StructureField> {
        self.structure.build(&self.domain()?)
    }

    /// The named scalar, or the only one when `name` is `None`.
    pub fn scalar(&self, name: Option<&str>) -> Result<ScalarField> {
        let spec = match name {
            Some(k) => self
                .scalars
                .get(k)
                .ok_or_else(|| Error::Scene(format!("no scalar named {k:?}")))?,
            None => {
                if self.scalars.len() != 1 {
                    return Err(Error::Scene(format!(
                        "scene has {} scalars; name one explicitly",
                        self.scalars.len()
                    )));
                }
                self.scalars.values().next().expect("one entry")
            }
        };
        Ok(spec.build())
    }

    pub fn psh_params(&self, constants: &Constants) -> Result<PshBuilderParams> {
        let p = self.psh.as_ref().ok_or_else(|| Error::Scene("scene has no psh section".into()))?;
        Ok(PshBuilderParams {
            p: p.pole.clone(),
            r: p.r,
            a: p.a,
            b: p.b.unwrap_or(constants.k),
            theta: Arc::new(DefaultBlend),
        })
    }

    /// Constants from `override_path`, else the scene's manifest, else the built-in set.
    pub fn constants(&self, override_path: Option<&Path>) -> Result<Constants> {
        match override_path.or(self.constants.as_deref()) {
            Some(p) => Constants::load(p),
            None => Ok(Constants::builtin().clone()),
        }
    }
}

fn scalar_dim(spec: &ScalarSpec) -> Option<usize> {
    match spec {
        ScalarSpec::Poly { dim, .. } => Some(*dim),
        ScalarSpec::SquaredNorm { center } | ScalarSpec::Norm { center } | ScalarSpec::LogNorm { center } => {
            Some(center.len())
        }
        ScalarSpec::SumYSquared { n } => Some(2 * n),
        ScalarSpec::Combination { terms, .. } => terms.iter().find_map(|(_, s)| scalar_dim(s)),
    }
}
