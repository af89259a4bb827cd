//! Universal constants derived from the cutoff `θ`, and their manifest.
//!
//! Everything here follows from the cutoff constant `k` of the default blend
//! (see [`k_constant`]). The manifest carries a SHA-256 of its canonical JSON so
//! reports can name the exact constants they used.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::levi::cutoff::{k_constant, Cutoff, DefaultBlend};
use crate::levi::psh::epsilon_m;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub theta: String,
    pub k: f64,
    /// `(1/4) √(2/(9k))`
    pub c_prime: f64,
    /// `2 e² √2 / c'`
    pub c_double_prime: f64,
    /// Hardy–Littlewood factor `1 + 2/(1 - 2^{-1/2})` turning a derivative bound
    /// `|f'(ζ)| <= M (1-|ζ|)^{-1/2}` into a half-Hölder bound.
    pub c_hardy_littlewood: f64,
    /// `c'' √π c_HL`
    pub c_tilde_effective: f64,
    /// `ε_m(1)`
    pub epsilon_1: f64,
    /// `ε_m(2)`
    pub epsilon_2: f64,
}

impl Constants {
    pub fn from_cutoff(theta: &dyn Cutoff) -> Result<Self> {
        let k = k_constant(theta)?;
        let c_prime = 0.25 * (2.0 / (9.0 * k)).sqrt();
        let e2 = std::f64::consts::E.powi(2);
        let c_double_prime = 2.0 * e2 * std::f64::consts::SQRT_2 / c_prime;
        let c_hardy_littlewood = 1.0 + 2.0 / (1.0 - std::f64::consts::FRAC_1_SQRT_2);
        Ok(Constants {
            theta: theta.name().to_string(),
            k,
            c_prime,
            c_double_prime,
            c_hardy_littlewood,
            c_tilde_effective: c_double_prime * std::f64::consts::PI.sqrt() * c_hardy_littlewood,
            epsilon_1: epsilon_m(1.0)?,
            epsilon_2: epsilon_m(2.0)?,
        })
    }

    /// Constants of the default blend, computed once per process.
    pub fn builtin() -> &'static Constants {
        static BUILTIN: OnceLock<Constants> = OnceLock::new();
        BUILTIN.get_or_init(|| Constants::from_cutoff(&DefaultBlend).expect("default blend is admissible"))
    }

    /// `√(2/(9k e^{2m}))`
    pub fn c_m(&self, m: f64) -> f64 {
        (2.0 / (9.0 * self.k * (2.0 * m).exp())).sqrt()
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("constants serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            constants: self.clone(),
            sha256: self.hash(),
        }
    }

    /// Loads a manifest and checks its hash.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: Manifest = serde_json::from_str(&text)?;
        let actual = m.constants.hash();
        if actual != m.sha256 {
            return Err(Error::PreconditionFailed(format!(
                "constants manifest {} hash mismatch: recorded {}, computed {actual}",
                path.display(),
                m.sha256
            )));
        }
        Ok(m.constants)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub constants: Constants,
    pub sha256: String,
}
