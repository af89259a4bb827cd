//! Checks of the regularity inequalities on solved discs, and the amplitude
//! sweep study.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub mod bounds;
pub mod sector;
pub mod study;

pub use bounds::{bootstrap_check, differential_bound_check, half_holder_check, HalfHolder};
pub use sector::{sector_mean_check, ArcData};
pub use study::{theorem_scaling_study, ExperimentConfig, StudyReport};

/// Relative slack used when a record is created without an explicit one.
pub const DEFAULT_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub constants: BTreeMap<String, f64>,
    pub passed: bool,
    pub context: String,
}

impl InequalityRecord {
    /// `lhs <= rhs` up to `slack · |rhs|`.
    pub fn new(name: &str, lhs: f64, rhs: f64, slack: f64, context: String) -> Self {
        let margin = rhs - lhs;
        let passed = if rhs == f64::INFINITY {
            !lhs.is_nan()
        } else {
            margin >= -slack * rhs.abs() && !margin.is_nan()
        };
        InequalityRecord {
            name: name.to_string(),
            lhs,
            rhs,
            margin,
            constants: BTreeMap::new(),
            passed,
            context,
        }
    }

    pub fn with_constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.to_string(), value);
        self
    }
}
