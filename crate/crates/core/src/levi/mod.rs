//! Levi forms, λ₀ scans and plurisubharmonic constructions.

pub mod cutoff;
pub mod form;
pub mod psh;
pub mod scalar;

pub use cutoff::{k_constant, Cutoff, DefaultBlend};
pub use form::{lambda0, levi_matrix, levi_perturbation_bound, Lambda0Options, Lambda0Result, LeviEvaluation};
pub use psh::{defining_rho, epsilon_m, minimal_curvature, psh_deflate, psh_log_builder, PshBuilderParams};
pub use scalar::{ScalarField, ScalarSpec};
