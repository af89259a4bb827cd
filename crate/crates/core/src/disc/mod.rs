//! Pseudo-holomorphic discs: grid, Cauchy–Green transform, solvers and
//! Hölder norms.

pub mod cauchy;
pub mod grid;
pub mod holder;
pub mod solver;

pub use cauchy::{cauchy_p, cauchy_p_direct, cauchy_t};
pub use grid::DiscGrid;
pub use holder::{holder_norm, HolderReport};
pub use solver::{reflect_extend, solve_attached_disc, solve_disc, DiscSolution, Reflection, SolverOptions};
