//! Numerical toolkit for almost complex geometry on domains of R^{2n}.
//!
//! The crate covers structures and their norms ([`acs`]), Levi forms and
//! plurisubharmonic constructions ([`levi`]), tamed charts and the
//! J-holomorphy coefficient ([`charts`]), pseudo-holomorphic disc solving
//! ([`disc`]), Kobayashi–Royden bounds ([`kobayashi`]) and inequality checks
//! on solved discs ([`harness`]).

pub mod acs;
pub mod charts;
pub mod constants;
pub mod disc;
pub mod error;
pub mod harness;
pub mod kobayashi;
pub mod levi;
pub mod linalg;
pub mod par;
pub mod poly;
pub mod region;
pub mod scene;

pub use error::{Error, Result};
