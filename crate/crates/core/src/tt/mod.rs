//! Tensor-train vectors and operators.

pub mod io;
pub mod matrix;
pub mod round;
pub mod vector;

pub use matrix::{OpCore, TtMatrix};
pub use round::{RoundReport, ToleranceSplit};
pub use vector::{feasible_ranks, Core3, Ortho, OrthoState, TtVector, DEFAULT_DENSE_CAP};
