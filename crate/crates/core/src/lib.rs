//! Tensor-train linear algebra and alternating solvers for symmetric positive
//! definite systems `A x = y`, where `A` is a TT operator and `y` a TT vector.
//!
//! The crate is organised bottom-up: dense kernels, the TT data model,
//! frames and environments, then the solver family and problem generators.

mod contract;
pub mod dense;
pub mod error;
pub mod problems;
pub mod projections;
pub mod solvers;
pub mod tt;

pub use error::{Error, Result};
pub use tt::{Core3, OpCore, TtMatrix, TtVector};
