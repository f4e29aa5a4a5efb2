//! Frames, environments and the reduced systems they induce.

pub mod env;
pub mod frame;
pub mod galerkin;
pub mod local;

pub use env::{EnvironmentCache, PairEnvironments};
pub use frame::{frame_dense, frame_two_block_dense, superblock};
pub use galerkin::{galerkin_correction, Enrichment};
pub use local::{solve_local, LocalMethod, LocalSolution, LocalSolveOptions, LocalSystem};
