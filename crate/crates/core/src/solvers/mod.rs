//! The solver family and its instrumentation.

pub mod config;
pub mod descent;
pub mod driver;
pub mod energy;
pub mod steps;
pub mod sweep;
pub mod trace;

pub use config::{Method, SolverConfig};
pub use driver::{initial_guess, solve, solve_from, Reference, SolveOutcome, Termination};
pub use energy::{approximate_residual, energy, quadratic_form, relative_residual, residual, ApproximateResidual};
pub use steps::{greedy_step, nongreedy_step, sd2_step};
pub use sweep::{als_sweep, amen_sweep, dmrg_sweep, Direction};
pub use trace::{ConvergenceTrace, EventKind, StepReport, TraceEvent, TRACE_SCHEMA_VERSION};
