//! Experiment runner for the Laplacian benchmarks.
//!
//! A [`ProblemSpec`] names an operator and a right-hand side; [`run_experiment`]
//! builds them, solves, measures against a dense oracle when the problem is
//! small enough, and writes the convergence trace and a summary to disk.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tt_amen::dense::extreme_eigenvalues;
use tt_amen::problems::{
    dense_oracle_solve, laplacian_spectrum, laplacian_tt, oracle_cap, random_rhs_tt, random_spd_tt,
    DIRECT_ORACLE_LIMIT,
};
use tt_amen::solvers::{solve, ConvergenceTrace, Reference, SolverConfig, Termination};
use tt_amen::{TtMatrix, TtVector};

/// Exit status of a run that hit `max_sweeps` without converging or stagnating.
pub const EXIT_MAX_SWEEPS: i32 = 3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Solver(#[from] tt_amen::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("summary encoding: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid problem: {0}")]
    Problem(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Laplacian,
    RandomSpdTt,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    Ones,
    Random,
    File,
}

/// Operator and right-hand side of one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub d: usize,
    pub n: usize,
    /// Multiply the stencil by `(n + 1)²`.
    pub scaled: bool,
    pub rhs: RhsKind,
    pub rhs_rank: usize,
    pub seed: u64,
    pub operator_path: Option<PathBuf>,
    pub rhs_path: Option<PathBuf>,
}

impl ProblemSpec {
    /// Scaled Dirichlet Laplacian with the all-ones right-hand side.
    pub fn laplacian(d: usize, n: usize) -> Self {
        Self {
            kind: ProblemKind::Laplacian,
            d,
            n,
            scaled: true,
            rhs: RhsKind::Ones,
            rhs_rank: 1,
            seed: 0,
            operator_path: None,
            rhs_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != ProblemKind::File && (self.d == 0 || self.n < 2) {
            return Err(BenchError::Problem(format!("need d >= 1 and n >= 2, got d = {}, n = {}", self.d, self.n)));
        }
        if self.kind == ProblemKind::File && self.operator_path.is_none() {
            return Err(BenchError::Problem("file operator needs a path".into()));
        }
        if self.rhs == RhsKind::File && self.rhs_path.is_none() {
            return Err(BenchError::Problem("file right-hand side needs a path".into()));
        }
        if self.rhs == RhsKind::Random && self.rhs_rank == 0 {
            return Err(BenchError::Problem("random right-hand side needs rank >= 1".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(TtMatrix, TtVector)> {
        self.validate()?;
        let a = match self.kind {
            ProblemKind::Laplacian => laplacian_tt(self.d, self.n, self.scaled)?,
            ProblemKind::RandomSpdTt => random_spd_tt(self.d, self.n, self.seed)?,
            ProblemKind::File => {
                let path = self.operator_path.as_deref().expect("validated");
                TtMatrix::load(path).map_err(|e| located(path, e))?
            }
        };
        let modes = a.col_modes();
        let y = match self.rhs {
            RhsKind::Ones => TtVector::ones(&modes)?,
            RhsKind::Random if self.kind != ProblemKind::File => {
                random_rhs_tt(self.d, self.n, self.rhs_rank, self.seed.wrapping_add(1))?
            }
            RhsKind::Random => {
                let ranks = tt_amen::tt::feasible_ranks(&modes, self.rhs_rank);
                let y = TtVector::random(&modes, &ranks, self.seed.wrapping_add(1))?;
                y.scale(1.0 / y.norm())
            }
            RhsKind::File => {
                let path = self.rhs_path.as_deref().expect("validated");
                TtVector::load(path).map_err(|e| located(path, e))?
            }
        };
        a.check_square_against(&y)?;
        Ok((a, y))
    }

    fn unknowns(&self, a: &TtMatrix) -> Option<usize> {
        a.col_modes().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
    }
}

fn located(path: &Path, e: tt_amen::Error) -> BenchError {
    BenchError::Problem(format!("{}: {e}", path.display()))
}

/// When to compute the dense reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Only when the problem fits under the oracle cap.
    #[default]
    Auto,
    /// Always; a problem above the cap is an error.
    On,
    Off,
}

#[derive(Debug, Clone, Default)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub problem: ProblemSpec,
    pub config: SolverConfig,
    pub termination: Termination,
    pub sweeps: usize,
    pub final_ranks: Vec<usize>,
    pub final_residual: f64,
    /// `‖x* − x‖_A / ‖x*‖_A` against the dense oracle.
    pub oracle_error: Option<f64>,
    #[serde(skip)]
    pub trace: ConvergenceTrace,
}

impl ExperimentResult {
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::Converged | Termination::Stagnated => 0,
            Termination::MaxSweeps => EXIT_MAX_SWEEPS,
        }
    }
}

fn reference(spec: &ProblemSpec, a: &TtMatrix, y: &TtVector, mode: OracleMode) -> Result<Option<Reference>> {
    let size = spec.unknowns(a);
    let fits = size.is_some_and(|s| s <= oracle_cap());
    let run = match mode {
        OracleMode::Off => false,
        OracleMode::Auto => fits,
        OracleMode::On => true,
    };
    if !run {
        return Ok(None);
    }
    let x_star = dense_oracle_solve(a, y)?;
    let mut r = Reference::from_dense(y, x_star)?;
    if spec.kind == ProblemKind::Laplacian {
        r = r.with_spectrum(laplacian_spectrum(spec.d, spec.n, spec.scaled)?);
    } else if size.is_some_and(|s| s <= DIRECT_ORACLE_LIMIT) {
        r = r.with_spectrum(extreme_eigenvalues(&a.to_dense()?)?);
    }
    Ok(Some(r))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builds the problem, solves it and writes the requested outputs.
pub fn run_experiment(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    oracle: OracleMode,
    out: &OutputPaths,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (a, y) = spec.build()?;
    let reference = reference(spec, &a, &y, oracle)?;
    let outcome = solve(&a, &y, cfg, reference.as_ref())?;
    let oracle_error = match &reference {
        Some(r) if r.a_norm() > 0.0 => Some(r.error_of(&a, &y, &outcome.x)? / r.a_norm()),
        Some(_) => Some(0.0),
        None => None,
    };
    let result = ExperimentResult {
        problem: spec.clone(),
        config: cfg.clone(),
        termination: outcome.termination,
        sweeps: outcome.sweeps,
        final_ranks: outcome.x.ranks(),
        final_residual: outcome.residual,
        oracle_error,
        trace: outcome.trace,
    };
    if let Some(path) = &out.trace {
        let mut w = create(path)?;
        result.trace.write_jsonl(&mut w)?;
        w.flush().map_err(io_at(path))?;
    }
    if let Some(path) = &out.summary {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &result)?;
        writeln!(w).and_then(|_| w.flush()).map_err(io_at(path))?;
    }
    Ok(result)
}
