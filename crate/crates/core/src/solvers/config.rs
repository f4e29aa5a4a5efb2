use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::LocalSolveOptions;

/// Solver family member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Als,
    Dmrg,
    GreedySd,
    NongreedySd,
    Sd2,
    Amen,
    DenseSd,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Als,
        Method::Dmrg,
        Method::GreedySd,
        Method::NongreedySd,
        Method::Sd2,
        Method::Amen,
        Method::DenseSd,
    ];

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Als => "als",
            Method::Dmrg => "dmrg",
            Method::GreedySd => "greedy",
            Method::NongreedySd => "nongreedy",
            Method::Sd2 => "sd2",
            Method::Amen => "amen",
            Method::DenseSd => "dense-sd",
        }
    }

    /// Methods whose outer iteration starts from an approximate residual.
    pub fn uses_residual(self) -> bool {
        matches!(self, Method::GreedySd | Method::NongreedySd | Method::Sd2 | Method::Amen)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "als" => Method::Als,
            "dmrg" => Method::Dmrg,
            "greedy" | "greedy_sd" => Method::GreedySd,
            "nongreedy" | "nongreedy_sd" | "non_greedy" => Method::NongreedySd,
            "sd2" => Method::Sd2,
            "amen" => Method::Amen,
            "dense_sd" | "densesd" => Method::DenseSd,
            _ => return Err(Error::Input(format!("unknown method {s:?}"))),
        })
    }
}

/// Settings of one solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Rank `ρ` of the approximate residual.
    pub kick_rank: usize,
    /// Relative truncation tolerance `ε_x`.
    pub truncation_tol: f64,
    /// Relative tolerance `ε_z` of the residual rounding.
    pub residual_tol: f64,
    pub max_sweeps: usize,
    pub rank_cap: usize,
    /// Relative residual at which the solve reports convergence.
    pub stop_tol: f64,
    pub seed: u64,
    /// Rank of the random initial guess; `max(ρ, 1)` when unset.
    pub initial_rank: Option<usize>,
    /// Largest rank increase a DMRG sweep may make; `4ρ + initial rank` when unset.
    pub rank_growth: Option<usize>,
    /// Stop when the energy stagnates; otherwise run until convergence or `max_sweeps`.
    pub stop_on_stagnation: bool,
    /// Recompute the residual after every AMEn microstep instead of once per sweep.
    pub amen_refresh_per_microstep: bool,
    /// Log the extreme eigenvalues of each assembled local matrix.
    pub record_local_spectrum: bool,
    /// Local solver settings; CG tolerance `1e-2 ε_x` when unset.
    #[serde(skip)]
    pub local: Option<LocalSolveOptions>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::NongreedySd,
            kick_rank: 5,
            truncation_tol: 1e-4,
            residual_tol: 1e-4,
            max_sweeps: 20,
            rank_cap: 64,
            stop_tol: 1e-10,
            seed: 0,
            initial_rank: None,
            rank_growth: None,
            stop_on_stagnation: true,
            amen_refresh_per_microstep: false,
            record_local_spectrum: false,
            local: None,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Input(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("truncation_tol", self.truncation_tol)?;
        unit("residual_tol", self.residual_tol)?;
        unit("stop_tol", self.stop_tol)?;
        if self.max_sweeps == 0 {
            return Err(Error::Input("max_sweeps must be at least 1".into()));
        }
        if self.rank_cap == 0 {
            return Err(Error::Input("rank_cap must be at least 1".into()));
        }
        if self.initial_rank == Some(0) {
            return Err(Error::Input("initial_rank must be at least 1".into()));
        }
        if self.kick_rank == 0 && matches!(self.method, Method::GreedySd | Method::NongreedySd | Method::Sd2) {
            return Err(Error::Input(format!("method {} needs kick_rank >= 1", self.method)));
        }
        Ok(())
    }

    pub fn initial_rank(&self) -> usize {
        self.initial_rank.unwrap_or(self.kick_rank.max(1)).min(self.rank_cap)
    }

    pub fn rank_growth(&self) -> usize {
        self.rank_growth.unwrap_or(4 * self.kick_rank + self.initial_rank()).max(1)
    }

    pub fn local_options(&self) -> LocalSolveOptions {
        self.local.clone().unwrap_or_else(|| LocalSolveOptions {
            rel_tol: (1e-2 * self.truncation_tol).max(1e-14),
            ..LocalSolveOptions::default()
        })
    }

    /// Per-unfolding absolute budget for a tensor of norm `norm` with `d` cores.
    pub(crate) fn split_tol(&self, norm: f64, d: usize) -> f64 {
        self.truncation_tol * norm / ((d.max(2) - 1) as f64).sqrt()
    }
}
