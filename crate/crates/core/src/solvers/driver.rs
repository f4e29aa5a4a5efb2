//! Outer iteration loop and stopping rules.

use serde::{Deserialize, Serialize};

use crate::contract::{dot, norm2};
use crate::dense::SpectrumBounds;
use crate::error::{Error, Result};
use crate::problems::{oracle_cap, DIRECT_ORACLE_LIMIT};
use crate::solvers::config::{Method, SolverConfig};
use crate::solvers::descent::{a_norm, dense_sd_step, perturbed_sd_bound};
use crate::solvers::energy::{approximate_residual, energy, quadratic_form, relative_residual};
use crate::solvers::steps::{greedy_traced, nongreedy_traced, sd2_traced};
use crate::solvers::sweep::{als_traced, amen_traced, dmrg_traced, Direction};
use crate::solvers::trace::{ConvergenceTrace, StepReport, Tracer};
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::{feasible_ranks, TtVector};

/// Known solution used to report errors and rates.
#[derive(Debug, Clone)]
pub struct Reference {
    dense: Option<Vec<f64>>,
    energy: f64,
    a_norm: f64,
    spectrum: Option<SpectrumBounds>,
}

impl Reference {
    /// From a dense exact solution `x*` of `A x = y`.
    pub fn from_dense(y: &TtVector, x_star: Vec<f64>) -> Result<Self> {
        let yd = y.to_dense_with_cap(x_star.len().max(1))?;
        if yd.len() != x_star.len() {
            return Err(Error::Shape(format!(
                "reference has {} entries, right-hand side {}",
                x_star.len(),
                yd.len()
            )));
        }
        let xy = dot(&x_star, &yd);
        Ok(Self {
            dense: Some(x_star),
            energy: -xy,
            a_norm: xy.max(0.0).sqrt(),
            spectrum: None,
        })
    }

    /// From an accurate TT solution; errors are then measured against it.
    pub fn from_tt(a: &TtMatrix, y: &TtVector, x_ref: &TtVector) -> Result<Self> {
        let j = energy(a, y, x_ref)?;
        Ok(Self {
            dense: None,
            energy: j,
            a_norm: (-j).max(0.0).sqrt(),
            spectrum: None,
        })
    }

    pub fn with_spectrum(mut self, spectrum: SpectrumBounds) -> Self {
        self.spectrum = Some(spectrum);
        self
    }

    /// `J* = −‖x*‖²_A`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn dense(&self) -> Option<&[f64]> {
        self.dense.as_deref()
    }

    pub fn spectrum(&self) -> Option<SpectrumBounds> {
        self.spectrum
    }

    /// `sqrt(max(J − J*, 0))`.
    pub fn error_from_energy(&self, j: f64) -> f64 {
        (j - self.energy).max(0.0).sqrt()
    }

    /// `‖x* − x‖_A`, computed densely when the exact solution is stored.
    pub fn error_of(&self, a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<f64> {
        match &self.dense {
            Some(xs) => {
                let xd = x.to_dense_with_cap(xs.len())?;
                let e: Vec<f64> = xs.iter().zip(&xd).map(|(p, q)| p - q).collect();
                let ae = a.apply_dense(&e)?;
                Ok(dot(&e, &ae).max(0.0).sqrt())
            }
            None => Ok(self.error_from_energy(energy(a, y, x)?)),
        }
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Stagnated,
    MaxSweeps,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: TtVector,
    pub trace: ConvergenceTrace,
    pub termination: Termination,
    pub sweeps: usize,
    pub residual: f64,
}

/// Random initial guess of unit norm.
pub fn initial_guess(modes: &[usize], cfg: &SolverConfig) -> Result<TtVector> {
    let x = TtVector::random(modes, &feasible_ranks(modes, cfg.initial_rank()), cfg.seed)?;
    let nrm = x.norm();
    Ok(x.orthogonalize(modes.len() - 1).scale(1.0 / nrm))
}

struct Stagnation {
    tol: f64,
    hits: usize,
    last: Option<f64>,
}

impl Stagnation {
    fn new(cfg: &SolverConfig) -> Self {
        Self {
            tol: (cfg.truncation_tol * cfg.truncation_tol).max(1e-15),
            hits: 0,
            last: None,
        }
    }

    /// True once `|ΔJ| ≤ tol |J|` held for two consecutive iterations.
    fn update(&mut self, j: f64) -> bool {
        if let Some(p) = self.last {
            if (j - p).abs() <= self.tol * j.abs() {
                self.hits += 1;
            } else {
                self.hits = 0;
            }
        }
        self.last = Some(j);
        self.hits >= 2
    }
}

/// Runs the configured method from a seeded random start.
pub fn solve(a: &TtMatrix, y: &TtVector, cfg: &SolverConfig, reference: Option<&Reference>) -> Result<SolveOutcome> {
    let x0 = initial_guess(&y.mode_sizes(), cfg)?;
    solve_from(a, y, x0, cfg, reference)
}

/// Runs the configured method from `x0`.
pub fn solve_from(
    a: &TtMatrix,
    y: &TtVector,
    x0: TtVector,
    cfg: &SolverConfig,
    reference: Option<&Reference>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    a.check_square_against(y)?;
    a.check_square_against(&x0)?;
    let mut tr = Tracer::new(reference, cfg.record_local_spectrum);
    let ynorm = y.norm();
    if ynorm == 0.0 {
        let x = TtVector::zeros(&y.mode_sizes())?;
        tr.begin_sweep(1);
        tr.sweep_event(x.ranks(), 0.0, 0.0, Some(0.0), None);
        return Ok(SolveOutcome {
            x,
            trace: ConvergenceTrace { events: tr.events },
            termination: Termination::Converged,
            sweeps: 1,
            residual: 0.0,
        });
    }
    if cfg.method == Method::DenseSd {
        return solve_dense(a, y, x0, cfg, tr, reference);
    }
    let err = |x: &TtVector| -> Result<Option<f64>> { reference.map(|r| r.error_of(a, y, x)).transpose() };
    let mut x = x0;
    let mut res = relative_residual(a, y, &x)?;
    let j0 = energy(a, y, &x)?;
    let e0 = err(&x)?;
    tr.sweep_event(x.ranks(), j0, res, e0, None);
    let mut stagnation = Stagnation::new(cfg);
    stagnation.update(j0);
    let mut dir = Direction::Backward;
    let mut termination = Termination::MaxSweeps;
    let mut sweeps = 0;
    for sweep in 1..=cfg.max_sweeps {
        tr.begin_sweep(sweep);
        sweeps = sweep;
        let mut report = None;
        x = match cfg.method {
            Method::Als => als_traced(&mut tr, a, y, &x, dir, cfg, usize::MAX)?,
            Method::Dmrg => {
                let mut c = cfg.clone();
                c.rank_cap = cfg.rank_cap.min(x.max_rank() + cfg.rank_growth());
                dmrg_traced(&mut tr, a, y, &x, dir, &c)?
            }
            Method::Amen => {
                let z = approximate_residual(a, y, &x, cfg.kick_rank, cfg.residual_tol)?;
                report = Some(StepReport {
                    eps: Some(z.eps),
                    ..StepReport::default()
                });
                amen_traced(&mut tr, a, y, &x, &z.z, dir, cfg)?
            }
            Method::GreedySd | Method::NongreedySd | Method::Sd2 => {
                // keep t + z̃ within the cap
                let rho = cfg.kick_rank.min(cfg.rank_cap.saturating_sub(1)).max(1);
                let budget = cfg.rank_cap.saturating_sub(rho).max(1);
                if x.max_rank() > budget {
                    x = x.round(cfg.truncation_tol, Some(budget));
                }
                let z = approximate_residual(a, y, &x, rho, cfg.residual_tol)?;
                let (next, mut rep) = match cfg.method {
                    Method::GreedySd => greedy_traced(&mut tr, a, y, &x, &z.z, cfg)?,
                    Method::Sd2 => sd2_traced(&mut tr, a, y, &x, &z.z, cfg)?,
                    _ => nongreedy_traced(&mut tr, a, y, &x, &z.z, cfg)?,
                };
                rep.eps = Some(z.eps);
                if let Some(r) = reference {
                    rep.omega_z = exact_sd_rate(a, y, &x, &z.exact, r)?;
                    if let (Some(w), Some(s)) = (rep.omega_z, r.spectrum()) {
                        rep.bound = Some(perturbed_sd_bound(w, z.eps, s.cond()));
                    }
                }
                report = Some(rep);
                next.round(cfg.truncation_tol, Some(cfg.rank_cap))
            }
            Method::DenseSd => unreachable!("handled above"),
        };
        if matches!(cfg.method, Method::Als | Method::Dmrg | Method::Amen) {
            dir = dir.reversed();
        }
        res = relative_residual(a, y, &x)?;
        let j = energy(a, y, &x)?;
        let e = err(&x)?;
        tr.sweep_event(x.ranks(), j, res, e, report);
        if res <= cfg.stop_tol {
            termination = Termination::Converged;
            break;
        }
        if stagnation.update(j) && cfg.stop_on_stagnation {
            termination = Termination::Stagnated;
            break;
        }
    }
    Ok(SolveOutcome {
        x,
        trace: ConvergenceTrace { events: tr.events },
        termination,
        sweeps,
        residual: res,
    })
}

/// Rate of the exact scalar steepest descent step from `t`:
/// `ω_z² = 1 − (z, z)² / ((z, A z) ‖c‖²_A)`.
fn exact_sd_rate(a: &TtMatrix, y: &TtVector, t: &TtVector, z: &TtVector, r: &Reference) -> Result<Option<f64>> {
    let cc = r.error_from_energy(energy(a, y, t)?).powi(2);
    let zz = z.dot(z)?;
    let zaz = quadratic_form(a, z, z)?;
    if !(cc > 0.0 && zaz > 0.0) {
        return Ok(None);
    }
    Ok(Some((1.0 - zz * zz / (zaz * cc)).clamp(0.0, 1.0).sqrt()))
}

fn solve_dense(
    a: &TtMatrix,
    y: &TtVector,
    x0: TtVector,
    cfg: &SolverConfig,
    mut tr: Tracer<'_>,
    reference: Option<&Reference>,
) -> Result<SolveOutcome> {
    let cap = oracle_cap().min(DIRECT_ORACLE_LIMIT);
    let modes = y.mode_sizes();
    let size: usize = modes.iter().product();
    if size > cap {
        return Err(Error::CapExceeded { requested: size, cap });
    }
    let ad = a.to_dense_with_cap(cap.saturating_mul(cap))?;
    let yd = y.to_dense_with_cap(cap)?;
    let ynorm = norm2(&yd);
    let mut x = x0.to_dense_with_cap(cap)?;
    let measure = |x: &[f64]| -> Result<(f64, f64, Option<f64>, Vec<usize>)> {
        let ax = a.apply_dense(x)?;
        let j = dot(x, &ax) - 2.0 * dot(x, &yd);
        let r: Vec<f64> = yd.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let err = match reference.and_then(|r| r.dense()) {
            Some(xs) => {
                let e: Vec<f64> = xs.iter().zip(x).map(|(p, q)| p - q).collect();
                Some(a_norm(&ad, &e))
            }
            None => reference.map(|r| r.error_from_energy(j)),
        };
        let ranks = TtVector::from_dense(x, &modes, cfg.truncation_tol, Some(cfg.rank_cap))?.ranks();
        Ok((j, norm2(&r) / ynorm, err, ranks))
    };
    let (j, mut res, e, ranks) = measure(&x)?;
    tr.sweep_event(ranks, j, res, e, None);
    let mut stagnation = Stagnation::new(cfg);
    stagnation.update(j);
    let mut termination = Termination::MaxSweeps;
    let mut sweeps = 0;
    for sweep in 1..=cfg.max_sweeps {
        tr.begin_sweep(sweep);
        sweeps = sweep;
        let (next, rep) = dense_sd_step(&ad, &yd, &x)?;
        x = next;
        let (j, r, e, ranks) = measure(&x)?;
        res = r;
        tr.sweep_event(ranks, j, res, e, Some(rep));
        if res <= cfg.stop_tol {
            termination = Termination::Converged;
            break;
        }
        if stagnation.update(j) && cfg.stop_on_stagnation {
            termination = Termination::Stagnated;
            break;
        }
    }
    let x = TtVector::from_dense(&x, &modes, cfg.truncation_tol, Some(cfg.rank_cap))?;
    Ok(SolveOutcome {
        x,
        trace: ConvergenceTrace { events: tr.events },
        termination,
        sweeps,
        residual: res,
    })
}
