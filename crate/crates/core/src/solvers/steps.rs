//! Descent steps along an approximate residual `z̃`.
//!
//! All three start from the scalar steepest descent point `t + α z̃` with
//! `α = (z̃, z) / (z̃, A z̃)`. The greedy step then runs a backward ALS sweep
//! over the correction only; the 2D subspace step stops after its first
//! microstep; the non-greedy step sweeps over the full sum `t + α z̃`.

use crate::error::Result;
use crate::solvers::config::SolverConfig;
use crate::solvers::energy::{energy, quadratic_form, residual};
use crate::solvers::sweep::{als_traced, Direction};
use crate::solvers::trace::{StepReport, TraceEvent, Tracer};
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::TtVector;

/// `(α, z)` with `z = y − A t` exact, or `None` when `z̃` carries no energy.
fn sd_length(a: &TtMatrix, y: &TtVector, t: &TtVector, zt: &TtVector) -> Result<(Option<f64>, TtVector)> {
    let z = residual(a, y, t)?;
    let zaz = quadratic_form(a, zt, zt)?;
    if !(zaz > 0.0) {
        return Ok((None, z));
    }
    Ok((Some(zt.dot(&z)? / zaz), z))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Variant {
    Greedy,
    Subspace,
}

/// Greedy step `x = t + v`, `v` from an ALS sweep over the cores of `z̃`.
pub fn greedy_step(
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let (x, _) = correction_traced(&mut tr, a, y, t, zt, cfg, Variant::Greedy)?;
    Ok((x, tr.events))
}

/// Subspace step `x = t + Z v` with `Z = Z^{≤d−1} ⊗ I` the frame of the last core of `z̃`.
pub fn sd2_step(
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let (x, _) = correction_traced(&mut tr, a, y, t, zt, cfg, Variant::Subspace)?;
    Ok((x, tr.events))
}

/// Non-greedy step: a backward ALS sweep on `t + α z̃`.
pub fn nongreedy_step(
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let (x, _) = nongreedy_traced(&mut tr, a, y, t, zt, cfg)?;
    Ok((x, tr.events))
}

pub(crate) fn greedy_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, StepReport)> {
    correction_traced(tr, a, y, t, zt, cfg, Variant::Greedy)
}

pub(crate) fn sd2_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, StepReport)> {
    correction_traced(tr, a, y, t, zt, cfg, Variant::Subspace)
}

fn correction_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
    variant: Variant,
) -> Result<(TtVector, StepReport)> {
    let (alpha, z) = sd_length(a, y, t, zt)?;
    let Some(alpha) = alpha else {
        return Ok((
            t.clone(),
            StepReport {
                converged: true,
                ..StepReport::default()
            },
        ));
    };
    let v0 = zt.scale(alpha);
    let limit = match variant {
        Variant::Greedy => usize::MAX,
        Variant::Subspace => 1,
    };
    tr.shift = energy(a, y, t)?;
    let v = als_traced(tr, a, &z, &v0, Direction::Backward, cfg, limit);
    tr.shift = 0.0;
    let x = t.add(&v?)?;
    Ok((
        x,
        StepReport {
            alpha: Some(alpha),
            ..StepReport::default()
        },
    ))
}

pub(crate) fn nongreedy_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    zt: &TtVector,
    cfg: &SolverConfig,
) -> Result<(TtVector, StepReport)> {
    let (alpha, _) = sd_length(a, y, t, zt)?;
    let xbar = t.add(&zt.scale(alpha.unwrap_or(0.0)))?;
    let x = als_traced(tr, a, y, &xbar, Direction::Backward, cfg, usize::MAX)?;
    Ok((
        x,
        StepReport {
            alpha,
            converged: alpha.is_none(),
            ..StepReport::default()
        },
    ))
}
