//! Convergence instrumentation and its JSON-lines form.
//!
//! A trace interleaves `micro` events, one per local update, with one
//! `sweep` event closing every outer iteration. Energies are
//! `J(x) = (x, A x) − 2 (x, y)`. When the exact solution is known,
//! `err_A² = J − J*` with `J* = −(x*, y)`, and `omega` is the error
//! contraction of the event (the microstep factor `ν_k` for micro events,
//! the outer-iteration rate for sweep events).

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::driver::Reference;
use crate::tt::vector::TtVector;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Micro,
    Sweep,
}

/// Diagnostics of one descent step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Step length `(z̃, z) / (z̃, A z̃)`.
    pub alpha: Option<f64>,
    /// Relative size of the discarded residual part, `‖z − z̃‖ / ‖z̃‖`.
    pub eps: Option<f64>,
    /// Rate of the exact steepest descent step from the same iterate.
    pub omega_z: Option<f64>,
    /// Perturbed steepest descent bound evaluated at `omega_z` and `eps`.
    pub bound: Option<f64>,
    /// The residual vanished and the iterate was returned unchanged.
    #[serde(default)]
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub schema: u32,
    pub kind: EventKind,
    pub sweep: usize,
    pub microstep: usize,
    pub k: Option<usize>,
    #[serde(rename = "J")]
    pub energy: f64,
    /// Energy before the local update.
    #[serde(rename = "J_in")]
    pub energy_in: Option<f64>,
    /// Energy after the local solve and before truncation.
    #[serde(rename = "J_pre")]
    pub energy_pre: Option<f64>,
    /// Relative residual `‖y − A x‖ / ‖y‖`; sweep events only.
    pub res_l2: Option<f64>,
    #[serde(rename = "err_A")]
    pub err_a: Option<f64>,
    #[serde(rename = "err_A_rel")]
    pub err_a_rel: Option<f64>,
    pub ranks: Vec<usize>,
    pub t_wall_s: f64,
    pub omega: Option<f64>,
    /// Extreme eigenvalues of the assembled local matrix.
    pub local_spectrum: Option<[f64; 2]>,
    pub step: Option<StepReport>,
}

/// Ordered list of events of one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub events: Vec<TraceEvent>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn sweeps(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Sweep)
    }

    pub fn micros(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Micro)
    }

    pub fn last_sweep(&self) -> Option<&TraceEvent> {
        self.sweeps().last()
    }

    /// Sweep event of outer iteration `sweep`.
    pub fn at_sweep(&self, sweep: usize) -> Option<&TraceEvent> {
        self.sweeps().find(|e| e.sweep == sweep)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n").map_err(|e| Error::Input(format!("trace write: {e}")))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(String::from_utf8(buf).expect("json is utf-8"))
    }

    /// Parses a trace, rejecting unknown schema versions and out-of-order events.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let e: TraceEvent = serde_json::from_str(line)?;
            if e.schema != TRACE_SCHEMA_VERSION {
                return Err(Error::Input(format!("line {}: unsupported trace schema {}", i + 1, e.schema)));
            }
            events.push(e);
        }
        let trace = Self { events };
        trace.check_order()?;
        Ok(trace)
    }

    /// Events must be ordered by `(sweep, microstep)` and in time.
    pub fn check_order(&self) -> Result<()> {
        for w in self.events.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            if (q.sweep, q.microstep) < (p.sweep, p.microstep) || q.t_wall_s < p.t_wall_s {
                return Err(Error::Input(format!(
                    "trace out of order at sweep {} microstep {}",
                    q.sweep, q.microstep
                )));
            }
        }
        Ok(())
    }
}

/// Event recorder shared by the sweeps of one solve.
pub(crate) struct Tracer<'r> {
    start: Instant,
    reference: Option<&'r Reference>,
    record_spectrum: bool,
    pub(crate) sweep: usize,
    micro: usize,
    /// Added to every local energy, for sweeps that optimize a correction to a fixed vector.
    pub(crate) shift: f64,
    pub(crate) events: Vec<TraceEvent>,
}

impl<'r> Tracer<'r> {
    pub(crate) fn new(reference: Option<&'r Reference>, record_spectrum: bool) -> Self {
        Self {
            start: Instant::now(),
            reference,
            record_spectrum,
            sweep: 0,
            micro: 0,
            shift: 0.0,
            events: Vec::new(),
        }
    }

    pub(crate) fn record_spectrum(&self) -> bool {
        self.record_spectrum
    }

    pub(crate) fn begin_sweep(&mut self, sweep: usize) {
        self.sweep = sweep;
        self.micro = 0;
    }

    fn err(&self, j: f64) -> Option<f64> {
        self.reference.map(|r| r.error_from_energy(j))
    }

    fn rel(&self, err: Option<f64>) -> Option<f64> {
        match (err, self.reference) {
            (Some(e), Some(r)) if r.a_norm() > 0.0 => Some(e / r.a_norm()),
            _ => None,
        }
    }

    pub(crate) fn micro(
        &mut self,
        k: usize,
        x: &TtVector,
        j_in: f64,
        j_pre: f64,
        j_post: f64,
        local_spectrum: Option<[f64; 2]>,
    ) {
        self.micro += 1;
        let (j_in, j_pre, j) = (j_in + self.shift, j_pre + self.shift, j_post + self.shift);
        let err = self.err(j);
        let omega = match (self.err(j_in), err) {
            (Some(b), Some(a)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let event = TraceEvent {
            schema: TRACE_SCHEMA_VERSION,
            kind: EventKind::Micro,
            sweep: self.sweep,
            microstep: self.micro,
            k: Some(k),
            energy: j,
            energy_in: Some(j_in),
            energy_pre: Some(j_pre),
            res_l2: None,
            err_a: err,
            err_a_rel: self.rel(err),
            ranks: x.ranks(),
            t_wall_s: self.start.elapsed().as_secs_f64(),
            omega,
            local_spectrum,
            step: None,
        };
        self.events.push(event);
    }

    /// Closes the current outer iteration. `err` overrides the energy-based error.
    pub(crate) fn sweep_event(
        &mut self,
        ranks: Vec<usize>,
        energy: f64,
        res_l2: f64,
        err: Option<f64>,
        step: Option<StepReport>,
    ) -> &TraceEvent {
        let err = err.or_else(|| self.err(energy));
        let prev = self
            .events
            .iter()
            .rev()
            .find(|e| e.kind == EventKind::Sweep)
            .and_then(|e| e.err_a);
        let omega = match (prev, err) {
            (Some(b), Some(a)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        let event = TraceEvent {
            schema: TRACE_SCHEMA_VERSION,
            kind: EventKind::Sweep,
            sweep: self.sweep,
            microstep: self.micro,
            k: None,
            energy,
            energy_in: None,
            energy_pre: None,
            res_l2: Some(res_l2),
            err_a: err,
            err_a_rel: self.rel(err),
            ranks,
            t_wall_s: self.start.elapsed().as_secs_f64(),
            omega,
            local_spectrum: None,
            step,
        };
        self.events.push(event);
        self.events.last().expect("just pushed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let x = TtVector::random(&[2, 3], &[1, 2, 1], 1).unwrap();
        let mut tr = Tracer::new(None, false);
        tr.begin_sweep(1);
        tr.micro(1, &x, 1.0 / 3.0, -0.1, -0.1, Some([0.5, 2.0]));
        tr.sweep_event(x.ranks(), -0.1, 1e-3, Some(0.25), Some(StepReport::default()));
        let trace = ConvergenceTrace { events: tr.events };
        let text = trace.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"J\":") && text.contains("\"err_A\":0.25"));
        assert_eq!(ConvergenceTrace::from_jsonl(&text).unwrap(), trace);
    }

    #[test]
    fn rejects_foreign_schema_and_disorder() {
        let x = TtVector::ones(&[2]).unwrap();
        let mut tr = Tracer::new(None, false);
        tr.begin_sweep(2);
        tr.sweep_event(x.ranks(), 0.0, 0.0, None, None);
        tr.begin_sweep(1);
        tr.sweep_event(x.ranks(), 0.0, 0.0, None, None);
        let trace = ConvergenceTrace { events: tr.events };
        assert!(trace.check_order().is_err());
        let text = trace.to_jsonl().unwrap().replace("\"schema\":1", "\"schema\":9");
        assert!(ConvergenceTrace::from_jsonl(&text).is_err());
    }
}
