//! One-site (ALS), two-site (DMRG) and enriched one-site (AMEn) sweeps.
//!
//! Every sweep starts by moving the orthogonality pivot to the first core
//! of its order, builds the environments once and then advances them one
//! bond per microstep. The sweep ends with the pivot on the last core visited.

use serde::{Deserialize, Serialize};

use crate::contract::{matmul, norm2};
use crate::dense::{lq_factor, qr_factor, rank_for_tolerance, sorted_svd, symmetric_eigen_range, DenseMatrix};
use crate::error::Result;
use crate::projections::{solve_local, superblock, EnvironmentCache, LocalSystem, PairEnvironments};
use crate::solvers::config::SolverConfig;
use crate::solvers::energy::approximate_residual;
use crate::solvers::trace::{TraceEvent, Tracer};
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::{Core3, TtVector};

/// Local systems larger than this are not assembled for spectrum logging.
const SPECTRUM_LIMIT: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Cores `d - 1, ..., 0`.
    Backward,
    /// Cores `0, ..., d - 1`.
    Forward,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Backward => Direction::Forward,
            Direction::Forward => Direction::Backward,
        }
    }

    fn start(self, d: usize) -> usize {
        match self {
            Direction::Backward => d - 1,
            Direction::Forward => 0,
        }
    }

    fn order(self, len: usize) -> Vec<usize> {
        match self {
            Direction::Backward => (0..len).rev().collect(),
            Direction::Forward => (0..len).collect(),
        }
    }
}

pub(crate) struct LocalStep {
    pub v: Vec<f64>,
    pub j_in: f64,
    pub j_pre: f64,
    pub spectrum: Option<[f64; 2]>,
}

pub(crate) fn solve_step(tr: &Tracer<'_>, sys: &LocalSystem<'_>, warm: &[f64], cfg: &SolverConfig) -> Result<LocalStep> {
    let spectrum = if tr.record_spectrum() && sys.len() <= SPECTRUM_LIMIT {
        let (lo, hi) = symmetric_eigen_range(&sys.to_dense())?;
        Some([lo, hi])
    } else {
        None
    };
    let j_in = sys.energy(warm);
    let sol = solve_local(sys, Some(warm), &cfg.local_options())?;
    let j_pre = sys.energy(&sol.v);
    Ok(LocalStep {
        v: sol.v,
        j_in,
        j_pre,
        spectrum,
    })
}

/// Truncated SVD factors of `m`: `(U, σ, V)` with at least one and at most `cap` triplets.
fn split(m: &DenseMatrix, abs_tol: f64, cap: usize) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (u, s, v) = sorted_svd(m)?;
    let rank = rank_for_tolerance(&s, abs_tol).max(1).min(cap.max(1));
    Ok((u.columns(0, rank).into_owned(), s[..rank].to_vec(), v.columns(0, rank).into_owned()))
}

fn scale_columns(mut u: DenseMatrix, s: &[f64]) -> DenseMatrix {
    for (j, sv) in s.iter().enumerate() {
        u.column_mut(j).scale_mut(*sv);
    }
    u
}

/// One ALS sweep: each core in turn is replaced by the minimizer of the
/// energy over that core with all others fixed.
pub fn als_sweep(
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let x = als_traced(&mut tr, a, y, x, dir, cfg, usize::MAX)?;
    Ok((x, tr.events))
}

/// ALS sweep limited to the first `max_micro` microsteps.
pub(crate) fn als_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
    max_micro: usize,
) -> Result<TtVector> {
    a.check_square_against(x)?;
    let d = x.d();
    let mut x = x.orthogonalize(dir.start(d));
    let mut env = EnvironmentCache::build(a, y, &x)?;
    let mut last = dir.start(d);
    for k in dir.order(d).into_iter().take(max_micro) {
        let sys = env.local_system(a, y, &x, k)?;
        let (r0, n, r1) = sys.dims();
        let step = solve_step(tr, &sys, x.core(k).data(), cfg)?;
        x.set_core(k, Core3::from_parts(r0, n, r1, step.v));
        match dir {
            Direction::Backward if k > 0 => {
                x.right_orthogonalize_core(k);
                env.update_right(a, y, &x, k)?;
                last = k - 1;
            }
            Direction::Forward if k + 1 < d => {
                x.left_orthogonalize_core(k);
                env.update_left(a, y, &x, k)?;
                last = k + 1;
            }
            _ => last = k,
        }
        tr.micro(k, &x, step.j_in, step.j_pre, step.j_pre, step.spectrum);
    }
    x.mark_pivot(last);
    Ok(x)
}

/// One DMRG sweep over the superblocks `(k, k + 1)`, splitting each solved
/// superblock with tolerance `ε_x` and cap `rank_cap`.
pub fn dmrg_sweep(
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let x = dmrg_traced(&mut tr, a, y, x, dir, cfg)?;
    Ok((x, tr.events))
}

pub(crate) fn dmrg_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<TtVector> {
    a.check_square_against(x)?;
    let d = x.d();
    if d == 1 {
        return als_traced(tr, a, y, x, dir, cfg, usize::MAX);
    }
    let mut x = x.orthogonalize(dir.start(d));
    let mut env = EnvironmentCache::build(a, y, &x)?;
    for k in dir.order(d - 1) {
        let sys = env.local_system_two_block(a, y, &x, k)?;
        let (r0, _, r2) = sys.dims();
        let (n1, n2) = (sys.modes()[0], sys.modes()[1]);
        let step = solve_step(tr, &sys, &superblock(&x, k), cfg)?;
        let m = DenseMatrix::from_column_slice(r0 * n1, n2 * r2, &step.v);
        let (u, s, v) = split(&m, cfg.split_tol(norm2(&step.v), d), cfg.rank_cap)?;
        let r = s.len();
        let (left, right) = match dir {
            Direction::Backward => (scale_columns(u, &s), v.transpose()),
            Direction::Forward => (u, scale_columns(v, &s).transpose()),
        };
        let w = &left * &right;
        let j_post = sys.energy(w.as_slice());
        x.set_core(k, Core3::from_parts(r0, n1, r, left.as_slice().to_vec()));
        x.set_core(k + 1, Core3::from_parts(r, n2, r2, right.as_slice().to_vec()));
        match dir {
            Direction::Backward => env.update_right(a, y, &x, k + 1)?,
            Direction::Forward => env.update_left(a, y, &x, k)?,
        }
        tr.micro(k, &x, step.j_in, step.j_pre, j_post, step.spectrum);
    }
    x.mark_pivot(match dir {
        Direction::Backward => 0,
        Direction::Forward => d - 1,
    });
    Ok(x)
}

/// One AMEn sweep: after solving core `k`, its truncated factor is
/// augmented by `S = (X^{<k})ᵀ Z^{<k} Z_k` (forward) or `Z_k Z^{>k} (X^{>k})ᵀ`
/// (backward) from the approximate residual `z`, re-orthogonalized, and the
/// next core is then optimized in the enlarged frame. With `ρ = 0` this is an ALS sweep.
pub fn amen_sweep(
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    z: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<(TtVector, Vec<TraceEvent>)> {
    let mut tr = Tracer::new(None, cfg.record_local_spectrum);
    let x = amen_traced(&mut tr, a, y, x, z, dir, cfg)?;
    Ok((x, tr.events))
}

pub(crate) fn amen_traced(
    tr: &mut Tracer<'_>,
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    z: &TtVector,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<TtVector> {
    a.check_square_against(x)?;
    let d = x.d();
    if cfg.kick_rank == 0 || d == 1 {
        return als_traced(tr, a, y, x, dir, cfg, usize::MAX);
    }
    let cap = cfg.rank_cap.saturating_sub(cfg.kick_rank).max(1);
    let mut x = x.orthogonalize(dir.start(d));
    let mut z = z.clone();
    let mut env = EnvironmentCache::build(a, y, &x)?;
    let mut zenv = PairEnvironments::build(&x, &z)?;
    for k in dir.order(d) {
        let sys = env.local_system(a, y, &x, k)?;
        let (r0, n, r1) = sys.dims();
        let step = solve_step(tr, &sys, x.core(k).data(), cfg)?;
        let tol = cfg.split_tol(norm2(&step.v), d);
        let last = match dir {
            Direction::Forward => k + 1 == d,
            Direction::Backward => k == 0,
        };
        if last {
            x.set_core(k, Core3::from_parts(r0, n, r1, step.v));
            tr.micro(k, &x, step.j_in, step.j_pre, step.j_pre, step.spectrum);
            break;
        }
        let j_post;
        match dir {
            Direction::Forward => {
                let m = DenseMatrix::from_column_slice(r0 * n, r1, &step.v);
                let (u, s, v) = split(&m, tol, cap)?;
                let r = s.len();
                let coupling = scale_columns(v, &s).transpose();
                j_post = sys.energy((&u * &coupling).as_slice());
                let zc = z.core(k);
                let kick = matmul(r0, zc.r_left(), n * zc.r_right(), zenv.left(&x, k)?, false, zc.data(), false);
                let mut cat = DenseMatrix::zeros(r0 * n, r + zc.r_right());
                cat.columns_mut(0, r).copy_from(&u);
                cat.columns_mut(r, zc.r_right())
                    .copy_from_slice(&kick);
                let (q, rf) = qr_factor(&cat)?;
                let rq = q.ncols();
                let carry = rf.columns(0, r) * coupling;
                let next = x.core(k + 1);
                let merged = matmul(rq, r1, next.n() * next.r_right(), carry.as_slice(), false, next.data(), false);
                let next = Core3::from_parts(rq, next.n(), next.r_right(), merged);
                x.set_core(k, Core3::from_parts(r0, n, rq, q.as_slice().to_vec()));
                x.set_core(k + 1, next);
                env.update_left(a, y, &x, k)?;
                zenv.update_left(&x, &z, k)?;
            }
            Direction::Backward => {
                let m = DenseMatrix::from_column_slice(r0, n * r1, &step.v);
                let (u, s, v) = split(&m, tol, cap)?;
                let r = s.len();
                let coupling = scale_columns(u, &s);
                let vt = v.transpose();
                j_post = sys.energy((&coupling * &vt).as_slice());
                let zc = z.core(k);
                let kick = matmul(
                    zc.r_left() * n,
                    zc.r_right(),
                    r1,
                    zc.data(),
                    false,
                    zenv.right(&x, k + 1)?,
                    false,
                );
                let rz = zc.r_left();
                let mut cat = DenseMatrix::zeros(r + rz, n * r1);
                cat.rows_mut(0, r).copy_from(&vt);
                cat.rows_mut(r, rz).copy_from(&DenseMatrix::from_column_slice(rz, n * r1, &kick));
                let (lf, q) = lq_factor(&cat)?;
                let rq = q.nrows();
                let carry = coupling * lf.rows(0, r);
                let prev = x.core(k - 1);
                let merged = matmul(
                    prev.r_left() * prev.n(),
                    r0,
                    rq,
                    prev.data(),
                    false,
                    carry.as_slice(),
                    false,
                );
                let prev = Core3::from_parts(prev.r_left(), prev.n(), rq, merged);
                x.set_core(k, Core3::from_parts(rq, n, r1, q.as_slice().to_vec()));
                x.set_core(k - 1, prev);
                env.update_right(a, y, &x, k)?;
                zenv.update_right(&x, &z, k)?;
            }
        }
        tr.micro(k, &x, step.j_in, step.j_pre, j_post, step.spectrum);
        if cfg.amen_refresh_per_microstep {
            z = approximate_residual(a, y, &x, cfg.kick_rank, cfg.residual_tol)?.z;
            zenv = PairEnvironments::build(&x, &z)?;
        }
    }
    x.mark_pivot(match dir {
        Direction::Backward => 0,
        Direction::Forward => d - 1,
    });
    Ok(x)
}
