//! Rank truncation: Frobenius rounding and the A-weighted variant.

use crate::contract::{dot, matmul};
use crate::dense::{rank_for_tolerance, sorted_svd, DenseMatrix};
use crate::error::{Error, Result};
use crate::projections::env::{op_left_step, op_right_step};
use crate::projections::local::apply_single;
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::{Core3, TtVector};

/// How the relative tolerance is split over the `d - 1` unfoldings of the A-weighted rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToleranceSplit {
    /// `rel_tol / sqrt(d - 1)` per unfolding.
    Sqrt,
    /// `rel_tol / (d - 1)` per unfolding; a strict triangle-inequality bound.
    Linear,
}

impl ToleranceSplit {
    fn factor(self, d: usize) -> f64 {
        let m = (d.max(2) - 1) as f64;
        match self {
            ToleranceSplit::Sqrt => m.sqrt(),
            ToleranceSplit::Linear => m,
        }
    }
}

/// Outcome of [`TtVector::round_with_report`].
#[derive(Debug, Clone)]
pub struct RoundReport {
    /// Norm of the input.
    pub norm: f64,
    /// `‖x - x̃‖`, exact up to rounding since the per-step errors are orthogonal.
    pub discarded: f64,
}

impl TtVector {
    /// TT rounding with relative Frobenius tolerance and an optional rank cap.
    pub fn round(&self, rel_tol: f64, max_rank: Option<usize>) -> TtVector {
        self.round_with_report(rel_tol, max_rank).0
    }

    /// Orthogonalizes to the last core, then truncates right to left with a
    /// per-unfolding budget `rel_tol ‖x‖ / sqrt(d - 1)`. The result has its pivot on core 0.
    pub fn round_with_report(&self, rel_tol: f64, max_rank: Option<usize>) -> (TtVector, RoundReport) {
        let d = self.d();
        let mut x = self.orthogonalize(d - 1);
        let norm = x.core(d - 1).frobenius_norm();
        if d == 1 {
            return (x, RoundReport { norm, discarded: 0.0 });
        }
        let budget = rel_tol.max(0.0) * norm / ((d - 1) as f64).sqrt();
        let mut discarded2 = 0.0;
        for k in (1..d).rev() {
            let c = x.core(k);
            let (u, s, v) = sorted_svd(&c.right_unfolding()).expect("finite core");
            let mut rank = rank_for_tolerance(&s, budget).max(1);
            if let Some(cap) = max_rank {
                rank = rank.min(cap.max(1));
            }
            discarded2 += s[rank..].iter().map(|v| v * v).sum::<f64>();
            split_right(&mut x, k, &u, &s, &v, rank);
        }
        x.mark_pivot(0);
        (
            x,
            RoundReport {
                norm,
                discarded: discarded2.sqrt(),
            },
        )
    }

    /// Rounding in which singular triplets are discarded one at a time, smallest
    /// first, while the error measured in the local operator norm stays below
    /// `rel_tol` times the local A-norm of the core.
    pub fn round_anorm(&self, a: &TtMatrix, rel_tol: f64) -> Result<TtVector> {
        self.round_anorm_with_split(a, rel_tol, ToleranceSplit::Sqrt)
    }

    pub fn round_anorm_with_split(&self, a: &TtMatrix, rel_tol: f64, split: ToleranceSplit) -> Result<TtVector> {
        a.check_square_against(self)?;
        let d = self.d();
        let mut x = self.orthogonalize(d - 1);
        if d == 1 {
            return Ok(x);
        }
        let local_tol = rel_tol.max(0.0) / split.factor(d);
        let mut lefts = vec![vec![1.0]];
        for k in 0..d - 1 {
            let next = op_left_step(&lefts[k], x.core(k), a.core(k), x.core(k));
            lefts.push(next);
        }
        let mut right = vec![1.0];
        for k in (1..d).rev() {
            let c = x.core(k).clone();
            let (r0, n, r1) = (c.r_left(), c.n(), c.r_right());
            let (u, s, v) = sorted_svd(&c.right_unfolding())?;
            let m = s.len();
            let mut w = Vec::with_capacity(m);
            let mut bw = Vec::with_capacity(m);
            for i in 0..m {
                let wi = (u.column(i) * v.column(i).transpose()).as_slice().to_vec();
                let bwi = apply_single(&lefts[k], a.core(k), &right, [r0, n, r1], &wi);
                w.push(wi);
                bw.push(bwi);
            }
            let mut g = DenseMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    g[(i, j)] = dot(&w[i], &bw[j]);
                }
            }
            let g = (&g + g.transpose()) * 0.5;
            let diag: Vec<f64> = (0..m).map(|i| g[(i, i)]).collect();
            let gmax = diag.iter().cloned().fold(f64::MIN, f64::max);
            let gmin = diag.iter().cloned().fold(f64::MAX, f64::min);
            if gmin < -1e-12 * gmax.abs() {
                return Err(Error::Numerical(format!(
                    "reduced operator at core {k} is not positive definite (Rayleigh quotient {gmin:e})"
                )));
            }
            let rank = if gmin < 1e-12 * gmax {
                let nrm = dot(&s, &s).sqrt();
                rank_for_tolerance(&s, local_tol * nrm).max(1)
            } else {
                let quad = |lo: usize| -> f64 {
                    let mut acc = 0.0;
                    for i in lo..m {
                        for j in lo..m {
                            acc += s[i] * s[j] * g[(i, j)];
                        }
                    }
                    acc
                };
                let total = quad(0);
                let limit = local_tol * local_tol * total;
                let mut rank = m;
                while rank > 1 && quad(rank - 1) <= limit {
                    rank -= 1;
                }
                rank
            };
            split_right(&mut x, k, &u, &s, &v, rank);
            let nc = x.core(k);
            right = op_right_step(&right, nc, a.core(k), nc);
        }
        x.mark_pivot(0);
        Ok(x)
    }
}

/// Keeps `rank` triplets of core `k`'s right unfolding: core `k` becomes `Vᵀ`
/// and `U Σ` is absorbed into core `k - 1`.
fn split_right(x: &mut TtVector, k: usize, u: &DenseMatrix, s: &[f64], v: &DenseMatrix, rank: usize) {
    let c = x.core(k);
    let (n, r1) = (c.n(), c.r_right());
    let vt = v.columns(0, rank).transpose();
    let mut us = u.columns(0, rank).into_owned();
    for (j, sv) in s.iter().enumerate().take(rank) {
        us.column_mut(j).scale_mut(*sv);
    }
    let prev = x.core(k - 1);
    let merged = matmul(
        prev.r_left() * prev.n(),
        prev.r_right(),
        rank,
        prev.data(),
        false,
        us.as_slice(),
        false,
    );
    let prev_core = Core3::from_parts(prev.r_left(), prev.n(), rank, merged);
    x.set_core(k, Core3::from_parts(rank, n, r1, vt.as_slice().to_vec()));
    x.set_core(k - 1, prev_core);
}
