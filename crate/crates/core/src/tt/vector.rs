//! Tensor trains of vectors.
//!
//! Core `k` holds `r_{k-1} x n_k x r_k` entries with the left rank index
//! fastest, so the left unfolding `(r_{k-1} n_k) x r_k` and the right
//! unfolding `r_{k-1} x (n_k r_k)` are both plain column-major views of the
//! same buffer. Dense tensors use the first mode index as the fastest one.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::contract::{matmul, norm2};
use crate::dense::{lq_factor, qr_factor, rank_for_tolerance, sorted_svd, DenseMatrix};
use crate::error::{Error, Result};

/// Default limit on the number of entries produced by dense conversions.
pub const DEFAULT_DENSE_CAP: usize = 1 << 20;

static NEXT_CORE_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) fn fresh_id() -> u64 {
    NEXT_CORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// One three-way core.
#[derive(Debug, Clone, PartialEq)]
pub struct Core3 {
    r_left: usize,
    n: usize,
    r_right: usize,
    data: Vec<f64>,
}

impl Core3 {
    pub fn new(r_left: usize, n: usize, r_right: usize, data: Vec<f64>) -> Result<Self> {
        if r_left == 0 || n == 0 || r_right == 0 {
            return Err(Error::Input(format!(
                "core dimensions must be positive, got ({r_left}, {n}, {r_right})"
            )));
        }
        if data.len() != r_left * n * r_right {
            return Err(Error::Shape(format!(
                "core ({r_left}, {n}, {r_right}) needs {} entries, got {}",
                r_left * n * r_right,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("core has non-finite entries".into()));
        }
        Ok(Self {
            r_left,
            n,
            r_right,
            data,
        })
    }

    pub(crate) fn from_parts(r_left: usize, n: usize, r_right: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), r_left * n * r_right);
        Self {
            r_left,
            n,
            r_right,
            data,
        }
    }

    pub fn zeros(r_left: usize, n: usize, r_right: usize) -> Self {
        Self::from_parts(r_left, n, r_right, vec![0.0; r_left * n * r_right])
    }

    pub fn r_left(&self) -> usize {
        self.r_left
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_right(&self) -> usize {
        self.r_right
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.r_left, self.n, self.r_right]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[a + self.r_left * (i + self.n * b)]
    }

    /// `(r_left n) x r_right` view.
    pub fn left_unfolding(&self) -> DenseMatrix {
        DenseMatrix::from_column_slice(self.r_left * self.n, self.r_right, &self.data)
    }

    /// `r_left x (n r_right)` view.
    pub fn right_unfolding(&self) -> DenseMatrix {
        DenseMatrix::from_column_slice(self.r_left, self.n * self.r_right, &self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }
}

/// Orthogonality tag of one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ortho {
    Left,
    Right,
    None,
}

/// Per-core orthogonality annotation with an optional pivot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthoState {
    pub tags: Vec<Ortho>,
    pub pivot: Option<usize>,
}

impl OrthoState {
    pub fn none(d: usize) -> Self {
        Self {
            tags: vec![Ortho::None; d],
            pivot: None,
        }
    }

    pub fn pivoted(d: usize, pivot: usize) -> Self {
        let tags = (0..d)
            .map(|k| match k.cmp(&pivot) {
                std::cmp::Ordering::Less => Ortho::Left,
                std::cmp::Ordering::Equal => Ortho::None,
                std::cmp::Ordering::Greater => Ortho::Right,
            })
            .collect();
        Self {
            tags,
            pivot: Some(pivot),
        }
    }
}

/// A d-dimensional tensor in TT format. Cores are indexed `0..d`.
#[derive(Debug, Clone)]
pub struct TtVector {
    cores: Vec<Core3>,
    ids: Vec<u64>,
    ortho: OrthoState,
}

impl TtVector {
    /// Builds a tensor train from cores, checking the rank chain.
    pub fn from_cores(cores: Vec<Core3>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Input("a tensor train needs at least one core".into()));
        }
        if cores[0].r_left != 1 || cores[cores.len() - 1].r_right != 1 {
            return Err(Error::Input("boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].r_right != cores[k].r_left {
                return Err(Error::Shape(format!(
                    "rank chain broken between cores {} and {k}: {} vs {}",
                    k - 1,
                    cores[k - 1].r_right,
                    cores[k].r_left
                )));
            }
        }
        Ok(Self::from_cores_unchecked(cores, None))
    }

    pub(crate) fn from_cores_unchecked(cores: Vec<Core3>, pivot: Option<usize>) -> Self {
        let d = cores.len();
        let ids = (0..d).map(|_| fresh_id()).collect();
        let ortho = match pivot {
            Some(p) => OrthoState::pivoted(d, p),
            None => OrthoState::none(d),
        };
        Self { cores, ids, ortho }
    }

    fn check_ranks(mode_sizes: &[usize], ranks: &[usize]) -> Result<()> {
        let d = mode_sizes.len();
        if d == 0 {
            return Err(Error::Input("dimension must be at least 1".into()));
        }
        if ranks.len() != d + 1 {
            return Err(Error::Input(format!(
                "rank vector must have d + 1 = {} entries, got {}",
                d + 1,
                ranks.len()
            )));
        }
        if ranks[0] != 1 || ranks[d] != 1 {
            return Err(Error::Input("boundary ranks must be 1".into()));
        }
        if ranks.contains(&0) || mode_sizes.contains(&0) {
            return Err(Error::Input("ranks and mode sizes must be positive".into()));
        }
        Ok(())
    }

    /// The zero tensor, stored with unit ranks and zero cores.
    pub fn zeros(mode_sizes: &[usize]) -> Result<Self> {
        Self::check_ranks(mode_sizes, &vec![1; mode_sizes.len() + 1])?;
        Ok(Self::from_cores_unchecked(
            mode_sizes.iter().map(|&n| Core3::zeros(1, n, 1)).collect(),
            None,
        ))
    }

    /// The all-ones tensor with unit ranks.
    pub fn ones(mode_sizes: &[usize]) -> Result<Self> {
        Self::check_ranks(mode_sizes, &vec![1; mode_sizes.len() + 1])?;
        Ok(Self::from_cores_unchecked(
            mode_sizes
                .iter()
                .map(|&n| Core3::from_parts(1, n, 1, vec![1.0; n]))
                .collect(),
            None,
        ))
    }

    /// Random tensor train with i.i.d. standard normal core entries.
    pub fn random(mode_sizes: &[usize], ranks: &[usize], seed: u64) -> Result<Self> {
        Self::check_ranks(mode_sizes, ranks)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = mode_sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let len = ranks[k] * n * ranks[k + 1];
                let data = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
                Core3::from_parts(ranks[k], n, ranks[k + 1], data)
            })
            .collect();
        Ok(Self::from_cores_unchecked(cores, None))
    }

    /// Random tensor train with every interior rank equal to `rank` (clipped to the unfolding sizes).
    pub fn random_uniform_rank(mode_sizes: &[usize], rank: usize, seed: u64) -> Result<Self> {
        let ranks = feasible_ranks(mode_sizes, rank);
        Self::random(mode_sizes, &ranks, seed)
    }

    /// TT-SVD of a dense tensor with relative Frobenius tolerance `rel_tol`.
    pub fn from_dense(data: &[f64], mode_sizes: &[usize], rel_tol: f64, max_rank: Option<usize>) -> Result<Self> {
        let d = mode_sizes.len();
        Self::check_ranks(mode_sizes, &vec![1; d + 1])?;
        let total: usize = mode_sizes.iter().product();
        if total != data.len() {
            return Err(Error::Shape(format!(
                "dense tensor has {} entries, mode sizes imply {total}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("dense tensor has non-finite entries".into()));
        }
        let budget = if d > 1 {
            rel_tol * norm2(data) / ((d - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(d);
        let mut rest = data.to_vec();
        let mut r = 1;
        for &n in mode_sizes.iter().take(d - 1) {
            let cols = rest.len() / (r * n);
            let m = DenseMatrix::from_column_slice(r * n, cols, &rest);
            let (u, s, v) = sorted_svd(&m)?;
            let mut rank = rank_for_tolerance(&s, budget).max(1);
            if let Some(cap) = max_rank {
                rank = rank.min(cap.max(1));
            }
            let u = u.columns(0, rank).into_owned();
            let v = v.columns(0, rank).into_owned();
            cores.push(Core3::from_parts(r, n, rank, u.as_slice().to_vec()));
            let mut vt = v.transpose();
            for (i, sv) in s.iter().enumerate().take(rank) {
                vt.row_mut(i).scale_mut(*sv);
            }
            rest = vt.as_slice().to_vec();
            r = rank;
        }
        cores.push(Core3::from_parts(r, mode_sizes[d - 1], 1, rest));
        Ok(Self::from_cores_unchecked(cores, Some(d - 1)))
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.n).collect()
    }

    /// `r_0, ..., r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.cores.iter().map(|c| c.r_right)).collect()
    }

    pub fn max_rank(&self) -> usize {
        self.cores.iter().map(|c| c.r_right).max().unwrap_or(1)
    }

    pub fn core(&self, k: usize) -> &Core3 {
        &self.cores[k]
    }

    pub fn cores(&self) -> &[Core3] {
        &self.cores
    }

    pub fn ortho(&self) -> &OrthoState {
        &self.ortho
    }

    /// Number of stored scalars.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub(crate) fn core_id(&self, k: usize) -> u64 {
        self.ids[k]
    }

    /// Replaces core `k`. Neighbouring ranks may be inconsistent until the
    /// caller replaces the adjacent core as well.
    pub(crate) fn set_core(&mut self, k: usize, core: Core3) {
        debug_assert_eq!(core.n, self.cores[k].n);
        self.cores[k] = core;
        self.ids[k] = fresh_id();
        self.ortho.tags[k] = Ortho::None;
        self.ortho.pivot = None;
    }

    pub(crate) fn set_ortho(&mut self, ortho: OrthoState) {
        self.ortho = ortho;
    }

    pub(crate) fn mark_pivot(&mut self, pivot: usize) {
        self.ortho = OrthoState::pivoted(self.d(), pivot);
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.d() {
            return Err(Error::Index(format!(
                "index has {} entries for a {}-dimensional tensor",
                index.len(),
                self.d()
            )));
        }
        for (k, (&i, c)) in index.iter().zip(&self.cores).enumerate() {
            if i >= c.n {
                return Err(Error::Index(format!("i_{k} = {i} but mode size is {}", c.n)));
            }
        }
        Ok(())
    }

    /// Single entry, contracting the core slices left to right.
    pub fn evaluate(&self, index: &[usize]) -> Result<f64> {
        self.check_index(index)?;
        let mut row = vec![1.0];
        for (c, &i) in self.cores.iter().zip(index) {
            let mut next = vec![0.0; c.r_right];
            for (b, nb) in next.iter_mut().enumerate() {
                let base = c.r_left * (i + c.n * b);
                *nb = row.iter().enumerate().map(|(a, ra)| ra * c.data[base + a]).sum();
            }
            row = next;
        }
        Ok(row[0])
    }

    pub fn to_dense(&self) -> Result<Vec<f64>> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP)
    }

    /// Full tensor with the first mode index fastest.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<Vec<f64>> {
        let total = dense_size(&self.mode_sizes())?;
        if total > cap {
            return Err(Error::CapExceeded {
                requested: total,
                cap,
            });
        }
        let (m, _) = self.prefix_product(self.d());
        Ok(m)
    }

    /// Contraction of cores `0..k` as a `(n_0...n_{k-1}) x r_k` column-major matrix.
    fn prefix_product(&self, k: usize) -> (Vec<f64>, usize) {
        let mut acc = vec![1.0];
        let mut rows = 1usize;
        for c in &self.cores[..k] {
            acc = matmul(rows, c.r_left, c.n * c.r_right, &acc, false, &c.data, false);
            rows *= c.n;
        }
        (acc, rows)
    }

    /// Contraction of cores `k..d` as an `r_k x (n_k...n_{d-1})` matrix.
    fn suffix_product(&self, k: usize) -> (Vec<f64>, usize) {
        let mut acc = vec![1.0];
        let mut cols = 1usize;
        for c in self.cores[k..].iter().rev() {
            acc = matmul(c.r_left * c.n, c.r_right, cols, &c.data, false, &acc, false);
            cols *= c.n;
        }
        (acc, cols)
    }

    /// Interface matrices `X^{<=k}` (size `(n_1..n_k) x r_k`) and `X^{>k}`
    /// (size `r_k x (n_{k+1}..n_d)`) for `k = 0..=d`, counting modes from 1.
    pub fn interfaces(&self, k: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        self.interfaces_with_cap(k, DEFAULT_DENSE_CAP)
    }

    pub fn interfaces_with_cap(&self, k: usize, cap: usize) -> Result<(DenseMatrix, DenseMatrix)> {
        let d = self.d();
        if k > d {
            return Err(Error::Index(format!("interface position {k} exceeds d = {d}")));
        }
        let modes = self.mode_sizes();
        let left_size = dense_size(&modes[..k])?;
        let right_size = dense_size(&modes[k..])?;
        let rk = self.ranks()[k];
        for size in [left_size * rk, right_size * rk] {
            if size > cap {
                return Err(Error::CapExceeded {
                    requested: size,
                    cap,
                });
            }
        }
        let (l, rows) = self.prefix_product(k);
        let (r, cols) = self.suffix_product(k);
        Ok((
            DenseMatrix::from_column_slice(rows, rk, &l),
            DenseMatrix::from_column_slice(rk, cols, &r),
        ))
    }

    fn check_modes(&self, other: &TtVector, what: &str) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::Shape(format!(
                "{what}: mode sizes {:?} and {:?} differ",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }

    /// Sum in TT format with ranks `r_k(x) + r_k(y)` at interior bonds.
    pub fn add(&self, other: &TtVector) -> Result<TtVector> {
        self.check_modes(other, "tt_add")?;
        let d = self.d();
        if d == 1 {
            let data = self.cores[0]
                .data
                .iter()
                .zip(&other.cores[0].data)
                .map(|(a, b)| a + b)
                .collect();
            return Ok(Self::from_cores_unchecked(
                vec![Core3::from_parts(1, self.cores[0].n, 1, data)],
                None,
            ));
        }
        let cores = (0..d)
            .map(|k| {
                let (x, y) = (&self.cores[k], &other.cores[k]);
                let rl = if k == 0 { 1 } else { x.r_left + y.r_left };
                let rr = if k == d - 1 { 1 } else { x.r_right + y.r_right };
                let n = x.n;
                let mut out = Core3::zeros(rl, n, rr);
                let (ya, yb) = (
                    if k == 0 { 0 } else { x.r_left },
                    if k == d - 1 { 0 } else { x.r_right },
                );
                for b in 0..x.r_right {
                    for i in 0..n {
                        for a in 0..x.r_left {
                            out.data[a + rl * (i + n * b)] = x.get(a, i, b);
                        }
                    }
                }
                for b in 0..y.r_right {
                    for i in 0..n {
                        for a in 0..y.r_left {
                            out.data[ya + a + rl * (i + n * (yb + b))] += y.get(a, i, b);
                        }
                    }
                }
                out
            })
            .collect();
        Ok(Self::from_cores_unchecked(cores, None))
    }

    /// `self - other`.
    pub fn sub(&self, other: &TtVector) -> Result<TtVector> {
        self.add(&other.scale(-1.0))
    }

    /// Multiplies one core by `alpha`: the pivot core when the tensor has one, otherwise the last core.
    pub fn scale(&self, alpha: f64) -> TtVector {
        let mut out = self.clone();
        let k = self.ortho.pivot.unwrap_or(self.d() - 1);
        let mut core = out.cores[k].clone();
        core.data.iter_mut().for_each(|v| *v *= alpha);
        out.cores[k] = core;
        out.ids[k] = fresh_id();
        out
    }

    /// Euclidean inner product by left-to-right contraction.
    pub fn dot(&self, other: &TtVector) -> Result<f64> {
        self.check_modes(other, "tt_dot")?;
        let mut m = vec![1.0];
        for (x, y) in self.cores.iter().zip(&other.cores) {
            m = left_pair_step(&m, x, y);
        }
        Ok(m[0])
    }

    /// Euclidean norm, computed from the pivot core after orthogonalization.
    pub fn norm(&self) -> f64 {
        let d = self.d();
        let o = self.orthogonalize(d - 1);
        o.cores[d - 1].frobenius_norm()
    }

    /// Returns an equivalent tensor train whose cores left of `pivot` are
    /// left-orthogonal and whose cores right of it are right-orthogonal.
    pub fn orthogonalize(&self, pivot: usize) -> TtVector {
        let mut out = self.clone();
        out.orthogonalize_in_place(pivot);
        out
    }

    pub(crate) fn orthogonalize_in_place(&mut self, pivot: usize) {
        assert!(pivot < self.d(), "pivot {pivot} out of range");
        for k in 0..pivot {
            if self.ortho.tags[k] != Ortho::Left {
                self.left_orthogonalize_core(k);
            }
        }
        for k in ((pivot + 1)..self.d()).rev() {
            if self.ortho.tags[k] != Ortho::Right {
                self.right_orthogonalize_core(k);
            }
        }
        self.mark_pivot(pivot);
    }

    /// QR of core `k`; the triangular factor is pushed into core `k + 1`.
    pub(crate) fn left_orthogonalize_core(&mut self, k: usize) {
        let c = &self.cores[k];
        let (q, r) = qr_factor(&c.left_unfolding()).expect("finite core");
        let rank = q.ncols();
        let (rl, n) = (c.r_left, c.n);
        let next = &self.cores[k + 1];
        let merged = matmul(rank, next.r_left, next.n * next.r_right, r.as_slice(), false, &next.data, false);
        let next_core = Core3::from_parts(rank, next.n, next.r_right, merged);
        let tags = self.ortho.tags.clone();
        self.set_core(k, Core3::from_parts(rl, n, rank, q.as_slice().to_vec()));
        self.set_core(k + 1, next_core);
        self.ortho.tags = tags;
        self.ortho.tags[k] = Ortho::Left;
        self.ortho.tags[k + 1] = Ortho::None;
    }

    /// LQ of core `k`; the triangular factor is pushed into core `k - 1`.
    pub(crate) fn right_orthogonalize_core(&mut self, k: usize) {
        let c = &self.cores[k];
        let (l, q) = lq_factor(&c.right_unfolding()).expect("finite core");
        let rank = q.nrows();
        let (n, rr) = (c.n, c.r_right);
        let prev = &self.cores[k - 1];
        let merged = matmul(prev.r_left * prev.n, prev.r_right, rank, &prev.data, false, l.as_slice(), false);
        let prev_core = Core3::from_parts(prev.r_left, prev.n, rank, merged);
        let tags = self.ortho.tags.clone();
        self.set_core(k, Core3::from_parts(rank, n, rr, q.as_slice().to_vec()));
        self.set_core(k - 1, prev_core);
        self.ortho.tags = tags;
        self.ortho.tags[k] = Ortho::Right;
        self.ortho.tags[k - 1] = Ortho::None;
    }
}

/// `M' = sum_i X(i)^T M Y(i)` for `M` of size `r_x x r_y`.
pub(crate) fn left_pair_step(m: &[f64], x: &Core3, y: &Core3) -> Vec<f64> {
    let t = matmul(x.r_left, y.r_left, y.n * y.r_right, m, false, &y.data, false);
    matmul(x.r_right, x.r_left * x.n, y.r_right, &x.data, true, &t, false)
}

/// `M = sum_i Y(i) M' X(i)^T` for `M'` of size `r_y' x r_x'`; result is `r_y x r_x`.
pub(crate) fn right_pair_step(m: &[f64], x: &Core3, y: &Core3) -> Vec<f64> {
    let t = matmul(y.r_left * y.n, y.r_right, x.r_right, &y.data, false, m, false);
    matmul(y.r_left, y.n * x.r_right, x.r_left, &t, false, &x.data, true)
}

pub(crate) fn dense_size(modes: &[usize]) -> Result<usize> {
    modes
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or(Error::CapExceeded {
            requested: usize::MAX,
            cap: usize::MAX,
        })
}

/// Ranks `min(rank, prod n_<=k, prod n_>k)` so that a random TT has full interface rank.
pub fn feasible_ranks(mode_sizes: &[usize], rank: usize) -> Vec<usize> {
    let d = mode_sizes.len();
    let mut ranks = vec![1usize; d + 1];
    for k in 1..d {
        let left = mode_sizes[..k].iter().try_fold(1usize, |a, &n| a.checked_mul(n)).unwrap_or(usize::MAX);
        let right = mode_sizes[k..].iter().try_fold(1usize, |a, &n| a.checked_mul(n)).unwrap_or(usize::MAX);
        ranks[k] = rank.min(left).min(right).max(1);
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        norm2(&diff) / norm2(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn ones_evaluate_and_densify() {
        let e = TtVector::ones(&[2, 2, 2]).unwrap();
        assert_eq!(e.evaluate(&[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(e.to_dense().unwrap(), vec![1.0; 8]);
        assert!(matches!(e.evaluate(&[2, 0, 0]), Err(Error::Index(_))));
        assert!(matches!(e.evaluate(&[0, 0]), Err(Error::Index(_))));
    }

    #[test]
    fn rank_one_outer_product() {
        let u = vec![1.0, 2.0, 3.0];
        let v = vec![-1.0, 0.5];
        let x = TtVector::from_cores(vec![
            Core3::new(1, 3, 1, u.clone()).unwrap(),
            Core3::new(1, 2, 1, v.clone()).unwrap(),
        ])
        .unwrap();
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(x.evaluate(&[i, j]).unwrap(), u[i] * v[j]);
            }
        }
        let dense = x.to_dense().unwrap();
        assert_eq!(dense[2 + 3], u[2] * v[1]);
    }

    #[test]
    fn random_evaluate_matches_dense() {
        let x = TtVector::random(&[3, 3, 3, 3], &[1, 2, 2, 2, 1], 5).unwrap();
        let dense = x.to_dense().unwrap();
        for lin in 0..81 {
            let idx = [lin % 3, (lin / 3) % 3, (lin / 9) % 3, lin / 27];
            assert!((x.evaluate(&idx).unwrap() - dense[lin]).abs() < 1e-13);
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(TtVector::random(&[2, 2], &[1, 2, 2], 0).is_err());
        assert!(TtVector::random(&[2, 2], &[1, 2], 0).is_err());
        assert!(TtVector::random(&[2, 2], &[1, 0, 1], 0).is_err());
        assert!(Core3::new(1, 2, 1, vec![1.0]).is_err());
        assert!(Core3::new(1, 1, 1, vec![f64::INFINITY]).is_err());
        let a = Core3::new(1, 2, 2, vec![0.0; 4]).unwrap();
        let b = Core3::new(3, 2, 1, vec![0.0; 6]).unwrap();
        assert!(matches!(TtVector::from_cores(vec![a, b]), Err(Error::Shape(_))));
    }

    #[test]
    fn dense_cap_enforced() {
        let x = TtVector::ones(&[4; 6]).unwrap();
        assert!(matches!(
            x.to_dense_with_cap(100),
            Err(Error::CapExceeded { requested: 4096, cap: 100 })
        ));
    }

    #[test]
    fn interfaces_reproduce_unfoldings() {
        let x = TtVector::random(&[2, 3, 4], &[1, 2, 3, 1], 9).unwrap();
        let dense = x.to_dense().unwrap();
        let (l0, g0) = x.interfaces(0).unwrap();
        assert_eq!(l0, DenseMatrix::identity(1, 1));
        assert!(rel_err(g0.as_slice(), &dense) < 1e-14);
        let (_, g3) = x.interfaces(3).unwrap();
        assert_eq!(g3, DenseMatrix::identity(1, 1));
        for k in 1..3 {
            let (l, g) = x.interfaces(k).unwrap();
            let prod = &l * &g;
            assert!(rel_err(prod.as_slice(), &dense) < 1e-13);
        }
    }

    #[test]
    fn add_structure_and_values() {
        let x = TtVector::random(&[3, 2, 4, 2], &[1, 2, 3, 2, 1], 1).unwrap();
        let y = TtVector::random(&[3, 2, 4, 2], &[1, 1, 2, 3, 1], 2).unwrap();
        let s = x.add(&y).unwrap();
        assert_eq!(s.ranks(), vec![1, 3, 5, 5, 1]);
        let expect: Vec<f64> = x
            .to_dense()
            .unwrap()
            .iter()
            .zip(y.to_dense().unwrap())
            .map(|(a, b)| a + b)
            .collect();
        assert!(rel_err(&s.to_dense().unwrap(), &expect) < 1e-13);

        let z = TtVector::zeros(&[3, 2, 4, 2]).unwrap();
        assert!(rel_err(&x.add(&z).unwrap().to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-15);

        let e = TtVector::ones(&[2, 2]).unwrap();
        let two = e.add(&e).unwrap();
        assert_eq!(two.ranks(), vec![1, 2, 1]);
        assert_eq!(two.to_dense().unwrap(), vec![2.0; 4]);

        let one_d = TtVector::ones(&[3]).unwrap().add(&TtVector::ones(&[3]).unwrap()).unwrap();
        assert_eq!(one_d.ranks(), vec![1, 1]);
        assert!(x.add(&TtVector::ones(&[3, 2]).unwrap()).is_err());
    }

    #[test]
    fn dot_and_scale() {
        let e = TtVector::ones(&[4, 4, 4]).unwrap();
        assert_eq!(e.dot(&e).unwrap(), 64.0);
        assert_eq!(e.dot(&TtVector::zeros(&[4, 4, 4]).unwrap()).unwrap(), 0.0);
        let x = TtVector::random(&[3, 2, 3, 2, 2], &[1, 2, 3, 2, 2, 1], 3).unwrap();
        let y = TtVector::random(&[3, 2, 3, 2, 2], &[1, 3, 1, 2, 3, 1], 4).unwrap();
        let dense = crate::contract::dot(&x.to_dense().unwrap(), &y.to_dense().unwrap());
        assert!((x.dot(&y).unwrap() - dense).abs() < 1e-12 * dense.abs().max(1.0));
        assert!(x.scale(0.0).to_dense().unwrap().iter().all(|&v| v == 0.0));
        let x3 = x.scale(3.0).to_dense().unwrap();
        let xd = x.to_dense().unwrap();
        assert!(x3.iter().zip(&xd).all(|(a, b)| (a - 3.0 * b).abs() < 1e-12));
    }

    #[test]
    fn random_is_deterministic() {
        let a = TtVector::random(&[3, 4, 5], &[1, 2, 2, 1], 42).unwrap();
        let b = TtVector::random(&[3, 4, 5], &[1, 2, 2, 1], 42).unwrap();
        assert_eq!(a.cores(), b.cores());
        let c = TtVector::random(&[3, 4, 5], &[1, 2, 2, 1], 43).unwrap();
        assert_ne!(a.cores(), c.cores());
    }

    #[test]
    fn orthogonalize_gives_orthonormal_interfaces() {
        let x = TtVector::random(&[3, 4, 3, 2], &[1, 3, 4, 2, 1], 8).unwrap();
        let dense = x.to_dense().unwrap();
        for pivot in 0..4 {
            let o = x.orthogonalize(pivot);
            assert_eq!(o.ortho().pivot, Some(pivot));
            assert!(rel_err(&o.to_dense().unwrap(), &dense) < 1e-13);
            let (l, _) = o.interfaces(pivot).unwrap();
            let (_, g) = o.interfaces(pivot + 1).unwrap();
            let rl = l.ncols();
            let rg = g.nrows();
            assert!((l.transpose() * &l - DenseMatrix::identity(rl, rl)).amax() < 1e-12);
            assert!((&g * g.transpose() - DenseMatrix::identity(rg, rg)).amax() < 1e-12);
            let nrm = o.core(pivot).frobenius_norm();
            assert!((nrm - norm2(&dense)).abs() < 1e-12 * nrm);
        }
    }

    #[test]
    fn orthogonalize_is_idempotent_in_value() {
        let x = TtVector::random(&[2, 3, 2], &[1, 2, 2, 1], 1).unwrap().orthogonalize(1);
        let y = x.orthogonalize(1);
        assert!(rel_err(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-14);
        let r1 = TtVector::random(&[3, 3, 3], &[1, 1, 1, 1], 2).unwrap();
        let o = r1.orthogonalize(2);
        assert!((o.core(0).frobenius_norm() - 1.0).abs() < 1e-14);
        assert!((o.core(1).frobenius_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn from_dense_round_trip() {
        let x = TtVector::random(&[3, 4, 2, 3], &[1, 2, 3, 2, 1], 10).unwrap();
        let dense = x.to_dense().unwrap();
        let y = TtVector::from_dense(&dense, &[3, 4, 2, 3], 1e-13, None).unwrap();
        assert_eq!(y.ranks(), vec![1, 2, 3, 2, 1]);
        assert!(rel_err(&y.to_dense().unwrap(), &dense) < 1e-12);
        let zero = TtVector::from_dense(&[0.0; 8], &[2, 2, 2], 1e-8, None).unwrap();
        assert_eq!(zero.ranks(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn feasible_ranks_are_clipped() {
        assert_eq!(feasible_ranks(&[2, 3, 4], 10), vec![1, 2, 4, 1]);
        assert_eq!(feasible_ranks(&[5], 3), vec![1, 1]);
    }
}
