//! Dense linear-algebra kernels used by the tensor-train operations and by
//! the brute-force oracles.
//!
//! Matrices are [`nalgebra::DMatrix`] (column-major). Factorizations use a
//! deterministic sign gauge: the first entry of magnitude above `1e-12` in
//! every column of `Q` (QR) or `U` (SVD) is positive.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

const SIGN_EPS: f64 = 1e-12;

/// Extreme eigenvalues of an SPD matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpectrumBounds {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max.is_finite()) {
            return Err(Error::Input(format!(
                "spectrum bounds need 0 < lambda_min <= lambda_max, got ({lambda_min}, {lambda_max})"
            )));
        }
        Ok(Self {
            lambda_min,
            lambda_max,
        })
    }

    pub fn cond(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    /// Worst-case steepest descent contraction `(lmax - lmin) / (lmax + lmin)`.
    pub fn kantorovich_rate(&self) -> f64 {
        (self.lambda_max - self.lambda_min) / (self.lambda_max + self.lambda_min)
    }
}

fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Input(format!("{what}: non-finite entries")))
    }
}

fn first_significant(col: impl Iterator<Item = f64>) -> f64 {
    col.into_iter()
        .find(|v| v.abs() > SIGN_EPS)
        .unwrap_or(1.0)
}

/// Thin QR factorization `M = Q R` with `Q` of size `m x min(m, n)`.
pub fn qr_factor(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Input("qr_factor: empty matrix".into()));
    }
    check_finite(m, "qr_factor")?;
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..q.ncols() {
        if first_significant(q.column(j).iter().copied()) < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((q, r))
}

/// Thin LQ factorization `M = L Q` with `Q` having orthonormal rows.
pub fn lq_factor(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (q, r) = qr_factor(&m.transpose())?;
    Ok((r.transpose(), q.transpose()))
}

/// Result of [`truncated_svd`]: `M ≈ U diag(σ) Vᵀ` with `rank` kept triplets.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
    pub rank: usize,
    /// Frobenius norm of the discarded part, `sqrt(Σ_{i>rank} σ_i²)`.
    pub discarded: f64,
}

/// Full thin SVD with singular values sorted in decreasing order and the sign gauge applied.
pub(crate) fn sorted_svd(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    check_finite(m, "svd")?;
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return Err(Error::Input("svd: empty matrix".into()));
    }
    let svd = SVD::try_new(m.clone(), true, true, 5.0 * f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("svd did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut uo = DenseMatrix::zeros(m.nrows(), k);
    let mut vo = DenseMatrix::zeros(m.ncols(), k);
    let mut so = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).clone_owned();
        let mut vcol = vt.row(src).transpose();
        if first_significant(ucol.iter().copied()) < 0.0 {
            ucol.neg_mut();
            vcol.neg_mut();
        }
        uo.set_column(dst, &ucol);
        vo.set_column(dst, &vcol);
        so.push(s[src]);
    }
    Ok((uo, so, vo))
}

/// Smallest rank whose discarded tail `sqrt(Σ_{i>r} σ_i²)` is at most `abs_tol`.
pub(crate) fn rank_for_tolerance(s: &[f64], abs_tol: f64) -> usize {
    let mut tail = 0.0f64;
    let mut r = s.len();
    while r > 0 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > abs_tol {
            break;
        }
        tail = next;
        r -= 1;
    }
    r
}

/// SVD truncated by the sum-of-squares tail criterion, then capped at `max_rank`.
pub fn truncated_svd(m: &DenseMatrix, abs_tol: f64, max_rank: Option<usize>) -> Result<TruncatedSvd> {
    if !(abs_tol >= 0.0) {
        return Err(Error::Input(format!("truncated_svd: abs_tol must be >= 0, got {abs_tol}")));
    }
    let (u, s, v) = sorted_svd(m)?;
    let mut rank = rank_for_tolerance(&s, abs_tol);
    if let Some(cap) = max_rank {
        rank = rank.min(cap);
    }
    let discarded = s[rank..].iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(TruncatedSvd {
        u: u.columns(0, rank).into_owned(),
        singular_values: s[..rank].to_vec(),
        v: v.columns(0, rank).into_owned(),
        rank,
        discarded,
    })
}

fn check_symmetric(b: &DenseMatrix, rel: f64, what: &str) -> Result<()> {
    if !b.is_square() {
        return Err(Error::Shape(format!("{what}: matrix is {}x{}", b.nrows(), b.ncols())));
    }
    let scale = b.amax();
    let n = b.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (b[(i, j)] - b[(j, i)]).abs() > rel * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Input(format!(
                    "{what}: matrix not symmetric at ({i}, {j}): {} vs {}",
                    b[(i, j)],
                    b[(j, i)]
                )));
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky(b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.nrows();
    let mut l = b.clone();
    for j in 0..n {
        for k in 0..j {
            let ljk = l[(j, k)];
            if ljk != 0.0 {
                for i in j..n {
                    l[(i, j)] -= l[(i, k)] * ljk;
                }
            }
        }
        let pivot = l[(j, j)];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite: pivot {j} of {n} is {pivot:e} (diagonal entry {:e})",
                b[(j, j)]
            )));
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            l[(i, j)] /= d;
        }
    }
    for j in 1..n {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DenseMatrix, g: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut y = g.to_vec();
    for j in 0..n {
        y[j] /= l[(j, j)];
        let yj = y[j];
        for i in (j + 1)..n {
            y[i] -= l[(i, j)] * yj;
        }
    }
    for j in (0..n).rev() {
        let mut s = y[j];
        for i in (j + 1)..n {
            s -= l[(i, j)] * y[i];
        }
        y[j] = s / l[(j, j)];
    }
    y
}

/// Solves `B v = g` for symmetric positive definite `B` by Cholesky factorization.
pub fn solve_spd(b: &DenseMatrix, g: &[f64]) -> Result<Vec<f64>> {
    if b.nrows() != g.len() {
        return Err(Error::Shape(format!(
            "solve_spd: matrix is {}x{}, rhs has {} entries",
            b.nrows(),
            b.ncols(),
            g.len()
        )));
    }
    check_finite(b, "solve_spd")?;
    check_symmetric(b, 1e-10, "solve_spd")?;
    let l = cholesky(b)?;
    Ok(cholesky_solve(&l, g))
}

/// Applies the `A`-orthogonal projector `R_U = U (Uᵀ A U)⁻¹ Uᵀ A` to `v`.
pub fn a_projector_apply(u: &DenseMatrix, a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if u.nrows() != a.nrows() || a.ncols() != v.len() {
        return Err(Error::Shape("a_projector_apply: dimensions do not conform".into()));
    }
    let av = a * nalgebra::DVector::from_column_slice(v);
    let au = a * u;
    let mut gram = u.transpose() * &au;
    gram = (&gram + gram.transpose()) * 0.5;
    let rhs = u.transpose() * av;
    let l = cholesky(&gram).map_err(|e| {
        Error::Numerical(format!("a_projector_apply: basis is rank deficient ({e})"))
    })?;
    let coef = cholesky_solve(&l, rhs.as_slice());
    Ok((u * nalgebra::DVector::from_vec(coef)).as_slice().to_vec())
}

/// Smallest and largest eigenvalue of a symmetric matrix (no definiteness requirement).
pub fn symmetric_eigen_range(a: &DenseMatrix) -> Result<(f64, f64)> {
    check_finite(a, "symmetric_eigen_range")?;
    check_symmetric(a, 1e-10, "symmetric_eigen_range")?;
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    Ok((min, max))
}

/// Extreme eigenvalues of a symmetric positive definite matrix.
pub fn extreme_eigenvalues(a: &DenseMatrix) -> Result<SpectrumBounds> {
    let (min, max) = symmetric_eigen_range(a)?;
    if min <= 0.0 {
        return Err(Error::Numerical(format!(
            "extreme_eigenvalues: matrix is not positive definite (lambda_min = {min:e})"
        )));
    }
    SpectrumBounds::new(min, max)
}

/// Kronecker product with `C(ip, jq) = A(i, j) B(p, q)`, row index `i * rows(B) + p`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    a.kronecker(b)
}

/// Outcome of [`conjugate_gradient`].
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Conjugate gradients for an SPD operator, warm-started at `x0`.
/// Stops when `‖b - A x‖ <= rel_tol ‖b‖` or after `max_iter` iterations.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], x0: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let bnorm = crate::contract::norm2(b);
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rr = crate::contract::dot(&r, &r);
    let mut p = r.clone();
    let target = rel_tol * bnorm;
    let mut it = 0;
    while rr.sqrt() > target && it < max_iter {
        let ap = apply(&p);
        let pap = crate::contract::dot(&p, &ap);
        if !(pap > 0.0) {
            if pap < 0.0 {
                return Err(Error::Numerical(format!(
                    "conjugate_gradient: operator is not positive definite (pAp = {pap:e})"
                )));
            }
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = crate::contract::dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
    }
    Ok(CgOutcome {
        x,
        iterations: it,
        rel_residual: rr.sqrt() / bnorm,
    })
}
