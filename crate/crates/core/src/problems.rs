//! Model problems and the brute-force reference solver.
//!
//! The Laplacian is the Dirichlet finite-difference operator on the interior
//! points of a uniform grid with `n` points per direction, `h = 1/(n+1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{conjugate_gradient, solve_spd, DenseMatrix, SpectrumBounds};
use crate::error::{Error, Result};
use crate::tt::matrix::{OpCore, TtMatrix};
use crate::tt::vector::{feasible_ranks, TtVector};

/// Environment variable overriding [`DEFAULT_ORACLE_CAP`].
pub const ORACLE_CAP_VAR: &str = "TT_ORACLE_CAP";
/// Largest number of unknowns the oracle accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 1 << 16;
/// Above this size the oracle switches from Cholesky to matrix-free CG.
pub const DIRECT_ORACLE_LIMIT: usize = 4096;

fn check_sizes(d: usize, n: usize) -> Result<()> {
    if d == 0 || n < 2 {
        return Err(Error::Input(format!("need d >= 1 and n >= 2, got d = {d}, n = {n}")));
    }
    Ok(())
}

/// Tridiagonal `(-1, 2, -1)` stencil, times `(n+1)^2` when `scaled`.
pub fn laplacian_1d(n: usize, scaled: bool) -> DenseMatrix {
    let s = if scaled { ((n + 1) * (n + 1)) as f64 } else { 1.0 };
    DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 * s,
        1 => -s,
        _ => 0.0,
    })
}

/// TT operator `Σ_k I ⊗ … ⊗ M_k ⊗ … ⊗ I` with interior ranks 2.
///
/// Rank state 0 means "no term placed yet", state 1 "term already placed".
pub fn kron_sum_tt(mats: &[DenseMatrix]) -> Result<TtMatrix> {
    if mats.is_empty() {
        return Err(Error::Input("Kronecker sum of zero terms".into()));
    }
    for m in mats {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Shape(format!("term is {}x{}, expected square", m.nrows(), m.ncols())));
        }
    }
    let d = mats.len();
    if d == 1 {
        let m = &mats[0];
        return TtMatrix::from_cores(vec![OpCore::new(1, m.nrows(), m.ncols(), 1, m.as_slice().to_vec())?]);
    }
    let cores = mats
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let n = m.nrows();
            let id = DenseMatrix::identity(n, n);
            let (rl, rr) = (if k == 0 { 1 } else { 2 }, if k == d - 1 { 1 } else { 2 });
            let mut data = vec![0.0; rl * n * n * rr];
            let mut put = |g: usize, dl: usize, b: &DenseMatrix| {
                for j in 0..n {
                    for i in 0..n {
                        data[g + rl * (i + n * (j + n * dl))] = b[(i, j)];
                    }
                }
            };
            if k == 0 {
                put(0, 0, &id);
                put(0, 1, m);
            } else if k == d - 1 {
                put(0, 0, m);
                put(1, 0, &id);
            } else {
                put(0, 0, &id);
                put(0, 1, m);
                put(1, 1, &id);
            }
            OpCore::new(rl, n, n, rr, data)
        })
        .collect::<Result<Vec<_>>>()?;
    TtMatrix::from_cores(cores)
}

/// The `d`-dimensional Dirichlet Laplacian with `n` interior points per mode.
pub fn laplacian_tt(d: usize, n: usize, scaled: bool) -> Result<TtMatrix> {
    check_sizes(d, n)?;
    kron_sum_tt(&vec![laplacian_1d(n, scaled); d])
}

/// Closed-form extreme eigenvalues of [`laplacian_tt`].
pub fn laplacian_spectrum(d: usize, n: usize, scaled: bool) -> Result<SpectrumBounds> {
    check_sizes(d, n)?;
    let s = if scaled { ((n + 1) * (n + 1)) as f64 } else { 1.0 };
    let h = std::f64::consts::PI / (n + 1) as f64;
    let lam = |j: usize| s * 4.0 * (0.5 * j as f64 * h).sin().powi(2);
    SpectrumBounds::new(d as f64 * lam(1), d as f64 * lam(n))
}

/// Kronecker sum of seeded random SPD terms `G Gᵀ / n + I`.
pub fn random_spd_tt(d: usize, n: usize, seed: u64) -> Result<TtMatrix> {
    check_sizes(d, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mats: Vec<DenseMatrix> = (0..d)
        .map(|_| {
            let g = DenseMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            let m = &g * g.transpose() / n as f64 + DenseMatrix::identity(n, n);
            (&m + m.transpose()) * 0.5
        })
        .collect();
    kron_sum_tt(&mats)
}

/// The all-ones tensor of size `n^d`.
pub fn ones_tt(d: usize, n: usize) -> Result<TtVector> {
    check_sizes(d, n)?;
    TtVector::ones(&vec![n; d])
}

/// Seeded random tensor train normalized to unit norm.
pub fn random_rhs_tt(d: usize, n: usize, rank: usize, seed: u64) -> Result<TtVector> {
    check_sizes(d, n)?;
    let modes = vec![n; d];
    let x = TtVector::random(&modes, &feasible_ranks(&modes, rank.max(1)), seed)?;
    let nrm = x.norm();
    Ok(x.scale(1.0 / nrm))
}

/// Oracle size cap from [`ORACLE_CAP_VAR`], or the default.
pub fn oracle_cap() -> usize {
    std::env::var(ORACLE_CAP_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_CAP)
}

/// Dense solution of `A x = y`: Cholesky up to [`DIRECT_ORACLE_LIMIT`]
/// unknowns, matrix-free CG beyond it, refused above [`oracle_cap`].
pub fn dense_oracle_solve(a: &TtMatrix, y: &TtVector) -> Result<Vec<f64>> {
    dense_oracle_solve_with_cap(a, y, oracle_cap())
}

pub fn dense_oracle_solve_with_cap(a: &TtMatrix, y: &TtVector, cap: usize) -> Result<Vec<f64>> {
    a.check_square_against(y)?;
    let size = y
        .mode_sizes()
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .unwrap_or(usize::MAX);
    if size > cap {
        return Err(Error::CapExceeded { requested: size, cap });
    }
    let yd = y.to_dense_with_cap(cap)?;
    if size <= DIRECT_ORACLE_LIMIT {
        return solve_spd(&a.to_dense()?, &yd);
    }
    let out = conjugate_gradient(|v| a.apply_dense(v).expect("conforming"), &yd, &vec![0.0; size], 1e-13, 20_000)?;
    if out.rel_residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "oracle CG stopped at relative residual {:e} after {} iterations",
            out.rel_residual, out.iterations
        )));
    }
    Ok(out.x)
}
