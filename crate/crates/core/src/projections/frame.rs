//! Dense frame matrices for desk-scale verification.
//!
//! With the first mode index fastest, the frame of core `k` is
//! `X^{>k}ᵀ ⊗ I ⊗ X^{<k}` in the convention `C(ip, jq) = A(i, j) B(p, q)`.

use crate::dense::{kron, DenseMatrix};
use crate::error::{Error, Result};
use crate::tt::vector::{TtVector, DEFAULT_DENSE_CAP};

fn check_cap(x: &TtVector, cols: usize) -> Result<()> {
    let rows: usize = x.mode_sizes().iter().product();
    let total = rows.saturating_mul(cols);
    if total > DEFAULT_DENSE_CAP {
        return Err(Error::CapExceeded {
            requested: total,
            cap: DEFAULT_DENSE_CAP,
        });
    }
    Ok(())
}

/// The `(n_1...n_d) x (r_{k-1} n_k r_k)` frame of core `k`.
pub fn frame_dense(x: &TtVector, k: usize) -> Result<DenseMatrix> {
    if k >= x.d() {
        return Err(Error::Index(format!("core {k} out of range for d = {}", x.d())));
    }
    let c = x.core(k);
    check_cap(x, c.r_left() * c.n() * c.r_right())?;
    let (lt, _) = x.interfaces(k)?;
    let (_, gt) = x.interfaces(k + 1)?;
    Ok(kron(&gt.transpose(), &kron(&DenseMatrix::identity(c.n(), c.n()), &lt)))
}

/// The frame of the superblock formed by cores `k` and `k + 1`.
pub fn frame_two_block_dense(x: &TtVector, k: usize) -> Result<DenseMatrix> {
    if k + 1 >= x.d() {
        return Err(Error::Index(format!("superblock ({k}, {}) out of range for d = {}", k + 1, x.d())));
    }
    let (c0, c1) = (x.core(k), x.core(k + 1));
    check_cap(x, c0.r_left() * c0.n() * c1.n() * c1.r_right())?;
    let (lt, _) = x.interfaces(k)?;
    let (_, gt) = x.interfaces(k + 2)?;
    let mid = DenseMatrix::identity(c0.n() * c1.n(), c0.n() * c1.n());
    Ok(kron(&gt.transpose(), &kron(&mid, &lt)))
}

/// Superblock `W(a, i_k, i_{k+1}, b) = Σ_c X_k(a, i_k, c) X_{k+1}(c, i_{k+1}, b)`.
pub fn superblock(x: &TtVector, k: usize) -> Vec<f64> {
    let (c0, c1) = (x.core(k), x.core(k + 1));
    crate::contract::matmul(
        c0.r_left() * c0.n(),
        c0.r_right(),
        c1.n() * c1.r_right(),
        c0.data(),
        false,
        c1.data(),
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(m: &DenseMatrix, v: &[f64]) -> Vec<f64> {
        (m * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
    }

    #[test]
    fn single_mode_frame_is_identity() {
        let x = TtVector::random(&[5], &[1, 1], 0).unwrap();
        assert_eq!(frame_dense(&x, 0).unwrap(), DenseMatrix::identity(5, 5));
        let x = TtVector::random(&[2, 3], &[1, 2, 1], 0).unwrap();
        assert_eq!(frame_two_block_dense(&x, 0).unwrap(), DenseMatrix::identity(6, 6));
    }

    #[test]
    fn frames_reconstruct_the_tensor() {
        let x = TtVector::random(&[3, 2, 4, 2], &[1, 2, 3, 2, 1], 6).unwrap();
        let dense = x.to_dense().unwrap();
        for k in 0..4 {
            let p = frame_dense(&x, k).unwrap();
            let got = apply(&p, x.core(k).data());
            assert!(got.iter().zip(&dense).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        for k in 0..3 {
            let p = frame_two_block_dense(&x, k).unwrap();
            let got = apply(&p, &superblock(&x, k));
            assert!(got.iter().zip(&dense).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn rank_one_boundary_frame() {
        let x = TtVector::random(&[3, 2], &[1, 1, 1], 2).unwrap();
        let p = frame_dense(&x, 0).unwrap();
        assert_eq!(p.shape(), (6, 3));
        let (_, gt) = x.interfaces(1).unwrap();
        let expect = kron(&gt.transpose(), &DenseMatrix::identity(3, 3));
        assert_eq!(p, expect);
    }

    #[test]
    fn orthogonal_frames_have_orthonormal_columns() {
        let x = TtVector::random(&[3, 3, 3, 2], &[1, 3, 4, 2, 1], 8).unwrap();
        for k in 0..4 {
            let p = frame_dense(&x.orthogonalize(k), k).unwrap();
            let c = p.ncols();
            assert!((p.transpose() * &p - DenseMatrix::identity(c, c)).amax() < 1e-11);
        }
    }
}
