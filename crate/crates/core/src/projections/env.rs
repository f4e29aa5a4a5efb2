//! Partial contractions of `xᵀ A x` and `xᵀ y` from either end of the chain.
//!
//! Bond `j` sits between cores `j - 1` and `j`. `left[j]` contracts cores
//! `0..j` and `right[j]` contracts cores `j..d`, so the local system at core
//! `k` reads `left[k]` and `right[k + 1]`. Operator slabs have dims
//! `(r, R, r)` on the left and `(R, r, r)` on the right; the right slab is
//! ordered (operator, ket, bra). Every slab remembers the ids of the cores it
//! was built from, and reading a slab whose cores have since been replaced is
//! reported as [`Error::StaleEnvironment`].

use crate::contract::{matmul, permute};
use crate::error::{Error, Result};
use crate::tt::matrix::{OpCore, TtMatrix};
use crate::tt::vector::{left_pair_step, right_pair_step, Core3, TtVector};

/// `L'(a', δ, b') = Σ X̄(a, i, a') A(γ, i, j, δ) L(a, γ, b) X(b, j, b')`.
pub(crate) fn op_left_step(l: &[f64], bra: &Core3, a: &OpCore, ket: &Core3) -> Vec<f64> {
    let (ra, rb) = (bra.r_left(), ket.r_left());
    let g = a.r_left();
    let t1 = matmul(ra * g, rb, ket.n() * ket.r_right(), l, false, ket.data(), false);
    let t2 = a.forward(&t1, ra, ket.r_right());
    matmul(
        bra.r_right(),
        ra * bra.n(),
        a.r_right() * ket.r_right(),
        bra.data(),
        true,
        &t2,
        false,
    )
}

/// `R(γ, b, a) = Σ A(γ, i, j, δ) X(b, j, b') X̄(a, i, a') R'(δ, b', a')`.
pub(crate) fn op_right_step(r: &[f64], bra: &Core3, a: &OpCore, ket: &Core3) -> Vec<f64> {
    let (dl, rb1, ra1) = (a.r_right(), ket.r_right(), bra.r_right());
    let rp = permute(r, &[dl, rb1, ra1], &[1, 0, 2]);
    let t1 = matmul(ket.r_left() * ket.n(), rb1, dl * ra1, ket.data(), false, &rp, false);
    let t2 = a.backward(&t1, ket.r_left(), ra1);
    let t3 = matmul(
        ket.r_left() * a.r_left(),
        bra.n() * ra1,
        bra.r_left(),
        &t2,
        false,
        bra.data(),
        true,
    );
    permute(&t3, &[ket.r_left(), a.r_left(), bra.r_left()], &[1, 0, 2])
}

#[derive(Debug, Clone, Default)]
struct Slab {
    data: Vec<f64>,
    sources: Vec<u64>,
}

fn ids(x: &TtVector, range: std::ops::Range<usize>) -> Vec<u64> {
    range.map(|k| x.core_id(k)).collect()
}

fn check(slab: &Slab, x: &TtVector, range: std::ops::Range<usize>, what: &str, bond: usize) -> Result<()> {
    if slab.sources.len() != range.len() || slab.sources != ids(x, range) {
        return Err(Error::StaleEnvironment(format!(
            "{what} environment at bond {bond} was built from cores that have since changed"
        )));
    }
    Ok(())
}

/// Environments of the pairing `(x, w)` for a fixed second tensor `w`.
#[derive(Debug, Clone)]
pub struct PairEnvironments {
    left: Vec<Slab>,
    right: Vec<Slab>,
}

impl PairEnvironments {
    pub fn build(x: &TtVector, w: &TtVector) -> Result<Self> {
        if x.mode_sizes() != w.mode_sizes() {
            return Err(Error::Shape(format!(
                "mode sizes {:?} and {:?} differ",
                x.mode_sizes(),
                w.mode_sizes()
            )));
        }
        let d = x.d();
        let mut env = Self {
            left: vec![Slab::default(); d + 1],
            right: vec![Slab::default(); d + 1],
        };
        env.left[0].data = vec![1.0];
        env.right[d].data = vec![1.0];
        for j in 0..d {
            env.update_left(x, w, j)?;
        }
        for j in (0..d).rev() {
            env.update_right(x, w, j)?;
        }
        Ok(env)
    }

    /// Recomputes `left[j + 1]` from `left[j]` and core `j`.
    pub fn update_left(&mut self, x: &TtVector, w: &TtVector, j: usize) -> Result<()> {
        check(&self.left[j], x, 0..j, "pair", j)?;
        let data = left_pair_step(&self.left[j].data, x.core(j), w.core(j));
        self.left[j + 1] = Slab {
            data,
            sources: ids(x, 0..j + 1),
        };
        Ok(())
    }

    /// Recomputes `right[j]` from `right[j + 1]` and core `j`.
    pub fn update_right(&mut self, x: &TtVector, w: &TtVector, j: usize) -> Result<()> {
        let d = x.d();
        check(&self.right[j + 1], x, j + 1..d, "pair", j + 1)?;
        let data = right_pair_step(&self.right[j + 1].data, x.core(j), w.core(j));
        self.right[j] = Slab {
            data,
            sources: ids(x, j..d),
        };
        Ok(())
    }

    /// `r_x x r_w` matrix.
    pub fn left(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        check(&self.left[j], x, 0..j, "pair", j)?;
        Ok(&self.left[j].data)
    }

    /// `r_w x r_x` matrix.
    pub fn right(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        check(&self.right[j], x, j..x.d(), "pair", j)?;
        Ok(&self.right[j].data)
    }
}

/// Cached operator and right-hand-side environments for `(A, y, x)`.
#[derive(Debug, Clone)]
pub struct EnvironmentCache {
    left_ops: Vec<Slab>,
    right_ops: Vec<Slab>,
    rhs: PairEnvironments,
}

impl EnvironmentCache {
    pub fn build(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<Self> {
        a.check_square_against(x)?;
        let d = x.d();
        let mut env = Self {
            left_ops: vec![Slab::default(); d + 1],
            right_ops: vec![Slab::default(); d + 1],
            rhs: PairEnvironments::build(x, y)?,
        };
        env.left_ops[0].data = vec![1.0];
        env.right_ops[d].data = vec![1.0];
        for j in 0..d {
            env.update_left_op(a, x, j)?;
        }
        for j in (0..d).rev() {
            env.update_right_op(a, x, j)?;
        }
        Ok(env)
    }

    fn update_left_op(&mut self, a: &TtMatrix, x: &TtVector, j: usize) -> Result<()> {
        check(&self.left_ops[j], x, 0..j, "operator", j)?;
        let data = op_left_step(&self.left_ops[j].data, x.core(j), a.core(j), x.core(j));
        self.left_ops[j + 1] = Slab {
            data,
            sources: ids(x, 0..j + 1),
        };
        Ok(())
    }

    fn update_right_op(&mut self, a: &TtMatrix, x: &TtVector, j: usize) -> Result<()> {
        let d = x.d();
        check(&self.right_ops[j + 1], x, j + 1..d, "operator", j + 1)?;
        let data = op_right_step(&self.right_ops[j + 1].data, x.core(j), a.core(j), x.core(j));
        self.right_ops[j] = Slab {
            data,
            sources: ids(x, j..d),
        };
        Ok(())
    }

    /// Advances the left environments past core `j` (after `j` was finalized in a forward sweep).
    pub fn update_left(&mut self, a: &TtMatrix, y: &TtVector, x: &TtVector, j: usize) -> Result<()> {
        self.update_left_op(a, x, j)?;
        self.rhs.update_left(x, y, j)
    }

    /// Advances the right environments past core `j` (after `j` was finalized in a backward sweep).
    pub fn update_right(&mut self, a: &TtMatrix, y: &TtVector, x: &TtVector, j: usize) -> Result<()> {
        self.update_right_op(a, x, j)?;
        self.rhs.update_right(x, y, j)
    }

    /// Left operator slab at bond `j`, dims `(r_j, R_j, r_j)`.
    pub fn left_op(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        check(&self.left_ops[j], x, 0..j, "operator", j)?;
        Ok(&self.left_ops[j].data)
    }

    /// Right operator slab at bond `j`, dims `(R_j, r_j, r_j)`.
    pub fn right_op(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        check(&self.right_ops[j], x, j..x.d(), "operator", j)?;
        Ok(&self.right_ops[j].data)
    }

    /// Left right-hand-side slab at bond `j`, an `r_j x r_y,j` matrix.
    pub fn left_rhs(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        self.rhs.left(x, j)
    }

    /// Right right-hand-side slab at bond `j`, an `r_y,j x r_j` matrix.
    pub fn right_rhs(&self, x: &TtVector, j: usize) -> Result<&[f64]> {
        self.rhs.right(x, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_slabs_are_scalar_one() {
        let x = TtVector::random(&[3], &[1, 1], 1).unwrap();
        let a = TtMatrix::identity(&[3]).unwrap();
        let env = EnvironmentCache::build(&a, &x, &x).unwrap();
        assert_eq!(env.left_op(&x, 0).unwrap(), &[1.0]);
        assert_eq!(env.right_op(&x, 1).unwrap(), &[1.0]);
    }

    #[test]
    fn identity_operator_collapses_under_orthogonality() {
        let x = TtVector::random(&[3, 4, 3, 2], &[1, 3, 4, 2, 1], 2).unwrap().orthogonalize(2);
        let a = TtMatrix::identity(&[3, 4, 3, 2]).unwrap();
        let env = EnvironmentCache::build(&a, &x, &x).unwrap();
        let l = env.left_op(&x, 2).unwrap();
        let r = x.ranks()[2];
        for p in 0..r {
            for q in 0..r {
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((l[p + r * q] - want).abs() < 1e-12);
            }
        }
        let rr = env.right_op(&x, 3).unwrap();
        let r3 = x.ranks()[3];
        for p in 0..r3 {
            for q in 0..r3 {
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((rr[p + r3 * q] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_contraction_gives_quadratic_form() {
        let x = TtVector::random(&[2, 3, 2], &[1, 2, 2, 1], 3).unwrap();
        let y = TtVector::random(&[2, 3, 2], &[1, 2, 1, 1], 4).unwrap();
        let a = TtMatrix::random(&[2, 3, 2], &[1, 2, 3, 1], 5).unwrap();
        let env = EnvironmentCache::build(&a, &y, &x).unwrap();
        let xd = x.to_dense().unwrap();
        let axd = a.apply_dense(&xd).unwrap();
        let quad = crate::contract::dot(&xd, &axd);
        assert!((env.left_op(&x, 3).unwrap()[0] - quad).abs() < 1e-11 * quad.abs().max(1.0));
        assert!((env.right_op(&x, 0).unwrap()[0] - quad).abs() < 1e-11 * quad.abs().max(1.0));
        let xy = x.dot(&y).unwrap();
        assert!((env.left_rhs(&x, 3).unwrap()[0] - xy).abs() < 1e-12 * xy.abs().max(1.0));
        assert!((env.right_rhs(&x, 0).unwrap()[0] - xy).abs() < 1e-12 * xy.abs().max(1.0));
    }

    #[test]
    fn stale_slabs_are_detected() {
        let mut x = TtVector::random(&[2, 3, 2], &[1, 2, 2, 1], 3).unwrap().orthogonalize(0);
        let a = TtMatrix::identity(&[2, 3, 2]).unwrap();
        let mut env = EnvironmentCache::build(&a, &x, &x).unwrap();
        let y = x.clone();
        x.left_orthogonalize_core(0);
        assert!(matches!(env.left_op(&x, 1), Err(Error::StaleEnvironment(_))));
        assert!(matches!(env.right_op(&x, 1), Err(Error::StaleEnvironment(_))));
        assert!(env.right_op(&x, 2).is_ok());
        env.update_left(&a, &y, &x, 0).unwrap();
        assert!(env.left_op(&x, 1).is_ok());
    }
}
