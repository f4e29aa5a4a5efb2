//! Reduced systems `(Pᵀ A P) v = Pᵀ y` for one core or for a merged pair of cores.

use crate::contract::{contract, dot, matmul, permute};
use crate::dense::{conjugate_gradient, solve_spd, DenseMatrix};
use crate::error::{Error, Result};
use crate::projections::env::EnvironmentCache;
use crate::tt::matrix::{OpCore, TtMatrix};
use crate::tt::vector::TtVector;

/// Applies the single-core local operator to `v` with dims `(r0, n, r1)`.
pub(crate) fn apply_single(left: &[f64], op: &OpCore, right: &[f64], dims: [usize; 3], v: &[f64]) -> Vec<f64> {
    let [r0, n, r1] = dims;
    let t1 = matmul(r0 * op.r_left(), r0, n * r1, left, false, v, false);
    let t2 = op.forward(&t1, r0, r1);
    matmul(r0 * n, op.r_right() * r1, r1, &t2, false, right, false)
}

fn apply_pair(left: &[f64], ops: [&OpCore; 2], right: &[f64], dims: [usize; 4], v: &[f64]) -> Vec<f64> {
    let [r0, n1, n2, r1] = dims;
    let t1 = matmul(r0 * ops[0].r_left(), r0, n1 * n2 * r1, left, false, v, false);
    let t2 = ops[0].forward(&t1, r0, n2 * r1);
    let t3 = ops[1].forward(&t2, r0 * n1, r1);
    matmul(r0 * n1 * n2, ops[1].r_right() * r1, r1, &t3, false, right, false)
}

/// A reduced SPD system on one core (`modes = [n_k]`) or on a superblock
/// (`modes = [n_k, n_{k+1}]`). Vectors are laid out as `(r_left, modes..., r_right)`.
#[derive(Debug, Clone)]
pub struct LocalSystem<'a> {
    pub core: usize,
    ops: Vec<&'a OpCore>,
    left: Vec<f64>,
    right: Vec<f64>,
    rhs: Vec<f64>,
    r_left: usize,
    modes: Vec<usize>,
    r_right: usize,
}

impl<'a> LocalSystem<'a> {
    /// `(r_left, n, r_right)` where `n` is the product of the local mode sizes.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.r_left, self.modes.iter().product(), self.r_right)
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.r_left * self.modes.iter().product::<usize>() * self.r_right
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len(), "local vector length");
        match self.ops.as_slice() {
            [op] => apply_single(&self.left, op, &self.right, [self.r_left, self.modes[0], self.r_right], v),
            [a, b] => apply_pair(
                &self.left,
                [a, b],
                &self.right,
                [self.r_left, self.modes[0], self.modes[1], self.r_right],
                v,
            ),
            _ => unreachable!("local systems span one or two cores"),
        }
    }

    /// `vᵀ B v − 2 vᵀ g`, which equals the global energy of the tensor with this core.
    pub fn energy(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply(v)) - 2.0 * dot(v, &self.rhs)
    }

    /// Assembled local matrix.
    pub fn to_dense(&self) -> DenseMatrix {
        let (r0, r1) = (self.r_left, self.r_right);
        let op0 = self.ops[0];
        let (t, td) = contract(&self.left, &[r0, op0.r_left(), r0], &[1], op0.data(), &op0.dims(), &[0]);
        // (a, b, i1, j1, δ1)
        let (t, td, perm) = if self.ops.len() == 1 {
            let rr = op0.r_right();
            let (t, td) = contract(&t, &td, &[4], &self.right, &[rr, r1, r1], &[0]);
            (t, td, vec![0, 2, 5, 1, 3, 4])
        } else {
            let op1 = self.ops[1];
            let (t, td) = contract(&t, &td, &[4], op1.data(), &op1.dims(), &[0]);
            let (t, td) = contract(&t, &td, &[6], &self.right, &[op1.r_right(), r1, r1], &[0]);
            (t, td, vec![0, 2, 4, 7, 1, 3, 5, 6])
        };
        let p = permute(&t, &td, &perm);
        let n = self.len();
        let m = DenseMatrix::from_column_slice(n, n, &p);
        (&m + m.transpose()) * 0.5
    }
}

impl EnvironmentCache {
    /// Reduced system for core `k`.
    pub fn local_system<'a>(&self, a: &'a TtMatrix, y: &TtVector, x: &TtVector, k: usize) -> Result<LocalSystem<'a>> {
        let c = x.core(k);
        let left = self.left_op(x, k)?.to_vec();
        let right = self.right_op(x, k + 1)?.to_vec();
        let ly = self.left_rhs(x, k)?;
        let ry = self.right_rhs(x, k + 1)?;
        let yc = y.core(k);
        let t = matmul(c.r_left(), yc.r_left(), yc.n() * yc.r_right(), ly, false, yc.data(), false);
        let rhs = matmul(c.r_left() * c.n(), yc.r_right(), c.r_right(), &t, false, ry, false);
        Ok(LocalSystem {
            core: k,
            ops: vec![a.core(k)],
            left,
            right,
            rhs,
            r_left: c.r_left(),
            modes: vec![c.n()],
            r_right: c.r_right(),
        })
    }

    /// Reduced system for the superblock of cores `k` and `k + 1`.
    pub fn local_system_two_block<'a>(
        &self,
        a: &'a TtMatrix,
        y: &TtVector,
        x: &TtVector,
        k: usize,
    ) -> Result<LocalSystem<'a>> {
        if k + 1 >= x.d() {
            return Err(Error::Index(format!("superblock ({k}, {}) exceeds d = {}", k + 1, x.d())));
        }
        let (c0, c1) = (x.core(k), x.core(k + 1));
        let left = self.left_op(x, k)?.to_vec();
        let right = self.right_op(x, k + 2)?.to_vec();
        let ly = self.left_rhs(x, k)?;
        let ry = self.right_rhs(x, k + 2)?;
        let (y0, y1) = (y.core(k), y.core(k + 1));
        let t = matmul(c0.r_left(), y0.r_left(), y0.n() * y0.r_right(), ly, false, y0.data(), false);
        let t = matmul(c0.r_left() * y0.n(), y1.r_left(), y1.n() * y1.r_right(), &t, false, y1.data(), false);
        let rhs = matmul(c0.r_left() * c0.n() * c1.n(), y1.r_right(), c1.r_right(), &t, false, ry, false);
        Ok(LocalSystem {
            core: k,
            ops: vec![a.core(k), a.core(k + 1)],
            left,
            right,
            rhs,
            r_left: c0.r_left(),
            modes: vec![c0.n(), c1.n()],
            r_right: c1.r_right(),
        })
    }
}

/// Local solver settings.
#[derive(Debug, Clone, Copy)]
pub struct LocalSolveOptions {
    /// Systems with at most this many unknowns are assembled and factorized.
    pub dense_threshold: usize,
    /// Relative residual target of the iterative path.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for LocalSolveOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 256,
            rel_tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// How a local system was solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalMethod {
    Dense,
    Cg { iterations: usize, rel_residual: f64 },
}

#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub v: Vec<f64>,
    pub method: LocalMethod,
}

/// Solves a local system, directly when small and by warm-started CG otherwise.
pub fn solve_local(sys: &LocalSystem<'_>, warm: Option<&[f64]>, opts: &LocalSolveOptions) -> Result<LocalSolution> {
    let n = sys.len();
    let res = if n <= opts.dense_threshold {
        solve_spd(&sys.to_dense(), sys.rhs()).map(|v| LocalSolution {
            v,
            method: LocalMethod::Dense,
        })
    } else {
        let zero;
        let x0 = match warm {
            Some(w) if w.len() == n => w,
            _ => {
                zero = vec![0.0; n];
                &zero
            }
        };
        conjugate_gradient(|v| sys.apply(v), sys.rhs(), x0, opts.rel_tol, opts.max_iter).map(|out| LocalSolution {
            v: out.x,
            method: LocalMethod::Cg {
                iterations: out.iterations,
                rel_residual: out.rel_residual,
            },
        })
    };
    res.map_err(|e| e.at_core(sys.core))
}
