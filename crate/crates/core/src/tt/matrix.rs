//! Tensor-train operators.
//!
//! Core `k` has dims `(R_{k-1}, n_k, m_k, R_k)` (left rank, row index,
//! column index, right rank) with the left rank fastest. Each core carries two
//! prepared matrix forms and a sparse triplet list so that the operator can be
//! applied to environment-shaped tensors without re-permuting the core.

use crate::contract::{contract, gemm, numel, permute};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::tt::vector::{dense_size, Core3, TtVector, DEFAULT_DENSE_CAP};

const SPARSE_FILL: f64 = 0.3;

/// One operator core plus its prepared kernels.
#[derive(Debug, Clone)]
pub struct OpCore {
    r_left: usize,
    rows: usize,
    cols: usize,
    r_right: usize,
    data: Vec<f64>,
    /// `(γ j) x (i δ)`.
    fwd: Vec<f64>,
    /// `(j δ) x (γ i)`.
    bwd: Vec<f64>,
    /// `(γ, i, j, δ, value)`.
    triplets: Vec<(usize, usize, usize, usize, f64)>,
    sparse: bool,
}

impl OpCore {
    pub fn new(r_left: usize, rows: usize, cols: usize, r_right: usize, data: Vec<f64>) -> Result<Self> {
        if r_left == 0 || rows == 0 || cols == 0 || r_right == 0 {
            return Err(Error::Input("operator core dimensions must be positive".into()));
        }
        let dims = [r_left, rows, cols, r_right];
        if data.len() != numel(&dims) {
            return Err(Error::Shape(format!(
                "operator core {dims:?} needs {} entries, got {}",
                numel(&dims),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("operator core has non-finite entries".into()));
        }
        let fwd = permute(&data, &dims, &[0, 2, 1, 3]);
        let bwd = permute(&data, &dims, &[2, 3, 0, 1]);
        let mut triplets = Vec::new();
        for d in 0..r_right {
            for j in 0..cols {
                for i in 0..rows {
                    for g in 0..r_left {
                        let v = data[g + r_left * (i + rows * (j + cols * d))];
                        if v != 0.0 {
                            triplets.push((g, i, j, d, v));
                        }
                    }
                }
            }
        }
        let sparse = (triplets.len() as f64) <= SPARSE_FILL * data.len() as f64;
        Ok(Self {
            r_left,
            rows,
            cols,
            r_right,
            data,
            fwd,
            bwd,
            triplets,
            sparse,
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.r_left, self.rows, self.cols, self.r_right]
    }

    pub fn r_left(&self) -> usize {
        self.r_left
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn r_right(&self) -> usize {
        self.r_right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, g: usize, i: usize, j: usize, d: usize) -> f64 {
        self.data[g + self.r_left * (i + self.rows * (j + self.cols * d))]
    }

    /// `out(l, i, δ, t) = Σ_{γ, j} A(γ, i, j, δ) t(l, γ, j, t)` for input dims `(lead, γ, j, trail)`.
    pub(crate) fn forward(&self, input: &[f64], lead: usize, trail: usize) -> Vec<f64> {
        let (g, n, m, dl) = (self.r_left, self.rows, self.cols, self.r_right);
        debug_assert_eq!(input.len(), lead * g * m * trail);
        let in_block = lead * g * m;
        let out_block = lead * n * dl;
        let mut out = vec![0.0; out_block * trail];
        if self.sparse {
            for &(gi, i, j, d, v) in &self.triplets {
                let src = lead * (gi + g * j);
                let dst = lead * (i + n * d);
                for t in 0..trail {
                    let s = &input[t * in_block + src..t * in_block + src + lead];
                    let o = &mut out[t * out_block + dst..t * out_block + dst + lead];
                    for (oo, ss) in o.iter_mut().zip(s) {
                        *oo += v * ss;
                    }
                }
            }
        } else if lead == 1 {
            gemm(n * dl, g * m, trail, &self.fwd, true, input, false, 0.0, &mut out);
        } else {
            for t in 0..trail {
                gemm(
                    lead,
                    g * m,
                    n * dl,
                    &input[t * in_block..(t + 1) * in_block],
                    false,
                    &self.fwd,
                    false,
                    0.0,
                    &mut out[t * out_block..(t + 1) * out_block],
                );
            }
        }
        out
    }

    /// `out(l, γ, i, t) = Σ_{j, δ} A(γ, i, j, δ) t(l, j, δ, t)` for input dims `(lead, j, δ, trail)`.
    pub(crate) fn backward(&self, input: &[f64], lead: usize, trail: usize) -> Vec<f64> {
        let (g, n, m, dl) = (self.r_left, self.rows, self.cols, self.r_right);
        debug_assert_eq!(input.len(), lead * m * dl * trail);
        let in_block = lead * m * dl;
        let out_block = lead * g * n;
        let mut out = vec![0.0; out_block * trail];
        if self.sparse {
            for &(gi, i, j, d, v) in &self.triplets {
                let src = lead * (j + m * d);
                let dst = lead * (gi + g * i);
                for t in 0..trail {
                    let s = &input[t * in_block + src..t * in_block + src + lead];
                    let o = &mut out[t * out_block + dst..t * out_block + dst + lead];
                    for (oo, ss) in o.iter_mut().zip(s) {
                        *oo += v * ss;
                    }
                }
            }
        } else if lead == 1 {
            gemm(g * n, m * dl, trail, &self.bwd, true, input, false, 0.0, &mut out);
        } else {
            for t in 0..trail {
                gemm(
                    lead,
                    m * dl,
                    g * n,
                    &input[t * in_block..(t + 1) * in_block],
                    false,
                    &self.bwd,
                    false,
                    0.0,
                    &mut out[t * out_block..(t + 1) * out_block],
                );
            }
        }
        out
    }
}

/// A linear operator in TT format.
#[derive(Debug, Clone)]
pub struct TtMatrix {
    cores: Vec<OpCore>,
}

impl TtMatrix {
    pub fn from_cores(cores: Vec<OpCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Input("an operator needs at least one core".into()));
        }
        if cores[0].r_left != 1 || cores[cores.len() - 1].r_right != 1 {
            return Err(Error::Input("operator boundary ranks must be 1".into()));
        }
        for k in 1..cores.len() {
            if cores[k - 1].r_right != cores[k].r_left {
                return Err(Error::Shape(format!(
                    "operator rank chain broken between cores {} and {k}",
                    k - 1
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Identity with unit ranks.
    pub fn identity(mode_sizes: &[usize]) -> Result<Self> {
        let cores = mode_sizes
            .iter()
            .map(|&n| {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    data[i + n * i] = 1.0;
                }
                OpCore::new(1, n, n, 1, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cores(cores)
    }

    /// Random square operator with i.i.d. standard normal core entries.
    pub fn random(mode_sizes: &[usize], ranks: &[usize], seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let d = mode_sizes.len();
        if ranks.len() != d + 1 || d == 0 {
            return Err(Error::Input("rank vector must have d + 1 entries".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cores = (0..d)
            .map(|k| {
                let n = mode_sizes[k];
                let len = ranks[k] * n * n * ranks[k + 1];
                let data = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
                OpCore::new(ranks[k], n, n, ranks[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cores(cores)
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn row_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.rows).collect()
    }

    pub fn col_modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.cols).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.cores.iter().map(|c| c.r_right)).collect()
    }

    pub fn core(&self, k: usize) -> &OpCore {
        &self.cores[k]
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn is_square(&self) -> bool {
        self.cores.iter().all(|c| c.rows == c.cols)
    }

    pub fn check_square_against(&self, x: &TtVector) -> Result<()> {
        if !self.is_square() || self.col_modes() != x.mode_sizes() {
            return Err(Error::Shape(format!(
                "operator modes {:?} x {:?} do not match vector modes {:?}",
                self.row_modes(),
                self.col_modes(),
                x.mode_sizes()
            )));
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        self.to_dense_with_cap(DEFAULT_DENSE_CAP * 16)
    }

    /// Dense matrix with row multi-index `(i_1, ..., i_d)` and column
    /// multi-index `(j_1, ..., j_d)`, first index fastest in both.
    pub fn to_dense_with_cap(&self, cap: usize) -> Result<DenseMatrix> {
        let rows = dense_size(&self.row_modes())?;
        let cols = dense_size(&self.col_modes())?;
        let total = rows.checked_mul(cols).unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::CapExceeded {
                requested: total,
                cap,
            });
        }
        let mut acc = vec![1.0];
        let mut dims = vec![1usize, 1, 1];
        for c in &self.cores {
            let (t, td) = contract(&acc, &dims, &[2], &c.data, &c.dims(), &[0]);
            // (Ip, Jp, i, j, R) -> (Ip, i, Jp, j, R)
            let p = permute(&t, &td, &[0, 2, 1, 3, 4]);
            dims = vec![td[0] * td[2], td[1] * td[3], td[4]];
            acc = p;
        }
        Ok(DenseMatrix::from_column_slice(rows, cols, &acc))
    }

    /// Matrix-vector product with result ranks `R_k r_k`.
    pub fn matvec(&self, x: &TtVector) -> Result<TtVector> {
        if self.col_modes() != x.mode_sizes() {
            return Err(Error::Shape(format!(
                "operator column modes {:?} do not match vector modes {:?}",
                self.col_modes(),
                x.mode_sizes()
            )));
        }
        let cores = self
            .cores
            .iter()
            .zip(x.cores())
            .map(|(a, xc)| {
                // (γ, i, δ, a, b) -> (γ, a, i, δ, b)
                let (t, td) = contract(&a.data, &a.dims(), &[2], xc.data(), &xc.dims(), &[1]);
                let p = permute(&t, &td, &[0, 3, 1, 2, 4]);
                Core3::from_parts(a.r_left * xc.r_left(), a.rows, a.r_right * xc.r_right(), p)
            })
            .collect();
        Ok(TtVector::from_cores_unchecked(cores, None))
    }

    /// Applies the operator to a dense tensor without forming its dense matrix.
    pub fn apply_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        let cols = dense_size(&self.col_modes())?;
        if x.len() != cols {
            return Err(Error::Shape(format!("dense vector has {} entries, expected {cols}", x.len())));
        }
        let mut t = x.to_vec();
        let mut lead = 1usize;
        let mut trail = cols;
        for c in &self.cores {
            trail /= c.cols;
            t = c.forward(&t, lead, trail);
            lead *= c.rows;
        }
        Ok(t)
    }

    /// Checks `A = Aᵀ` on the dense realization to relative tolerance `rel_tol`.
    pub fn assert_symmetric(&self, rel_tol: f64) -> Result<()> {
        let a = self.to_dense()?;
        if !a.is_square() {
            return Err(Error::Input("operator is not square".into()));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        let asym = (&a - a.transpose()).amax();
        if asym > rel_tol * scale {
            return Err(Error::Input(format!(
                "operator is not symmetric: max |A - Aᵀ| = {asym:e} (scale {scale:e})"
            )));
        }
        Ok(())
    }

    /// Transposed operator, obtained by swapping row and column indices core-wise.
    pub fn transpose(&self) -> TtMatrix {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let data = permute(&c.data, &c.dims(), &[0, 2, 1, 3]);
                OpCore::new(c.r_left, c.cols, c.rows, c.r_right, data).expect("valid core")
            })
            .collect();
        TtMatrix { cores }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::kron;

    fn lap1(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        })
    }

    fn lap_tt2(n: usize) -> TtMatrix {
        let mut c0 = vec![0.0; 2 * n * n];
        let mut c1 = vec![0.0; 2 * n * n];
        let l = lap1(n);
        for j in 0..n {
            for i in 0..n {
                // first core: [Δ, I] along the right rank
                c0[i + n * j] = l[(i, j)];
                c0[i + n * j + n * n] = if i == j { 1.0 } else { 0.0 };
                // last core: [I; Δ] along the left rank
                c1[2 * (i + n * j)] = if i == j { 1.0 } else { 0.0 };
                c1[1 + 2 * (i + n * j)] = l[(i, j)];
            }
        }
        TtMatrix::from_cores(vec![
            OpCore::new(1, n, n, 2, c0).unwrap(),
            OpCore::new(2, n, n, 1, c1).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn identity_matvec() {
        let x = TtVector::random(&[3, 4, 2], &[1, 2, 2, 1], 1).unwrap();
        let id = TtMatrix::identity(&[3, 4, 2]).unwrap();
        let y = id.matvec(&x).unwrap();
        assert_eq!(y.to_dense().unwrap(), x.to_dense().unwrap());
        assert_eq!(id.to_dense().unwrap(), DenseMatrix::identity(24, 24));
    }

    #[test]
    fn dense_assembly_is_kron_sum() {
        let a = lap_tt2(4);
        let n = 4;
        let expect = kron(&lap1(n), &DenseMatrix::identity(n, n)) + kron(&DenseMatrix::identity(n, n), &lap1(n));
        assert!((a.to_dense().unwrap() - expect).amax() < 1e-14);
        let e = TtVector::ones(&[4, 4]).unwrap();
        let y = a.matvec(&e).unwrap().to_dense().unwrap();
        let dense = a.to_dense().unwrap() * nalgebra::DVector::from_element(16, 1.0);
        assert!(y.iter().zip(dense.iter()).all(|(p, q)| (p - q).abs() < 1e-14));
    }

    #[test]
    fn random_matvec_matches_dense() {
        let a = TtMatrix::random(&[2, 3, 2], &[1, 2, 2, 1], 3).unwrap();
        let x = TtVector::random(&[2, 3, 2], &[1, 3, 2, 1], 4).unwrap();
        let y = a.matvec(&x).unwrap();
        assert_eq!(y.ranks(), vec![1, 6, 4, 1]);
        let expect = (a.to_dense().unwrap() * nalgebra::DVector::from_vec(x.to_dense().unwrap())).as_slice().to_vec();
        let got = y.to_dense().unwrap();
        let scale = crate::contract::norm2(&expect);
        assert!(got.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-12 * scale));
        let mf = a.apply_dense(&x.to_dense().unwrap()).unwrap();
        assert!(mf.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-12 * scale));
    }

    #[test]
    fn kernels_agree_between_sparse_and_dense_paths() {
        let mut data: Vec<f64> = (0..2 * 3 * 3 * 2).map(|v| (v as f64 * 0.31).sin()).collect();
        let dense_core = OpCore::new(2, 3, 3, 2, data.clone()).unwrap();
        assert!(!dense_core.sparse);
        let mut sparse_core = dense_core.clone();
        sparse_core.sparse = true;
        for (lead, trail) in [(1, 1), (1, 5), (3, 1), (4, 2)] {
            let input: Vec<f64> = (0..lead * 6 * trail).map(|v| (v as f64).cos()).collect();
            let a = dense_core.forward(&input, lead, trail);
            let b = sparse_core.forward(&input, lead, trail);
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-13));
            let a = dense_core.backward(&input, lead, trail);
            let b = sparse_core.backward(&input, lead, trail);
            assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-13));
        }
        data.iter_mut().skip(1).for_each(|v| *v = 0.0);
        assert!(OpCore::new(2, 3, 3, 2, data).unwrap().sparse);
    }

    #[test]
    fn symmetry_check() {
        assert!(lap_tt2(3).assert_symmetric(1e-14).is_ok());
        let a = TtMatrix::random(&[2, 2], &[1, 2, 1], 1).unwrap();
        assert!(a.assert_symmetric(1e-10).is_err());
        let at = a.transpose().to_dense().unwrap();
        assert!((at - a.to_dense().unwrap().transpose()).amax() < 1e-14);
    }

    #[test]
    fn mode_mismatch_rejected() {
        let a = TtMatrix::identity(&[2, 3]).unwrap();
        let x = TtVector::ones(&[3, 2]).unwrap();
        assert!(matches!(a.matvec(&x), Err(Error::Shape(_))));
    }
}
