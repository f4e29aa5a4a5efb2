//! Column-major tensor helpers: axis permutation, strided GEMM and pairwise
//! contraction. A tensor with dims `[d0, d1, ...]` stores entry
//! `(i0, i1, ...)` at `i0 + d0 * (i1 + d1 * (...))`.

pub(crate) fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// `c = beta * c + op(a) * op(b)` with column-major `op(a)` of size `m x k`
/// and `op(b)` of size `k x n`. `trans_a` means `a` is stored as `k x m`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if trans_a { (k as isize, 1) } else { (1, m as isize) };
    let (rsb, csb) = if trans_b { (n as isize, 1) } else { (1, k as isize) };
    // SAFETY: the slices are at least as long as the strided extents checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

pub(crate) fn matmul(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, a, trans_a, b, trans_b, 0.0, &mut c);
    c
}

/// Returns the tensor with axes reordered so that output axis `q` is input axis `perm[q]`.
pub(crate) fn permute(data: &[f64], dims: &[usize], perm: &[usize]) -> Vec<f64> {
    let nd = dims.len();
    debug_assert_eq!(perm.len(), nd);
    debug_assert_eq!(data.len(), numel(dims));
    if perm.iter().enumerate().all(|(q, &p)| q == p) {
        return data.to_vec();
    }
    let mut in_strides = vec![1usize; nd];
    for q in 1..nd {
        in_strides[q] = in_strides[q - 1] * dims[q - 1];
    }
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let mut idx = vec![0usize; nd];
    let mut offset = 0usize;
    let inner = out_dims[0];
    let inner_stride = strides[0];
    loop {
        for t in 0..inner {
            out.push(data[offset + t * inner_stride]);
        }
        // odometer over the outer axes
        let mut q = 1;
        loop {
            if q == nd {
                return out;
            }
            idx[q] += 1;
            offset += strides[q];
            if idx[q] < out_dims[q] {
                break;
            }
            offset -= strides[q] * out_dims[q];
            idx[q] = 0;
            q += 1;
        }
    }
}

/// Contracts axes `a_axes` of `a` with axes `b_axes` of `b` (pairwise).
/// The result carries the free axes of `a` (in order) followed by the free
/// axes of `b`.
pub(crate) fn contract(
    a: &[f64],
    a_dims: &[usize],
    a_axes: &[usize],
    b: &[f64],
    b_dims: &[usize],
    b_axes: &[usize],
) -> (Vec<f64>, Vec<usize>) {
    assert_eq!(a_axes.len(), b_axes.len());
    for (&p, &q) in a_axes.iter().zip(b_axes) {
        assert_eq!(a_dims[p], b_dims[q], "contracted extents differ");
    }
    let a_free: Vec<usize> = (0..a_dims.len()).filter(|i| !a_axes.contains(i)).collect();
    let b_free: Vec<usize> = (0..b_dims.len()).filter(|i| !b_axes.contains(i)).collect();
    let m: usize = a_free.iter().map(|&i| a_dims[i]).product();
    let k: usize = a_axes.iter().map(|&i| a_dims[i]).product();
    let n: usize = b_free.iter().map(|&i| b_dims[i]).product();

    let free_then_sum: Vec<usize> = a_free.iter().chain(a_axes).copied().collect();
    let sum_then_free: Vec<usize> = a_axes.iter().chain(&a_free).copied().collect();
    let (a_mat, trans_a) = if is_identity(&free_then_sum) {
        (None, false)
    } else if is_identity(&sum_then_free) {
        (None, true)
    } else {
        (Some(permute(a, a_dims, &free_then_sum)), false)
    };

    let sum_then_free_b: Vec<usize> = b_axes.iter().chain(&b_free).copied().collect();
    let free_then_sum_b: Vec<usize> = b_free.iter().chain(b_axes).copied().collect();
    let (b_mat, trans_b) = if is_identity(&sum_then_free_b) {
        (None, false)
    } else if is_identity(&free_then_sum_b) {
        (None, true)
    } else {
        (Some(permute(b, b_dims, &sum_then_free_b)), false)
    };

    let c = matmul(
        m,
        k,
        n,
        a_mat.as_deref().unwrap_or(a),
        trans_a,
        b_mat.as_deref().unwrap_or(b),
        trans_b,
    );
    let dims = a_free
        .iter()
        .map(|&i| a_dims[i])
        .chain(b_free.iter().map(|&i| b_dims[i]))
        .collect();
    (c, dims)
}

fn is_identity(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(q, &p)| q == p)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for j in 0..n {
            for i in 0..m {
                for l in 0..k {
                    c[i + m * j] += a[i + m * l] * b[l + k * j];
                }
            }
        }
        c
    }

    #[test]
    fn permute_transposes_matrix() {
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let t = permute(&a, &[2, 3], &[1, 0]);
        assert_eq!(t, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn permute_three_axes() {
        let dims = [2, 3, 4];
        let a: Vec<f64> = (0..24).map(f64::from).collect();
        let p = permute(&a, &dims, &[2, 0, 1]);
        for i0 in 0..2 {
            for i1 in 0..3 {
                for i2 in 0..4 {
                    let src = a[i0 + 2 * (i1 + 3 * i2)];
                    let dst = p[i2 + 4 * (i0 + 2 * i1)];
                    assert_eq!(src, dst);
                }
            }
        }
    }

    #[test]
    fn gemm_with_transposes() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 * 0.5 - 1.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect(); // 3x4
        let c = matmul(2, 3, 4, &a, false, &b, false);
        for (x, y) in c.iter().zip(naive_matmul(2, 3, 4, &a, &b)) {
            assert!((x - y).abs() < 1e-14);
        }
        let at = permute(&a, &[2, 3], &[1, 0]);
        let bt = permute(&b, &[3, 4], &[1, 0]);
        let c2 = matmul(2, 3, 4, &at, true, &bt, true);
        for (x, y) in c.iter().zip(&c2) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn contract_matches_loops() {
        let ad = [2, 3, 4];
        let bd = [4, 5, 3];
        let a: Vec<f64> = (0..24).map(|v| (v as f64 * 0.37).cos()).collect();
        let b: Vec<f64> = (0..60).map(|v| (v as f64 * 0.11).sin()).collect();
        let (c, cd) = contract(&a, &ad, &[1, 2], &b, &bd, &[2, 0]);
        assert_eq!(cd, vec![2, 5]);
        for i in 0..2 {
            for q in 0..5 {
                let mut s = 0.0;
                for j in 0..3 {
                    for l in 0..4 {
                        s += a[i + 2 * (j + 3 * l)] * b[l + 4 * (q + 5 * j)];
                    }
                }
                assert!((c[i + 2 * q] - s).abs() < 1e-13);
            }
        }
    }
}
