//! Randomized invariants of the TT data model checked against dense oracles.

use nalgebra::DMatrix;
use proptest::prelude::*;
use tt_amen::tt::vector::feasible_ranks;
use tt_amen::{Core3, TtMatrix, TtVector};

fn shape() -> impl Strategy<Value = (Vec<usize>, usize, u64)> {
    (1usize..=4, 2usize..=4, 1usize..=4, any::<u64>())
        .prop_map(|(d, n, r, seed)| ((0..d).map(|k| n + (k % 2)).collect(), r, seed))
}

fn random_tt(modes: &[usize], r: usize, seed: u64) -> TtVector {
    TtVector::random(modes, &feasible_ranks(modes, r), seed).unwrap()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|q| q * q).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = m.clone().singular_values();
    let top = s.max();
    s.iter().filter(|&&v| v > 1e-10 * top).count()
}

/// Row-major unfolding `(i_1..i_k) × (i_{k+1}..i_d)` of a first-index-fastest tensor.
fn unfolding(dense: &[f64], modes: &[usize], k: usize) -> DMatrix<f64> {
    let rows: usize = modes[..k].iter().product();
    DMatrix::from_column_slice(rows, dense.len() / rows, dense)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gauge_transform_leaves_tensor_unchanged((modes, r, seed) in shape(), k_pick in any::<usize>(), mix in -0.4f64..0.4) {
        prop_assume!(modes.len() >= 2);
        let x = random_tt(&modes, r, seed);
        let k = k_pick % (modes.len() - 1);
        let rk = x.core(k).r_right();
        let h = DMatrix::from_fn(rk, rk, |i, j| if i == j { 1.0 } else { mix * ((i * 7 + j * 3) as f64).sin() });
        let h_inv = h.clone().try_inverse().unwrap();
        let (c, next) = (x.core(k), x.core(k + 1));
        let left = c.left_unfolding() * &h;
        let right = &h_inv * next.right_unfolding();
        let mut cores = x.cores().to_vec();
        cores[k] = Core3::new(c.r_left(), c.n(), rk, left.as_slice().to_vec()).unwrap();
        cores[k + 1] = Core3::new(rk, next.n(), next.r_right(), right.as_slice().to_vec()).unwrap();
        let y = TtVector::from_cores(cores).unwrap();
        prop_assert!(rel_diff(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-12);
    }

    #[test]
    fn rounded_ranks_are_unfolding_ranks((modes, r, seed) in shape()) {
        let x = TtVector::random(&modes, &vec![1].into_iter().chain(std::iter::repeat(r).take(modes.len() - 1)).chain([1]).collect::<Vec<_>>(), seed).unwrap();
        let dense = x.to_dense().unwrap();
        let rounded = x.round(0.0, None);
        let ranks = rounded.ranks();
        for k in 1..modes.len() {
            prop_assert_eq!(ranks[k], numerical_rank(&unfolding(&dense, &modes, k)), "unfolding {}", k);
        }
    }

    #[test]
    fn algebra_matches_dense((modes, r, seed) in shape(), ra in 1usize..=2, alpha in -3.0f64..3.0) {
        let x = random_tt(&modes, r, seed);
        let y = random_tt(&modes, r.max(2) - 1, seed ^ 0x5a5a);
        let (dx, dy) = (x.to_dense().unwrap(), y.to_dense().unwrap());
        prop_assume!(dx.len() <= 1 << 16);

        let sum: Vec<f64> = dx.iter().zip(&dy).map(|(p, q)| p + q).collect();
        prop_assert!(rel_diff(&x.add(&y).unwrap().to_dense().unwrap(), &sum) < 1e-12);

        let dot: f64 = dx.iter().zip(&dy).map(|(p, q)| p * q).sum();
        let scale = dx.iter().map(|v| v.abs()).sum::<f64>() * dy.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!((x.dot(&y).unwrap() - dot).abs() <= 1e-12 * scale.max(1.0));

        let scaled: Vec<f64> = dx.iter().map(|v| alpha * v).collect();
        let got = x.scale(alpha).to_dense().unwrap();
        prop_assert!(got.iter().zip(&scaled).all(|(p, q)| (p - q).abs() <= 1e-13 * q.abs().max(1.0)));

        let a = TtMatrix::random(&modes, &feasible_ranks(&modes, ra).iter().map(|&v| v.min(ra)).collect::<Vec<_>>(), seed.wrapping_add(1)).unwrap();
        let ad = a.to_dense().unwrap();
        let want = &ad * nalgebra::DVector::from_column_slice(&dx);
        prop_assert!(rel_diff(&a.matvec(&x).unwrap().to_dense().unwrap(), want.as_slice()) < 1e-12);
    }

    #[test]
    fn rounding_meets_its_tolerance((modes, r, seed) in shape(), tol in 1e-3f64..0.5) {
        let x = random_tt(&modes, r, seed);
        let xt = x.round(tol, None);
        let dx = x.to_dense().unwrap();
        let dt = xt.to_dense().unwrap();
        let delta: Vec<f64> = dx.iter().zip(&dt).map(|(p, q)| p - q).collect();
        let err = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nx = x.norm();
        prop_assert!(err <= tol * nx * (1.0 + 1e-10), "err {} budget {}", err, tol * nx);
        let cross: f64 = dt.iter().zip(&delta).map(|(p, q)| p * q).sum();
        prop_assert!(cross.abs() <= 1e-10 * nx * nx);
    }

    #[test]
    fn pivot_core_carries_the_norm((modes, r, seed) in shape(), k_pick in any::<usize>()) {
        let x = random_tt(&modes, r, seed);
        let k = k_pick % modes.len();
        let xo = x.orthogonalize(k);
        let n = x.norm();
        prop_assert!((xo.core(k).frobenius_norm() - n).abs() <= 1e-12 * n);
        prop_assert!(rel_diff(&xo.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-12);
    }
}

#[test]
fn evaluate_agrees_with_densification_at_sampled_indices() {
    let modes = [3, 4, 2, 3];
    let x = random_tt(&modes, 3, 17);
    let dense = x.to_dense().unwrap();
    let mut state = 12345u64;
    for _ in 0..20 {
        let mut idx = Vec::new();
        let mut flat = 0;
        let mut stride = 1;
        for &n in &modes {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let i = (state >> 33) as usize % n;
            idx.push(i);
            flat += i * stride;
            stride *= n;
        }
        assert!((x.evaluate(&idx).unwrap() - dense[flat]).abs() < 1e-13);
    }
}

#[test]
fn interface_boundaries() {
    let modes = [2, 3, 2];
    let x = random_tt(&modes, 2, 4);
    let dense = x.to_dense().unwrap();
    let (le, gt) = x.interfaces(0).unwrap();
    assert_eq!((le.nrows(), le.ncols()), (1, 1));
    assert_eq!(le[(0, 0)], 1.0);
    assert!(rel_diff(gt.as_slice(), &dense) < 1e-14);
    let (le, gt) = x.interfaces(3).unwrap();
    assert_eq!((gt.nrows(), gt.ncols()), (1, 1));
    assert_eq!(gt[(0, 0)], 1.0);
    assert!(rel_diff(le.as_slice(), &dense) < 1e-14);
}

#[test]
fn sum_with_zero_and_doubling() {
    let modes = [3, 3, 3];
    let x = random_tt(&modes, 2, 9);
    let z = TtVector::zeros(&modes).unwrap();
    assert!(rel_diff(&x.add(&z).unwrap().to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-15);
    let e = TtVector::ones(&modes).unwrap();
    let two = e.add(&e).unwrap();
    assert_eq!(two.ranks(), vec![1, 2, 2, 1]);
    assert!(two.to_dense().unwrap().iter().all(|&v| (v - 2.0).abs() < 1e-15));
    assert_eq!(x.dot(&z).unwrap(), 0.0);
    assert!(x.scale(0.0).to_dense().unwrap().iter().all(|&v| v == 0.0));
}
