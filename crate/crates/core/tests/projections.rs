//! Reduced systems against dense frame reductions.

use nalgebra::{DMatrix, DVector};
use tt_amen::dense::symmetric_eigen_range;
use tt_amen::problems::{kron_sum_tt, laplacian_1d, laplacian_tt, random_rhs_tt};
use tt_amen::projections::galerkin::{apply_correction, enrich};
use tt_amen::projections::{frame_dense, galerkin_correction, EnvironmentCache, LocalSolveOptions};
use tt_amen::solvers::descent::{dense_subspace_step, prefix_frame};
use tt_amen::solvers::{approximate_residual, energy};
use tt_amen::{Core3, TtVector};

fn rank_of(m: &DMatrix<f64>) -> usize {
    let s = m.clone().singular_values();
    let top = s.max();
    s.iter().filter(|&&v| v > 1e-9 * top).count()
}

#[test]
fn local_spectrum_stays_inside_the_operator_spectrum() {
    let (d, n) = (3, 5);
    let a = laplacian_tt(d, n, false).unwrap();
    let (lo, hi) = symmetric_eigen_range(&a.to_dense().unwrap()).unwrap();
    let y = random_rhs_tt(d, n, 2, 3).unwrap();
    let x = TtVector::random(&[n; 3], &[1, 3, 3, 1], 6).unwrap();
    for k in 0..d {
        let xo = x.orthogonalize(k);
        let env = EnvironmentCache::build(&a, &y, &xo).unwrap();
        let sys = env.local_system(&a, &y, &xo, k).unwrap();
        let (l, h) = symmetric_eigen_range(&sys.to_dense()).unwrap();
        assert!(l >= lo - 1e-9 && h <= hi + 1e-9, "core {k}: [{l}, {h}] vs [{lo}, {hi}]");
    }
}

#[test]
fn local_operator_is_symmetric() {
    let a = laplacian_tt(3, 4, true).unwrap();
    let y = random_rhs_tt(3, 4, 2, 1).unwrap();
    let x = TtVector::random(&[4, 4, 4], &[1, 2, 3, 1], 2).unwrap();
    let env = EnvironmentCache::build(&a, &y, &x).unwrap();
    for k in 0..3 {
        let sys = env.local_system(&a, &y, &x, k).unwrap();
        let u: Vec<f64> = (0..sys.len()).map(|i| (1.7 * i as f64).sin()).collect();
        let v: Vec<f64> = (0..sys.len()).map(|i| (0.3 * i as f64).cos()).collect();
        let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| s * t).sum::<f64>();
        let (uv, vu) = (dot(&u, &sys.apply(&v)), dot(&sys.apply(&u), &v));
        assert!((uv - vu).abs() <= 1e-10 * uv.abs().max(vu.abs()));
    }
}

#[test]
fn local_residual_is_the_projected_global_residual() {
    let modes = [3, 4, 3];
    let a = kron_sum_tt(&[laplacian_1d(3, false), laplacian_1d(4, false), laplacian_1d(3, false)]).unwrap();
    let y = TtVector::random(&modes, &[1, 2, 2, 1], 8).unwrap();
    let x = TtVector::random(&modes, &[1, 2, 3, 1], 9).unwrap().orthogonalize(1);
    let env = EnvironmentCache::build(&a, &y, &x).unwrap();
    let sys = env.local_system(&a, &y, &x, 1).unwrap();
    let local: Vec<f64> = sys.rhs().iter().zip(sys.apply(x.core(1).data())).map(|(g, b)| g - b).collect();
    let ad = a.to_dense().unwrap();
    let r = DVector::from_vec(y.to_dense().unwrap()) - &ad * DVector::from_vec(x.to_dense().unwrap());
    let want = frame_dense(&x, 1).unwrap().transpose() * r;
    let scale = want.amax();
    assert!(want.iter().zip(&local).all(|(p, q)| (p - q).abs() <= 1e-11 * scale));
}

#[test]
fn enriched_frame_spans_the_four_blocks() {
    let modes = [3, 3, 3, 3];
    let t = TtVector::random(&modes, &[1, 2, 2, 2, 1], 11).unwrap();
    let s = TtVector::random(&modes, &[1, 1, 2, 1, 1], 12).unwrap();
    let sum = t.add(&s).unwrap();
    let k = 1;
    let mixed = |left: &TtVector, right: &TtVector| {
        let mut cores: Vec<Core3> = left.cores()[..k].to_vec();
        let (rl, rr) = (left.core(k).r_left(), right.core(k).r_right());
        cores.push(Core3::zeros(rl, modes[k], rr));
        cores.extend_from_slice(&right.cores()[k + 1..]);
        frame_dense(&TtVector::from_cores(cores).unwrap(), k).unwrap()
    };
    let blocks = [mixed(&t, &t), mixed(&t, &s), mixed(&s, &t), mixed(&s, &s)];
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut four = DMatrix::zeros(blocks[0].nrows(), cols);
    let mut at = 0;
    for b in &blocks {
        four.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    let frame = frame_dense(&sum, k).unwrap();
    assert_eq!(frame.ncols(), cols);
    let mut both = DMatrix::zeros(frame.nrows(), 2 * cols);
    both.columns_mut(0, cols).copy_from(&frame);
    both.columns_mut(cols, cols).copy_from(&four);
    let r = rank_of(&frame);
    assert_eq!(r, rank_of(&four));
    assert_eq!(r, rank_of(&both));
}

#[test]
fn two_mode_galerkin_correction_is_the_subspace_step() {
    let (n, d) = (5, 2);
    let a = laplacian_tt(d, n, false).unwrap();
    let y = random_rhs_tt(d, n, 2, 21).unwrap();
    let t = TtVector::random(&[n, n], &[1, 2, 1], 22).unwrap().orthogonalize(1);
    let zt = approximate_residual(&a, &y, &t, 2, 1e-14).unwrap().z.orthogonalize(1);
    let (xe, enr) = enrich(&t, 0, zt.core(0)).unwrap();
    let env = EnvironmentCache::build(&a, &y, &xe).unwrap();
    let v = galerkin_correction(&env, &a, &y, &xe, enr, &LocalSolveOptions::default())
        .unwrap()
        .unwrap();
    let x = apply_correction(&xe, enr, &v);
    let want = dense_subspace_step(
        &a.to_dense().unwrap(),
        &y.to_dense().unwrap(),
        &t.to_dense().unwrap(),
        &prefix_frame(&zt, 1).unwrap(),
    )
    .unwrap();
    let got = x.to_dense().unwrap();
    let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(got.iter().zip(&want).all(|(p, q)| (p - q).abs() <= 1e-10 * scale));
}

#[test]
fn galerkin_correction_never_raises_the_energy() {
    let (n, d) = (4, 3);
    let a = laplacian_tt(d, n, true).unwrap();
    let y = random_rhs_tt(d, n, 2, 31).unwrap();
    for seed in 0..5 {
        let t = TtVector::random(&[n; 3], &[1, 2, 2, 1], 40 + seed).unwrap().orthogonalize(1);
        let zt = approximate_residual(&a, &y, &t, 2, 1e-12).unwrap().z.orthogonalize(1);
        let (xe, enr) = enrich(&t, 0, zt.core(0)).unwrap();
        let env = EnvironmentCache::build(&a, &y, &xe).unwrap();
        let v = galerkin_correction(&env, &a, &y, &xe, enr, &LocalSolveOptions::default())
            .unwrap()
            .unwrap();
        let x = apply_correction(&xe, enr, &v);
        let (j0, j1) = (energy(&a, &y, &t).unwrap(), energy(&a, &y, &x).unwrap());
        assert!(j1 <= j0 + 1e-12 * j0.abs(), "seed {seed}: {j0} -> {j1}");
    }
}
