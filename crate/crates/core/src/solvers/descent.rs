//! Dense steepest descent variants and the rate bounds they obey.
//!
//! These work on explicit matrices and serve as references for the TT
//! steps: the exact and perturbed scalar steps, the subspace step
//! `x = t + Z (Zᵀ A Z)⁻¹ Zᵀ z`, the composed outer/inner step, and the
//! projector rates `ω_k` of the prefix frames of a TT direction.

use nalgebra::DVector;

use crate::dense::{a_projector_apply, kron, solve_spd, DenseMatrix};
use crate::error::{Error, Result};
use crate::solvers::trace::StepReport;
use crate::tt::vector::TtVector;

fn vec_of(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn residual(a: &DenseMatrix, y: &[f64], t: &[f64]) -> Result<DVector<f64>> {
    if a.nrows() != y.len() || a.ncols() != t.len() {
        return Err(Error::Shape(format!(
            "matrix is {}x{}, vectors have {} and {} entries",
            a.nrows(),
            a.ncols(),
            y.len(),
            t.len()
        )));
    }
    Ok(vec_of(y) - a * vec_of(t))
}

/// `‖v‖_A`.
pub fn a_norm(a: &DenseMatrix, v: &[f64]) -> f64 {
    let v = vec_of(v);
    v.dot(&(a * &v)).max(0.0).sqrt()
}

/// `‖x* − after‖_A / ‖x* − before‖_A`, or `None` when `before` is exact.
pub fn measured_rate(a: &DenseMatrix, x_star: &[f64], before: &[f64], after: &[f64]) -> Option<f64> {
    let e0: Vec<f64> = x_star.iter().zip(before).map(|(p, q)| p - q).collect();
    let e1: Vec<f64> = x_star.iter().zip(after).map(|(p, q)| p - q).collect();
    let n0 = a_norm(a, &e0);
    (n0 > 0.0).then(|| a_norm(a, &e1) / n0)
}

/// `x = t + z̃ (z̃, z) / (z̃, A z̃)` with `z = y − A t`.
pub fn dense_perturbed_sd_step(
    a: &DenseMatrix,
    y: &[f64],
    t: &[f64],
    zt: &[f64],
) -> Result<(Vec<f64>, StepReport)> {
    let z = residual(a, y, t)?;
    let zt = vec_of(zt);
    let zaz = zt.dot(&(a * &zt));
    if !(zaz > 0.0) {
        return Ok((
            t.to_vec(),
            StepReport {
                converged: true,
                ..StepReport::default()
            },
        ));
    }
    let alpha = zt.dot(&z) / zaz;
    let x = vec_of(t) + zt * alpha;
    Ok((
        x.as_slice().to_vec(),
        StepReport {
            alpha: Some(alpha),
            ..StepReport::default()
        },
    ))
}

/// Exact steepest descent step `x = t + z ‖z‖² / ‖z‖²_A`.
pub fn dense_sd_step(a: &DenseMatrix, y: &[f64], t: &[f64]) -> Result<(Vec<f64>, StepReport)> {
    let z = residual(a, y, t)?;
    dense_perturbed_sd_step(a, y, t, z.as_slice())
}

/// Upper bound `ω_z + ε √(2(1 − ω_z²)) + ε³ κ² / (2√2)` on the rate of the perturbed step.
pub fn perturbed_sd_bound(omega_z: f64, eps: f64, cond: f64) -> f64 {
    omega_z + eps * (2.0 * (1.0 - omega_z * omega_z)).max(0.0).sqrt() + eps.powi(3) * cond * cond / (2.0 * 2f64.sqrt())
}

/// Galerkin step on the column span of `basis`: `x = t + Z (Zᵀ A Z)⁻¹ Zᵀ z`.
pub fn dense_subspace_step(a: &DenseMatrix, y: &[f64], t: &[f64], basis: &DenseMatrix) -> Result<Vec<f64>> {
    let z = residual(a, y, t)?;
    let b = basis.transpose() * a * basis;
    let g = basis.transpose() * z;
    let v = solve_spd(&((&b + b.transpose()) * 0.5), g.as_slice())?;
    Ok((vec_of(t) + basis * vec_of(&v)).as_slice().to_vec())
}

/// Outer subspace step whose reduced problem `(Zᵀ A Z) v = Zᵀ z̃` gets one
/// inner steepest descent step from `v = 0`. `basis` must have orthonormal columns.
pub fn dense_inner_outer_step(
    a: &DenseMatrix,
    t: &[f64],
    basis: &DenseMatrix,
    zt: &[f64],
) -> Result<Vec<f64>> {
    let b = basis.transpose() * a * basis;
    let g = basis.transpose() * vec_of(zt);
    let bg = &b * &g;
    let gbg = g.dot(&bg);
    if !(gbg > 0.0) {
        return Ok(t.to_vec());
    }
    let v = g.clone() * (g.dot(&g) / gbg);
    Ok((vec_of(t) + basis * v).as_slice().to_vec())
}

/// Error of the subspace step: `ω_Z² = 1 − (c, R_Z c)_A / (c, c)_A` with `R_Z` the `A`-orthogonal projector.
pub fn projector_rate(a: &DenseMatrix, basis: &DenseMatrix, c: &[f64]) -> Result<f64> {
    let cc = a_norm(a, c).powi(2);
    if cc == 0.0 {
        return Ok(0.0);
    }
    let pc = a_projector_apply(basis, a, c)?;
    let pcc = vec_of(c).dot(&(a * vec_of(&pc)));
    Ok((1.0 - pcc / cc).max(0.0).sqrt())
}

/// `Z_{≤k} = Z^{≤k} ⊗ I_{n_{k+1}} ⊗ … ⊗ I_{n_d}` for `k = 1..=d−1`, with the first mode fastest.
pub fn prefix_frame(z: &TtVector, k: usize) -> Result<DenseMatrix> {
    if k == 0 || k >= z.d() {
        return Err(Error::Index(format!("prefix frame needs 1 <= k < d = {}, got {k}", z.d())));
    }
    let (left, _) = z.interfaces(k)?;
    let rest: usize = z.mode_sizes()[k..].iter().product();
    Ok(kron(&DenseMatrix::identity(rest, rest), &left))
}

/// `ω_k` for `k = 1..=d−1` measured on the error `c = x* − t`.
pub fn greedy_projector_rates(a: &DenseMatrix, z: &TtVector, c: &[f64]) -> Result<Vec<f64>> {
    let z = z.orthogonalize(z.d() - 1);
    (1..z.d()).map(|k| projector_rate(a, &prefix_frame(&z, k)?, c)).collect()
}

/// `sqrt(Σ_k ω_k² Π_{j<k} (1 − ω_j²))`, the greedy step bound with no ALS progress.
pub fn greedy_recursion_bound(omegas: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut keep = 1.0;
    for w in omegas {
        acc += w * w * keep;
        keep *= 1.0 - w * w;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::extreme_eigenvalues;

    #[test]
    fn balanced_case_attains_kantorovich() {
        let a = DenseMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0]));
        let x_star = [1.0, 1.0];
        let y = [1.0, 10.0];
        let t = [0.0, 0.0];
        let (x, rep) = dense_sd_step(&a, &y, &t).unwrap();
        let rate = measured_rate(&a, &x_star, &t, &x).unwrap();
        let bound = extreme_eigenvalues(&a).unwrap().kantorovich_rate();
        assert!(rate <= bound + 1e-12);
        assert!(rep.alpha.unwrap() > 0.0);
        // worst case: the residual mixes both eigenvectors equally
        let x_star = [1.0, 0.1];
        let y = [1.0, 1.0];
        let (x, _) = dense_sd_step(&a, &y, &t).unwrap();
        let rate = measured_rate(&a, &x_star, &t, &x).unwrap();
        assert!((rate - 9.0 / 11.0).abs() < 1e-12, "{rate}");
    }

    #[test]
    fn galerkin_condition_holds() {
        let a = DenseMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let y = [1.0, -2.0, 0.5];
        let t = [0.3, 0.0, -1.0];
        let (x, _) = dense_sd_step(&a, &y, &t).unwrap();
        let z = residual(&a, &y, &t).unwrap();
        let r = residual(&a, &y, &x).unwrap();
        assert!(z.dot(&r).abs() < 1e-11);
        let (same, rep) = dense_sd_step(&a, &[4.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(rep.converged);
        assert_eq!(same, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn recursion_bound_telescopes() {
        let w = [0.3, 0.5, 0.7];
        let b = greedy_recursion_bound(&w);
        let prod: f64 = w.iter().map(|v| 1.0 - v * v).product();
        assert!((b * b - (1.0 - prod)).abs() < 1e-15);
        assert!(b >= 0.7);
    }
}
