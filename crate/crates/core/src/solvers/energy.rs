//! Energy functional, exact residuals and their low-rank approximations.

use crate::error::{Error, Result};
use crate::projections::env::op_left_step;
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::TtVector;

/// `(u, A v)` by a left-to-right contraction.
pub fn quadratic_form(a: &TtMatrix, u: &TtVector, v: &TtVector) -> Result<f64> {
    a.check_square_against(u)?;
    a.check_square_against(v)?;
    let mut l = vec![1.0];
    for k in 0..u.d() {
        l = op_left_step(&l, u.core(k), a.core(k), v.core(k));
    }
    Ok(l[0])
}

/// `J(x) = (x, A x) − 2 (x, y)`, which differs from `‖x* − x‖²_A` by the constant `(x*, y)`.
pub fn energy(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<f64> {
    Ok(quadratic_form(a, x, x)? - 2.0 * x.dot(y)?)
}

/// Exact residual `y − A x` with ranks `r_y + R r_x`.
pub fn residual(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<TtVector> {
    y.sub(&a.matvec(x)?)
}

/// `‖y − A x‖ / ‖y‖`, or the absolute residual norm when `y = 0`.
pub fn relative_residual(a: &TtMatrix, y: &TtVector, x: &TtVector) -> Result<f64> {
    let r = residual(a, y, x)?.norm();
    let ny = y.norm();
    Ok(if ny > 0.0 { r / ny } else { r })
}

/// Rounded residual `z̃` with `z = z̃ + δz` and `(z̃, δz) = 0`.
#[derive(Debug, Clone)]
pub struct ApproximateResidual {
    pub z: TtVector,
    /// The exact residual `y − A t`.
    pub exact: TtVector,
    /// `‖δz‖ / ‖z̃‖`.
    pub eps: f64,
    /// `‖z‖`.
    pub norm: f64,
}

/// Forms `y − A t` and rounds it to rank `ρ` or relative tolerance `ε_z`, whichever binds first.
pub fn approximate_residual(
    a: &TtMatrix,
    y: &TtVector,
    t: &TtVector,
    rho: usize,
    eps_z: f64,
) -> Result<ApproximateResidual> {
    if !(eps_z >= 0.0) {
        return Err(Error::Input(format!("residual tolerance must be >= 0, got {eps_z}")));
    }
    let exact = residual(a, y, t)?;
    let (z, rep) = exact.round_with_report(eps_z, Some(rho.max(1)));
    let kept = (rep.norm * rep.norm - rep.discarded * rep.discarded).max(0.0).sqrt();
    let eps = if kept > 0.0 { rep.discarded / kept } else { 0.0 };
    Ok(ApproximateResidual {
        z,
        exact,
        eps,
        norm: rep.norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{dot, norm2};
    use crate::problems::{laplacian_tt, ones_tt};

    #[test]
    fn energy_matches_dense() {
        let a = laplacian_tt(3, 8, true).unwrap();
        let y = ones_tt(3, 8).unwrap();
        let x = TtVector::random(&[8, 8, 8], &[1, 3, 3, 1], 4).unwrap();
        let xd = x.to_dense().unwrap();
        let ax = a.apply_dense(&xd).unwrap();
        let expect = dot(&xd, &ax) - 2.0 * xd.iter().sum::<f64>();
        let j = energy(&a, &y, &x).unwrap();
        assert!((j - expect).abs() <= 1e-10 * expect.abs());
        assert_eq!(energy(&a, &y, &TtVector::zeros(&[8, 8, 8]).unwrap()).unwrap(), 0.0);
        let id = TtMatrix::identity(&[8, 8, 8]).unwrap();
        let zero = TtVector::zeros(&[8, 8, 8]).unwrap();
        let j = energy(&id, &zero, &x).unwrap();
        assert!((j - dot(&xd, &xd)).abs() <= 1e-12 * j);
    }

    #[test]
    fn residual_rounding_is_orthogonal() {
        let a = laplacian_tt(3, 8, true).unwrap();
        let y = ones_tt(3, 8).unwrap();
        let t = TtVector::random(&[8, 8, 8], &[1, 3, 3, 1], 5).unwrap();
        let r = approximate_residual(&a, &y, &t, 3, 1e-12).unwrap();
        assert!(r.z.max_rank() <= 3);
        let z = r.exact.to_dense().unwrap();
        let zt = r.z.to_dense().unwrap();
        let dz: Vec<f64> = z.iter().zip(&zt).map(|(p, q)| p - q).collect();
        let nzt = norm2(&zt);
        assert!((norm2(&dz) / nzt - r.eps).abs() <= 1e-10 * (1.0 + r.eps));
        assert!(dot(&zt, &dz).abs() <= 1e-10 * norm2(&z).powi(2));
    }

    #[test]
    fn rank_one_residual_is_exact() {
        let a = laplacian_tt(3, 4, false).unwrap();
        let y = ones_tt(3, 4).unwrap();
        let t = TtVector::zeros(&[4, 4, 4]).unwrap();
        let r = approximate_residual(&a, &y, &t, 1, 1e-14).unwrap();
        assert!(r.eps <= 1e-12);
        let diff = r.z.sub(&y).unwrap().norm();
        assert!(diff <= 1e-12 * y.norm());
    }
}
