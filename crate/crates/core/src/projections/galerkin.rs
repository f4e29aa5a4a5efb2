//! Enrichment of a core by extra columns and the Galerkin correction on the
//! zero-padded block of the next core.

use crate::dense::{solve_spd, DenseMatrix};
use crate::error::{Error, Result};
use crate::projections::env::EnvironmentCache;
use crate::projections::local::LocalSolveOptions;
use crate::tt::matrix::TtMatrix;
use crate::tt::vector::{Core3, TtVector};

/// Records that core `core` holds `[T S]` with the first `split` right-rank columns from `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enrichment {
    pub core: usize,
    pub split: usize,
}

/// Appends `s` (dims `(r_{k-1}, n_k, ρ)`) to core `k` as extra right-rank
/// columns and pads core `k + 1` with `ρ` zero rows. The represented tensor is unchanged.
pub fn enrich(x: &TtVector, k: usize, s: &Core3) -> Result<(TtVector, Enrichment)> {
    if k + 1 >= x.d() {
        return Err(Error::Index(format!("cannot enrich core {k} of a {}-core train", x.d())));
    }
    let (t, next) = (x.core(k), x.core(k + 1));
    if s.r_left() != t.r_left() || s.n() != t.n() {
        return Err(Error::Shape(format!(
            "enrichment dims {:?} do not match core dims {:?}",
            s.dims(),
            t.dims()
        )));
    }
    let split = t.r_right();
    let rho = s.r_right();
    let mut data = t.data().to_vec();
    data.extend_from_slice(s.data());
    let new_k = Core3::from_parts(t.r_left(), t.n(), split + rho, data);
    let r_new = split + rho;
    let mut padded = vec![0.0; r_new * next.n() * next.r_right()];
    for b in 0..next.r_right() {
        for i in 0..next.n() {
            for a in 0..split {
                padded[a + r_new * (i + next.n() * b)] = next.get(a, i, b);
            }
        }
    }
    let new_next = Core3::from_parts(r_new, next.n(), next.r_right(), padded);
    let mut out = x.clone();
    let ortho = out.ortho().clone();
    out.set_core(k, new_k);
    out.set_core(k + 1, new_next);
    let mut tags = ortho.tags;
    tags[k] = crate::tt::vector::Ortho::None;
    tags[k + 1] = crate::tt::vector::Ortho::None;
    out.set_ortho(crate::tt::vector::OrthoState { tags, pivot: None });
    Ok((out, Enrichment { core: k, split }))
}

fn embed(v: &[f64], split: usize, r_new: usize, n: usize, r1: usize) -> Vec<f64> {
    let rho = r_new - split;
    let mut out = vec![0.0; r_new * n * r1];
    for col in 0..n * r1 {
        out[col * r_new + split..(col + 1) * r_new].copy_from_slice(&v[col * rho..(col + 1) * rho]);
    }
    out
}

fn restrict(w: &[f64], split: usize, r_new: usize, n: usize, r1: usize) -> Vec<f64> {
    let rho = r_new - split;
    let mut out = Vec::with_capacity(rho * n * r1);
    for col in 0..n * r1 {
        out.extend_from_slice(&w[col * r_new + split..(col + 1) * r_new]);
    }
    out
}

/// Solves `(Sᵀ B S) v = Sᵀ (g − B [t; 0])` for the zero-padded block of core
/// `k + 1`, where `B`, `g` are the reduced system of core `k + 1`. Returns
/// `None` for an empty enrichment.
pub fn galerkin_correction(
    env: &EnvironmentCache,
    a: &TtMatrix,
    y: &TtVector,
    x: &TtVector,
    enr: Enrichment,
    opts: &LocalSolveOptions,
) -> Result<Option<Core3>> {
    let k1 = enr.core + 1;
    let sys = env.local_system(a, y, x, k1)?;
    let (r_new, n, r1) = sys.dims();
    if enr.split > r_new {
        return Err(Error::Input(format!("split {} exceeds rank {r_new}", enr.split)));
    }
    if enr.split == r_new {
        return Ok(None);
    }
    let rho = r_new - enr.split;
    let t = x.core(k1).data();
    let bt = sys.apply(t);
    let rhs: Vec<f64> = restrict(sys.rhs(), enr.split, r_new, n, r1)
        .iter()
        .zip(restrict(&bt, enr.split, r_new, n, r1))
        .map(|(g, b)| g - b)
        .collect();
    let apply = |v: &[f64]| restrict(&sys.apply(&embed(v, enr.split, r_new, n, r1)), enr.split, r_new, n, r1);
    let m = rho * n * r1;
    let v = solve_restricted(&apply, &rhs, m, opts).map_err(|e| e.at_core(k1))?;
    Ok(Some(Core3::from_parts(rho, n, r1, v)))
}

fn solve_restricted(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    m: usize,
    opts: &LocalSolveOptions,
) -> Result<Vec<f64>> {
    if m <= opts.dense_threshold {
        let mut b = DenseMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = apply(&e);
            b.set_column(j, &nalgebra::DVector::from_vec(col));
            e[j] = 0.0;
        }
        let b = (&b + b.transpose()) * 0.5;
        solve_spd(&b, rhs)
    } else {
        let out = crate::dense::conjugate_gradient(apply, rhs, &vec![0.0; m], opts.rel_tol, opts.max_iter)?;
        Ok(out.x)
    }
}

/// Writes `v` into the zero-padded rows of core `k + 1`.
pub fn apply_correction(x: &TtVector, enr: Enrichment, v: &Core3) -> TtVector {
    let k1 = enr.core + 1;
    let c = x.core(k1);
    let (r_new, n, r1) = (c.r_left(), c.n(), c.r_right());
    let mut data = c.data().to_vec();
    let emb = embed(v.data(), enr.split, r_new, n, r1);
    for (d, e) in data.iter_mut().zip(&emb) {
        *d += e;
    }
    let mut out = x.clone();
    out.set_core(k1, Core3::from_parts(r_new, n, r1, data));
    out
}
