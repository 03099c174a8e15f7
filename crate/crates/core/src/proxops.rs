//! Proximal and projection primitives used by the ADMM updates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Hinge norm `Σ max(-x_ij, 0)`: total magnitude of the negative entries.
pub fn hinge_norm<T: Real>(x: &DMatrix<T>) -> T {
    x.iter().fold(
        T::zero(),
        |acc, &v| if v < T::zero() { acc - v } else { acc },
    )
}

/// Scalar prox of `c * max(-x, 0)`: a one-sided soft threshold.
#[inline]
pub fn prox_hinge_scalar<T: Real>(p: T, c: T) -> T {
    if p >= T::zero() {
        p
    } else if p >= -c {
        T::zero()
    } else {
        p + c
    }
}

/// Elementwise `argmin_X c‖X‖_h + ½‖X − P‖²_F`.
pub fn prox_hinge<T: Real>(p: &DMatrix<T>, c: T) -> Result<DMatrix<T>> {
    if !(c > T::zero()) {
        return Err(Error::param("c", format!("must be positive, got {c}")));
    }
    Ok(p.map(|v| prox_hinge_scalar(v, c)))
}

/// Frobenius-nearest matrix whose singular values are all at least `zeta`.
///
/// Singular values below `zeta` are raised to it; feasible inputs are
/// returned unchanged. The zero matrix maps to `zeta * I`.
pub fn project_min_singular<T: Real>(x: &DMatrix<T>, zeta: T) -> Result<DMatrix<T>> {
    if !x.is_square() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    if !(zeta > T::zero()) {
        return Err(Error::param(
            "zeta",
            format!("must be positive, got {zeta}"),
        ));
    }
    let n = x.nrows();
    if x.iter().all(|v| *v == T::zero()) {
        return Ok(DMatrix::identity(n, n) * zeta);
    }
    let dec = linalg::svd(x)?;
    if dec.s.iter().all(|&s| s >= zeta) {
        return Ok(x.clone());
    }
    let clamped = dec.s.map(|s| s.max(zeta));
    Ok(dec.recompose(&clamped))
}

/// Euclidean projection onto the probability simplex (sort-based threshold).
pub fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));

    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - T::one()) / T::from_count(j + 1);
        if uj - t > T::zero() {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(T::zero())).collect()
}

/// Projects every row of `m` onto the simplex in place.
pub fn project_rows_simplex<T: Real>(m: &mut DMatrix<T>) {
    for i in 0..m.nrows() {
        let row: Vec<T> = m.row(i).iter().copied().collect();
        for (j, x) in project_simplex(&row).into_iter().enumerate() {
            m[(i, j)] = x;
        }
    }
}
