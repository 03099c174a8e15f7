//! Small dense helpers on top of nalgebra with deterministic ordering and
//! sign conventions, so every decomposition the solver uses is reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin SVD `m = u * diag(s) * v_t`, singular values nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub s: DVector<T>,
    pub v_t: DMatrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn recompose(&self, s: &DVector<T>) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= s[j];
        }
        us * &self.v_t
    }
}

/// Index of the largest-magnitude entry; the first one wins on ties.
fn argmax_abs<T: Real>(it: impl Iterator<Item = T>) -> usize {
    let mut best = 0;
    let mut best_val = T::zero();
    for (i, x) in it.enumerate() {
        if x.abs() > best_val {
            best = i;
            best_val = x.abs();
        }
    }
    best
}

/// SVD with singular values sorted nonincreasing and each left singular
/// vector's largest-magnitude entry made positive.
pub fn svd<T: Real>(m: &DMatrix<T>) -> Result<Svd<T>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::LinearAlgebra("SVD of a non-finite matrix".into()));
    }
    let dec = SVD::new(m.clone(), true, true);
    let u = dec
        .u
        .ok_or_else(|| Error::LinearAlgebra("SVD produced no U".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::LinearAlgebra("SVD produced no V^T".into()))?;
    let s = dec.singular_values;

    let n = s.len();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the decomposition's own order among exact ties
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));

    let mut su = DMatrix::zeros(u.nrows(), n);
    let mut sv = DMatrix::zeros(n, v_t.ncols());
    let mut ss = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut ucol = u.column(src).into_owned();
        let mut vrow = v_t.row(src).into_owned();
        let pivot = argmax_abs(ucol.iter().copied());
        if ucol[pivot] < T::zero() {
            ucol.neg_mut();
            vrow.neg_mut();
        }
        su.set_column(dst, &ucol);
        sv.set_row(dst, &vrow);
        ss[dst] = s[src];
    }
    Ok(Svd {
        u: su,
        s: ss,
        v_t: sv,
    })
}

/// Singular values, nonincreasing.
pub fn singular_values<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let mut s: Vec<T> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    DVector::from_vec(s)
}

/// Smallest singular value (zero for an empty matrix).
pub fn sigma_min<T: Real>(m: &DMatrix<T>) -> T {
    m.singular_values()
        .iter()
        .copied()
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))))
        .unwrap_or_else(T::zero)
}

/// Symmetric eigendecomposition with eigenvalues nonincreasing and each
/// eigenvector's largest-magnitude entry positive.
pub fn sym_eigen<T: Real>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut vals = DVector::zeros(n);
    let mut vecs = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vals[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vecs.set_column(dst, &col);
    }
    (vals, vecs)
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn fix_sign<T: Real>(v: &mut DVector<T>) {
    let pivot = argmax_abs(v.iter().copied());
    if !v.is_empty() && v[pivot] < T::zero() {
        v.neg_mut();
    }
}

/// `(C^{1/2}, C^{-1/2})` for a symmetric positive definite `C`.
pub fn spd_sqrt_pair<T: Real>(c: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (vals, vecs) = sym_eigen(c);
    if vals.iter().any(|&l| !(l > T::zero())) {
        return Err(Error::LinearAlgebra(
            "matrix is not positive definite".into(),
        ));
    }
    let root = vals.map(|l| l.sqrt());
    let inv_root = root.map(|r| T::one() / r);
    let sqrt = &vecs * DMatrix::from_diagonal(&root) * vecs.transpose();
    let inv_sqrt = &vecs * DMatrix::from_diagonal(&inv_root) * vecs.transpose();
    Ok((sqrt, inv_sqrt))
}

/// Maximum absolute entry.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}
