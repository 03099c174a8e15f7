//! The K-dimensional document subspace.
//!
//! Documents live on the probability simplex in `R^V`. Fitting picks an
//! orthonormal basis `E` (`V x K`) with `E^T 1 = 0`, documents are mapped
//! to coordinates by the uncentered product `w E`, and coordinates are
//! mapped back with `w̄ + (c - w̄ E) E^T`, which preserves unit row sums.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::DocMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Eigenvalues at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// How the K basis directions are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    /// Top `K - 1` covariance eigenvectors plus the direction from the
    /// simplex barycenter to the corpus mean, orthogonalized against them.
    ///
    /// Centered LDA data spans only `K - 1` signal directions, so this
    /// spends the last axis on the offset that makes `w E` full rank
    /// instead of on a noise eigenvector.
    #[default]
    AffineHull,
    /// Top `K` covariance eigenvectors.
    Covariance,
}

/// Fitted basis, mean and per-axis variances.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace<T: Real> {
    mean: DVector<T>,
    basis: DMatrix<T>,
    eigenvalues: DVector<T>,
    mode: BasisMode,
}

/// Document coordinates `W̃ = W E` (`M x K`).
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedDocs<T: Real> {
    pub coords: DMatrix<T>,
}

impl<T: Real> ProjectedDocs<T> {
    pub fn new(coords: DMatrix<T>) -> Result<Self> {
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::Undefined("non-finite document coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn num_docs(&self) -> usize {
        self.coords.nrows()
    }

    pub fn k(&self) -> usize {
        self.coords.ncols()
    }
}

impl<T: Real> Subspace<T> {
    /// Reassembles a subspace, e.g. from a model file.
    pub fn from_parts(
        mean: DVector<T>,
        basis: DMatrix<T>,
        eigenvalues: DVector<T>,
        mode: BasisMode,
    ) -> Result<Self> {
        if basis.nrows() != mean.len() || basis.ncols() != eigenvalues.len() {
            return Err(Error::Shape(format!(
                "basis is {}x{} but mean has {} entries and there are {} eigenvalues",
                basis.nrows(),
                basis.ncols(),
                mean.len(),
                eigenvalues.len()
            )));
        }
        Ok(Self {
            mean,
            basis,
            eigenvalues,
            mode,
        })
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    /// `V x K` matrix with orthonormal columns.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// Sample variance along each basis column, nonincreasing.
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn num_words(&self) -> usize {
        self.basis.nrows()
    }

    /// Coordinates `docs * E` of every document.
    pub fn project(&self, docs: &DocMatrix<T>) -> Result<ProjectedDocs<T>> {
        self.project_rows(docs.rows())
    }

    /// Same as [`Subspace::project`] for an arbitrary `M x V` matrix.
    pub fn project_rows(&self, rows: &DMatrix<T>) -> Result<ProjectedDocs<T>> {
        if rows.ncols() != self.num_words() {
            return Err(Error::Shape(format!(
                "documents have {} words but the subspace has {}",
                rows.ncols(),
                self.num_words()
            )));
        }
        ProjectedDocs::new(rows * &self.basis)
    }

    /// `w̄ + (c - w̄ E) E^T` for a single coordinate row.
    pub fn reconstruct(&self, coords: &[T]) -> Result<DVector<T>> {
        if coords.len() != self.k() {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                self.k(),
                coords.len()
            )));
        }
        let m = DMatrix::from_row_slice(1, self.k(), coords);
        Ok(self.reconstruct_rows(&m)?.row(0).transpose())
    }

    /// Row-wise reconstruction of an `n x K` coordinate matrix.
    pub fn reconstruct_rows(&self, coords: &DMatrix<T>) -> Result<DMatrix<T>> {
        if coords.ncols() != self.k() {
            return Err(Error::Shape(format!(
                "expected {} coordinate columns, got {}",
                self.k(),
                coords.ncols()
            )));
        }
        let mean_coords = self.mean.transpose() * &self.basis;
        let mut centered = coords.clone();
        for mut row in centered.row_iter_mut() {
            row -= &mean_coords;
        }
        let mut out = centered * self.basis.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        Ok(out)
    }
}

/// Fits the default ([`BasisMode::AffineHull`]) subspace.
pub fn fit_subspace<T: Real>(docs: &DocMatrix<T>, k: usize) -> Result<Subspace<T>> {
    fit_subspace_with(docs, k, BasisMode::default())
}

/// Top `n` eigenpairs of the sample covariance of the rows of `x`
/// (already centered), using whichever of `X^T X` and `X X^T` is smaller.
fn top_covariance_eigen<T: Real>(x: &DMatrix<T>, n: usize) -> (DVector<T>, DMatrix<T>) {
    let (m, v) = x.shape();
    let scale = T::one() / T::from_count(m - 1);
    if m < v {
        let gram = (x * x.transpose()) * scale;
        let (vals, vecs) = linalg::sym_eigen(&gram);
        let mut basis = DMatrix::zeros(v, n);
        for j in 0..n {
            let mut col = x.transpose() * vecs.column(j);
            let norm = col.norm();
            if norm > T::zero() {
                col /= norm;
            }
            basis.set_column(j, &col);
        }
        orthonormalize(&mut basis);
        (vals.rows(0, n).into_owned(), basis)
    } else {
        let cov = (x.transpose() * x) * scale;
        let (vals, vecs) = linalg::sym_eigen(&cov);
        (
            vals.rows(0, n).into_owned(),
            vecs.columns(0, n).into_owned(),
        )
    }
}

/// Modified Gram-Schmidt, then the sign convention on every column.
fn orthonormalize<T: Real>(basis: &mut DMatrix<T>) {
    for j in 0..basis.ncols() {
        let mut col = basis.column(j).into_owned();
        for i in 0..j {
            let prev = basis.column(i);
            let d = prev.dot(&col);
            col -= prev * d;
        }
        let norm = col.norm();
        if norm > T::zero() {
            col /= norm;
        }
        linalg::fix_sign(&mut col);
        basis.set_column(j, &col);
    }
}

/// Fits a K-dimensional subspace to row-stochastic documents.
pub fn fit_subspace_with<T: Real>(
    docs: &DocMatrix<T>,
    k: usize,
    mode: BasisMode,
) -> Result<Subspace<T>> {
    let w = docs.rows();
    let (m, v) = w.shape();
    if k < 2 {
        return Err(Error::param("k", format!("must be at least 2, got {k}")));
    }
    if m < k + 1 {
        return Err(Error::RankDeficient {
            rank: m.saturating_sub(1),
            required: k,
            detail: format!("{m} documents cannot span {k} dimensions"),
        });
    }
    if v < k + 1 {
        return Err(Error::Shape(format!(
            "vocabulary of {v} words is too small for {k} topics"
        )));
    }

    let mean: DVector<T> = w.row_mean().transpose();
    let mut x = w.clone();
    for mut row in x.row_iter_mut() {
        row -= mean.transpose();
    }
    let tol = T::of(RANK_TOL);
    let numerical_rank = |vals: &DVector<T>| vals.iter().filter(|&&l| l > tol).count();

    match mode {
        BasisMode::Covariance => {
            let (vals, basis) = top_covariance_eigen(&x, k);
            if !(vals[k - 1] > tol) {
                return Err(Error::RankDeficient {
                    rank: numerical_rank(&vals),
                    required: k,
                    detail: format!("covariance eigenvalue {k} is {:e}", vals[k - 1]),
                });
            }
            Subspace::from_parts(mean, basis, vals, mode)
        }
        BasisMode::AffineHull => {
            let (vals, top) = top_covariance_eigen(&x, k);
            if !(vals[k - 2] > tol) {
                return Err(Error::RankDeficient {
                    rank: numerical_rank(&vals),
                    required: k,
                    detail: format!("covariance eigenvalue {} is {:e}", k - 1, vals[k - 2]),
                });
            }
            let mut basis = top
                .columns(0, k - 1)
                .into_owned()
                .insert_column(k - 1, T::zero());

            let inv_v = T::one() / T::from_count(v);
            let mut offset = mean.map(|x| x - inv_v);
            for j in 0..k - 1 {
                let col = basis.column(j);
                let d = col.dot(&offset);
                offset -= col * d;
            }
            let offset_norm = offset.norm();
            let last = if offset_norm > tol {
                offset / offset_norm
            } else if vals[k - 1] > tol {
                // the mean sits at the barycenter; fall back to the next eigenvector
                top.column(k - 1).into_owned()
            } else {
                return Err(Error::RankDeficient {
                    rank: k - 1,
                    required: k,
                    detail:
                        "corpus mean is the uniform distribution and the covariance has rank K-1"
                            .into(),
                });
            };
            basis.set_column(k - 1, &last);
            orthonormalize(&mut basis);

            let spread = &x * basis.column(k - 1);
            let mut eigenvalues = vals.rows(0, k).into_owned();
            eigenvalues[k - 1] = spread.norm_squared() / T::from_count(m - 1);
            Subspace::from_parts(mean, basis, eigenvalues, mode)
        }
    }
}
