//! Minimum volume topic modeling.
//!
//! Topics are recovered as the vertices of the smallest simplex that
//! contains the documents, after projecting the word-frequency vectors onto
//! a K-dimensional subspace. The estimation problem is solved with ADMM.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod linalg;
pub mod model;
pub mod projection;
pub mod proxops;
pub mod scalar;
pub mod solver;

#[cfg(test)]
mod testutil;

pub use corpus::{Corpus, DocMatrix, LdaConfig, SyntheticCorpus};
pub use error::{Error, Result};
pub use model::{TopicMatch, TopicModel};
pub use projection::{BasisMode, ProjectedDocs, Subspace};
pub use scalar::Real;
pub use solver::{FitResult, FitTrace, GammaStep, SolverConfig, SolverState, StopReason};

pub type DocMatrix64 = DocMatrix<f64>;
pub type Subspace64 = Subspace<f64>;
pub type ProjectedDocs64 = ProjectedDocs<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverState64 = SolverState<f64>;
pub type FitResult64 = FitResult<f64>;

pub type TopicModel64 = TopicModel<f64>;
