//! Fitted topic models: recovering β and θ from γ, held-out evaluation,
//! comparison against ground truth, and the model file format.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::projection::{BasisMode, ProjectedDocs, Subspace};
use crate::proxops;
use crate::scalar::Real;
use crate::solver::{FitResult, SolverConfig, StopReason};

/// Word probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;
/// Largest K for which [`match_topics`] enumerates every permutation.
pub const MAX_EXACT_MATCH_K: usize = 10;
/// Default anchor threshold for [`check_separability`].
pub const ANCHOR_TOL: f64 = 1e-3;
/// An anchor may carry at most `tol * ANCHOR_LEAKAGE` in any other topic.
pub const ANCHOR_LEAKAGE: f64 = 1e-2;

const SINGULAR_DET: f64 = 1e-12;

fn invert_gamma<T: Real>(gamma: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !gamma.is_square() {
        return Err(Error::Shape(format!(
            "gamma is {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let singular = || Error::SingularGamma {
        sigma_min: linalg::sigma_min(gamma).as_f64(),
    };
    if !(gamma.determinant().abs() > T::of(SINGULAR_DET)) {
        return Err(singular());
    }
    gamma.clone().try_inverse().ok_or_else(singular)
}

/// Topic-word matrix: rows of `γ⁻¹` mapped back to word space and
/// projected onto the simplex.
pub fn recover_beta<T: Real>(subspace: &Subspace<T>, gamma: &DMatrix<T>) -> Result<DMatrix<T>> {
    if gamma.nrows() != subspace.k() {
        return Err(Error::Shape(format!(
            "gamma is {}x{} but the subspace has dimension {}",
            gamma.nrows(),
            gamma.ncols(),
            subspace.k()
        )));
    }
    let mut beta = subspace.reconstruct_rows(&invert_gamma(gamma)?)?;
    proxops::project_rows_simplex(&mut beta);
    Ok(beta)
}

/// Topic proportions `W̃γ`, rows projected onto the simplex.
pub fn recover_theta<T: Real>(
    projected: &ProjectedDocs<T>,
    gamma: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if projected.k() != gamma.nrows() || !gamma.is_square() {
        return Err(Error::Shape(format!(
            "coordinates have {} columns but gamma is {}x{}",
            projected.k(),
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let mut theta = &projected.coords * gamma;
    proxops::project_rows_simplex(&mut theta);
    Ok(theta)
}

/// Topic proportions of unseen documents under a trained subspace and γ.
pub fn fold_in<T: Real>(
    subspace: &Subspace<T>,
    gamma: &DMatrix<T>,
    heldout: &DocMatrix<T>,
) -> Result<DMatrix<T>> {
    if heldout.num_docs() == 0 {
        return Err(Error::Undefined("no held-out documents".into()));
    }
    recover_theta(&subspace.project(heldout)?, gamma)
}

fn check_eval_shapes<T: Real>(
    beta: &DMatrix<T>,
    theta: &DMatrix<T>,
    corpus: &Corpus,
) -> Result<()> {
    if beta.ncols() != corpus.num_words() {
        return Err(Error::Shape(format!(
            "model has {} words but the corpus has {}",
            beta.ncols(),
            corpus.num_words()
        )));
    }
    if theta.nrows() != corpus.num_docs() || theta.ncols() != beta.nrows() {
        return Err(Error::Shape(format!(
            "theta is {}x{} for {} documents and {} topics",
            theta.nrows(),
            theta.ncols(),
            corpus.num_docs(),
            beta.nrows()
        )));
    }
    Ok(())
}

/// `Σ_w n_dw log p_dw` for every document, with `p_d = θ_d β` floored at
/// [`PROB_FLOOR`].
pub fn doc_log_likelihoods<T: Real>(
    beta: &DMatrix<T>,
    theta: &DMatrix<T>,
    corpus: &Corpus,
) -> Result<Vec<T>> {
    check_eval_shapes(beta, theta, corpus)?;
    let floor = T::of(PROB_FLOOR);
    Ok((0..corpus.num_docs())
        .into_par_iter()
        .map(|d| {
            corpus.doc(d).iter().fold(T::zero(), |acc, &(w, n)| {
                let p = theta
                    .row(d)
                    .dot(&beta.column(w as usize).transpose())
                    .max(floor);
                acc + T::of(f64::from(n)) * p.ln()
            })
        })
        .collect())
}

/// `exp(−Σ_d log p(d) / Σ_d N_d)`; per-document terms are summed in
/// document order so the result does not depend on the thread count.
pub fn perplexity<T: Real>(beta: &DMatrix<T>, theta: &DMatrix<T>, corpus: &Corpus) -> Result<T> {
    let lls = doc_log_likelihoods(beta, theta, corpus)?;
    let tokens = corpus.total_tokens();
    if tokens == 0 {
        return Err(Error::Undefined("held-out corpus has no tokens".into()));
    }
    let total = lls.iter().fold(T::zero(), |a, &b| a + b);
    Ok((-total / T::of(tokens as f64)).exp())
}

/// `−½ log det(γγᵀ) = −Σ log σ_i`; `+∞` for a singular `γ`.
pub fn log_simplex_volume<T: Real>(gamma: &DMatrix<T>) -> T {
    let sv = linalg::singular_values(gamma);
    if sv.iter().any(|&s| !(s.as_f64() >= 1e-300)) {
        return T::one() / T::zero();
    }
    -sv.iter().fold(T::zero(), |a, &s| a + s.ln())
}

/// Best assignment of estimated topics to true topics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicMatch {
    /// `permutation[k]` is the estimated topic matched to true topic `k`.
    pub permutation: Vec<usize>,
    /// L1 distance between each true topic and its match.
    pub per_topic_l1: Vec<f64>,
    pub mean_l1: f64,
    /// Set when the assignment came from the greedy fallback.
    pub approximate: bool,
}

fn l1_costs<T: Real>(beta_hat: &DMatrix<T>, beta_true: &DMatrix<T>) -> Result<Vec<Vec<f64>>> {
    if beta_hat.shape() != beta_true.shape() {
        return Err(Error::Shape(format!(
            "estimated topics are {}x{} but the truth is {}x{}",
            beta_hat.nrows(),
            beta_hat.ncols(),
            beta_true.nrows(),
            beta_true.ncols()
        )));
    }
    let k = beta_true.nrows();
    Ok((0..k)
        .map(|t| {
            (0..k)
                .map(|h| {
                    beta_true
                        .row(t)
                        .iter()
                        .zip(beta_hat.row(h).iter())
                        .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
                        .sum()
                })
                .collect()
        })
        .collect())
}

fn finish_match(cost: &[Vec<f64>], permutation: Vec<usize>, approximate: bool) -> TopicMatch {
    let per_topic_l1: Vec<f64> = permutation
        .iter()
        .enumerate()
        .map(|(t, &h)| cost[t][h])
        .collect();
    let mean_l1 = per_topic_l1.iter().sum::<f64>() / per_topic_l1.len().max(1) as f64;
    TopicMatch {
        permutation,
        per_topic_l1,
        mean_l1,
        approximate,
    }
}

/// Rearranges `p` into the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive search over all K! assignments minimizing the mean L1
/// distance; ties go to the lexicographically smallest permutation.
pub fn match_topics<T: Real>(beta_hat: &DMatrix<T>, beta_true: &DMatrix<T>) -> Result<TopicMatch> {
    let k = beta_true.nrows();
    if k > MAX_EXACT_MATCH_K {
        return Err(Error::TooManyTopics {
            k,
            max: MAX_EXACT_MATCH_K,
        });
    }
    let cost = l1_costs(beta_hat, beta_true)?;
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        let c: f64 = perm.iter().enumerate().map(|(t, &h)| cost[t][h]).sum();
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(finish_match(&cost, best, false))
}

/// Each true topic in turn takes its nearest unmatched estimate.
pub fn match_topics_greedy<T: Real>(
    beta_hat: &DMatrix<T>,
    beta_true: &DMatrix<T>,
) -> Result<TopicMatch> {
    let cost = l1_costs(beta_hat, beta_true)?;
    let k = cost.len();
    let mut used = vec![false; k];
    let mut perm = Vec::with_capacity(k);
    for row in &cost {
        let h = (0..k)
            .filter(|&h| !used[h])
            .min_by(|&a, &b| row[a].total_cmp(&row[b]))
            .expect("one estimate left per remaining topic");
        used[h] = true;
        perm.push(h);
    }
    Ok(finish_match(&cost, perm, true))
}

/// Anchor words per topic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub anchors: Vec<Vec<usize>>,
    pub separable: bool,
}

/// Word `w` anchors topic `k` when `β[k][w] > tol` and every other topic
/// gives it at most `tol · ANCHOR_LEAKAGE`.
pub fn check_separability<T: Real>(beta: &DMatrix<T>, tol: T) -> Separability {
    let leak = tol * T::of(ANCHOR_LEAKAGE);
    let k = beta.nrows();
    let mut anchors = vec![Vec::new(); k];
    for w in 0..beta.ncols() {
        let col = beta.column(w);
        for t in 0..k {
            if col[t] > tol && (0..k).all(|j| j == t || col[j] <= leak) {
                anchors[t].push(w);
            }
        }
    }
    let separable = k > 0 && anchors.iter().all(|a| !a.is_empty());
    Separability { anchors, separable }
}

/// End-of-fit diagnostics stored with the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub stop: StopReason,
    pub objective: f64,
    pub r1: f64,
    pub r2: f64,
    pub sigma_min: f64,
    pub log_volume: f64,
}

/// A fitted model: topics plus everything needed to fold in new documents.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicModel<T: Real> {
    pub beta: DMatrix<T>,
    pub gamma: DMatrix<T>,
    pub subspace: Subspace<T>,
    /// Solver settings, with the radius resolved to the value used.
    pub config: SolverConfig<T>,
    pub diagnostics: Option<Diagnostics>,
}

impl<T: Real> TopicModel<T> {
    pub fn from_fit(
        subspace: Subspace<T>,
        fit: &FitResult<T>,
        config: &SolverConfig<T>,
    ) -> Result<Self> {
        let beta = recover_beta(&subspace, &fit.gamma_hat)?;
        let diagnostics = fit.trace.last().map(|r| Diagnostics {
            iterations: r.iter,
            stop: fit.stop,
            objective: r.objective.as_f64(),
            r1: r.r1.as_f64(),
            r2: r.r2.as_f64(),
            sigma_min: r.sigma_min.as_f64(),
            log_volume: log_simplex_volume(&fit.gamma_hat).as_f64(),
        });
        let mut config = config.clone();
        config.radius = Some(fit.state.radius);
        Ok(Self {
            beta,
            gamma: fit.gamma_hat.clone(),
            subspace,
            config,
            diagnostics,
        })
    }

    pub fn k(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_words(&self) -> usize {
        self.beta.ncols()
    }

    pub fn fold_in(&self, docs: &DocMatrix<T>) -> Result<DMatrix<T>> {
        fold_in(&self.subspace, &self.gamma, docs)
    }

    /// Folds `corpus` in and returns its perplexity and per-document
    /// log-likelihoods.
    pub fn evaluate(&self, corpus: &Corpus) -> Result<(T, Vec<T>)> {
        let docs = crate::corpus::normalize_counts(corpus)?;
        let theta = self.fold_in(&docs)?;
        let lls = doc_log_likelihoods(&self.beta, &theta, corpus)?;
        Ok((perplexity(&self.beta, &theta, corpus)?, lls))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile::from_model(self);
        serde_json::to_string_pretty(&file).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Model(msg) => Error::Model(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceFile {
    mean: Vec<f64>,
    /// `V` rows of `K` entries.
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    mode: BasisMode,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "V")]
    v: usize,
    beta: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    subspace: SubspaceFile,
    solver: SolverConfig<f64>,
    diagnostics: Option<Diagnostics>,
}

fn rows_of<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.as_f64()).collect())
        .collect()
}

fn matrix_from<T: Real>(
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
    what: &str,
) -> Result<DMatrix<T>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Model(format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| T::of(rows[i][j])))
}

impl ModelFile {
    fn from_model<T: Real>(m: &TopicModel<T>) -> Self {
        let c = &m.config;
        Self {
            k: m.k(),
            v: m.num_words(),
            beta: rows_of(&m.beta),
            gamma: rows_of(&m.gamma),
            subspace: SubspaceFile {
                mean: m.subspace.mean().iter().map(|x| x.as_f64()).collect(),
                basis: rows_of(m.subspace.basis()),
                eigenvalues: m
                    .subspace
                    .eigenvalues()
                    .iter()
                    .map(|x| x.as_f64())
                    .collect(),
                mode: m.subspace.mode(),
            },
            solver: SolverConfig {
                rho: c.rho.as_f64(),
                mu: c.mu.as_f64(),
                radius: c.radius.map(Real::as_f64),
                max_iters: c.max_iters,
                tol_primal: c.tol_primal.as_f64(),
                tol_change: c.tol_change.as_f64(),
                gamma_step: c.gamma_step,
            },
            diagnostics: m.diagnostics.clone(),
        }
    }

    fn into_model<T: Real>(self) -> Result<TopicModel<T>> {
        let (k, v) = (self.k, self.v);
        if k < 2 || v <= k {
            return Err(Error::Model(format!("invalid dimensions K={k}, V={v}")));
        }
        let beta: DMatrix<T> = matrix_from(&self.beta, k, v, "beta")?;
        for (i, row) in beta.row_iter().enumerate() {
            if row.iter().any(|&x| !(x >= T::zero())) || (row.sum() - T::one()).abs() > T::of(1e-9)
            {
                return Err(Error::Model(format!(
                    "beta row {i} is not a probability distribution"
                )));
            }
        }
        let gamma = matrix_from(&self.gamma, k, k, "gamma")?;
        let s = self.subspace;
        if s.mean.len() != v || s.eigenvalues.len() != k {
            return Err(Error::Model(
                "subspace mean or eigenvalues have the wrong length".into(),
            ));
        }
        let subspace = Subspace::from_parts(
            DVector::from_iterator(v, s.mean.iter().map(|&x| T::of(x))),
            matrix_from(&s.basis, v, k, "subspace basis")?,
            DVector::from_iterator(k, s.eigenvalues.iter().map(|&x| T::of(x))),
            s.mode,
        )?;
        let c = self.solver;
        Ok(TopicModel {
            beta,
            gamma,
            subspace,
            config: SolverConfig {
                rho: T::of(c.rho),
                mu: T::of(c.mu),
                radius: c.radius.map(T::of),
                max_iters: c.max_iters,
                tol_primal: T::of(c.tol_primal),
                tol_change: T::of(c.tol_change),
                gamma_step: c.gamma_step,
            },
            diagnostics: self.diagnostics,
        })
    }
}
