use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Gamma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Words per document: one value for every document or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DocLengths {
    Constant(usize),
    PerDoc(Vec<usize>),
}

impl DocLengths {
    fn get(&self, d: usize) -> usize {
        match self {
            DocLengths::Constant(n) => *n,
            DocLengths::PerDoc(v) => v[d],
        }
    }
}

/// Parameters of the LDA generative process with symmetric Dirichlet priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub doc_len: DocLengths,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
}

impl LdaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.vocab_size <= self.k {
            return bad(format!(
                "vocab_size must exceed k = {}, got {}",
                self.k, self.vocab_size
            ));
        }
        if self.docs < self.k {
            return bad(format!(
                "docs must be at least k = {}, got {}",
                self.k, self.docs
            ));
        }
        match &self.doc_len {
            DocLengths::Constant(0) => return bad("doc_len must be at least 1".into()),
            DocLengths::PerDoc(v) if v.len() != self.docs => {
                return bad(format!(
                    "doc_len lists {} lengths for {} docs",
                    v.len(),
                    self.docs
                ))
            }
            DocLengths::PerDoc(v) if v.contains(&0) => {
                return bad("every doc_len must be at least 1".into())
            }
            _ => {}
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        Ok(())
    }
}

/// A document's topic proportions and sparse word counts.
type DocDraw = (Vec<f64>, Vec<(u32, u32)>);

/// Generated corpus together with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub beta_true: DMatrix<f64>,
    pub theta_true: DMatrix<f64>,
}

/// Symmetric Dirichlet draw computed in log space.
///
/// Uses `G = G' * U^{1/a}` with `G' ~ Gamma(a + 1)`, which stays accurate
/// for concentrations far below one where plain Gamma draws underflow.
fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: f64, n: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha + 1.0, 1.0).expect("alpha validated positive");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let u = 1.0 - rng.random::<f64>();
            g.ln() + u.ln() / alpha
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Stream 0 draws the topics; stream `d + 1` draws document `d`.
fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Samples a corpus from the LDA generative model.
///
/// Every document uses its own RNG stream, so the output depends only on
/// the configuration and never on the thread schedule.
pub fn generate_lda_corpus(config: &LdaConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let (k, v, m) = (config.k, config.vocab_size, config.docs);

    let mut topic_rng = stream(config.seed, 0);
    let beta_rows: Vec<Vec<f64>> = (0..k)
        .map(|_| dirichlet(&mut topic_rng, config.eta, v))
        .collect();
    let word_samplers: Vec<WeightedAliasIndex<f64>> = beta_rows
        .iter()
        .map(|row| WeightedAliasIndex::new(row.clone()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("degenerate topic distribution: {e}")))?;

    let per_doc: Vec<DocDraw> = (0..m)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream(config.seed, d as u64 + 1);
            let theta = dirichlet(&mut rng, config.alpha, k);
            let topic_sampler =
                WeightedAliasIndex::new(theta.clone()).expect("dirichlet draw sums to one");
            let mut counts = vec![0u32; v];
            for _ in 0..config.doc_len.get(d) {
                let z = topic_sampler.sample(&mut rng);
                counts[word_samplers[z].sample(&mut rng)] += 1;
            }
            let sparse = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(w, &c)| (w as u32, c))
                .collect();
            (theta, sparse)
        })
        .collect();

    let beta_true = DMatrix::from_fn(k, v, |i, j| beta_rows[i][j]);
    let theta_true = DMatrix::from_fn(m, k, |i, j| per_doc[i].0[j]);
    let corpus = Corpus::from_docs(v, per_doc.into_iter().map(|(_, s)| s).collect())?;
    Ok(SyntheticCorpus {
        corpus,
        beta_true,
        theta_true,
    })
}
