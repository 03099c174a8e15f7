//! Document collections: sparse count storage, row-stochastic frequency
//! matrices, synthetic LDA generation and on-disk formats.

mod bow;
mod generate;
mod truth;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use bow::{load_bow, load_vocab, read_bow, save_bow, write_bow};
pub use generate::{generate_lda_corpus, DocLengths, LdaConfig, SyntheticCorpus};
pub use truth::{read_matrix_csv, write_matrix_csv};

/// Sparse document-word count matrix.
///
/// Each document is stored as `(word, count)` pairs sorted by word with no
/// zero counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Vec<(u32, u32)>>,
    n_words: usize,
    doc_lengths: Vec<u64>,
    vocab: Option<Vec<String>>,
}

impl Corpus {
    /// Builds a corpus from per-document `(word, count)` lists.
    ///
    /// Entries may come in any order; duplicates are summed and zero counts
    /// dropped.
    pub fn from_docs(n_words: usize, docs: Vec<Vec<(u32, u32)>>) -> Result<Self> {
        let mut clean = Vec::with_capacity(docs.len());
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (d, mut entries) in docs.into_iter().enumerate() {
            entries.sort_unstable_by_key(|&(w, _)| w);
            let mut merged: Vec<(u32, u32)> = Vec::with_capacity(entries.len());
            for (w, c) in entries {
                if w as usize >= n_words {
                    return Err(Error::Shape(format!(
                        "document {d} uses word {w} but the vocabulary has {n_words} words"
                    )));
                }
                match merged.last_mut() {
                    Some((lw, lc)) if *lw == w => {
                        *lc = lc.checked_add(c).ok_or_else(|| {
                            Error::Shape(format!("count overflow in document {d}"))
                        })?
                    }
                    _ => merged.push((w, c)),
                }
            }
            merged.retain(|&(_, c)| c > 0);
            doc_lengths.push(merged.iter().map(|&(_, c)| u64::from(c)).sum());
            clean.push(merged);
        }
        Ok(Self {
            docs: clean,
            n_words,
            doc_lengths,
            vocab: None,
        })
    }

    /// Builds a corpus from a dense count matrix (rows are documents).
    pub fn from_dense(counts: &DMatrix<u32>) -> Result<Self> {
        let docs = (0..counts.nrows())
            .map(|d| {
                (0..counts.ncols())
                    .filter(|&w| counts[(d, w)] > 0)
                    .map(|w| (w as u32, counts[(d, w)]))
                    .collect()
            })
            .collect();
        Self::from_docs(counts.ncols(), docs)
    }

    /// Attaches a vocabulary; its length must equal the word count.
    pub fn with_vocab(mut self, vocab: Vec<String>) -> Result<Self> {
        if vocab.len() != self.n_words {
            return Err(Error::Shape(format!(
                "vocabulary has {} entries but the corpus has {} words",
                vocab.len(),
                self.n_words
            )));
        }
        self.vocab = Some(vocab);
        Ok(self)
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_words(&self) -> usize {
        self.n_words
    }

    /// Sorted `(word, count)` entries of document `d`.
    pub fn doc(&self, d: usize) -> &[(u32, u32)] {
        &self.docs[d]
    }

    pub fn docs(&self) -> impl ExactSizeIterator<Item = &[(u32, u32)]> {
        self.docs.iter().map(Vec::as_slice)
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn vocab(&self) -> Option<&[String]> {
        self.vocab.as_deref()
    }

    /// Number of stored nonzero entries.
    pub fn nnz(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.doc_lengths.iter().sum()
    }

    /// Dense `M x V` count matrix.
    pub fn to_dense(&self) -> DMatrix<u32> {
        let mut out = DMatrix::zeros(self.num_docs(), self.n_words);
        for (d, doc) in self.docs.iter().enumerate() {
            for &(w, c) in doc {
                out[(d, w as usize)] = c;
            }
        }
        out
    }

    /// New corpus made of the given documents, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            n_words: self.n_words,
            doc_lengths: indices.iter().map(|&i| self.doc_lengths[i]).collect(),
            vocab: self.vocab.clone(),
        }
    }
}

/// Dense row-stochastic `M x V` matrix of word frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct DocMatrix<T: Real> {
    rows: DMatrix<T>,
}

impl<T: Real> DocMatrix<T> {
    /// Wraps `rows` after checking nonnegativity and unit row sums (1e-9).
    pub fn new(rows: DMatrix<T>) -> Result<Self> {
        let tol = T::of(1e-9).max(T::eps() * T::from_count(rows.ncols().max(1)) * T::of(4.0));
        for (i, row) in rows.row_iter().enumerate() {
            if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return Err(Error::Shape(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            if (row.sum() - T::one()).abs() > tol {
                return Err(Error::Shape(format!(
                    "row {i} sums to {} instead of 1",
                    row.sum()
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &DMatrix<T> {
        &self.rows
    }

    pub fn into_inner(self) -> DMatrix<T> {
        self.rows
    }

    pub fn num_docs(&self) -> usize {
        self.rows.nrows()
    }

    pub fn num_words(&self) -> usize {
        self.rows.ncols()
    }
}

/// Empirical word frequencies: row `m` is the count row divided by `N_m`.
pub fn normalize_counts<T: Real>(corpus: &Corpus) -> Result<DocMatrix<T>> {
    let mut rows = DMatrix::zeros(corpus.num_docs(), corpus.num_words());
    for (d, doc) in corpus.docs().enumerate() {
        let n = corpus.doc_lengths()[d];
        if n == 0 {
            return Err(Error::EmptyDocument { index: d });
        }
        let n = T::of(n as f64);
        for &(w, c) in doc {
            rows[(d, w as usize)] = T::of(f64::from(c)) / n;
        }
    }
    Ok(DocMatrix { rows })
}

/// Splits off `holdout_count` documents chosen by a seeded shuffle.
///
/// Returns `(train, heldout)`; both keep the original relative document
/// order.
pub fn split_holdout(corpus: &Corpus, holdout_count: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    let m = corpus.num_docs();
    if holdout_count == 0 || holdout_count >= m {
        return Err(Error::Config(format!(
            "holdout_count must lie in 1..{m}, got {holdout_count}"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut held = idx[..holdout_count].to_vec();
    let mut train = idx[holdout_count..].to_vec();
    held.sort_unstable();
    train.sort_unstable();
    Ok((corpus.subset(&train), corpus.subset(&held)))
}
