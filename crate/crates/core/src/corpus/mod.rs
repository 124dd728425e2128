//! Acoustic documents and their discrete representations.
//!
//! A [`FeatureDocument`] is one utterance as a sequence of real-valued frames.
//! Quantizing it against a GMM codebook yields a [`SymbolDocument`], and
//! counting symbols yields the order-free [`BagOfSounds`] that LDA consumes.

mod format;
pub mod synthetic;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{
    load_features, read_bags, read_features_csv, read_features_jsonl, read_symbols,
    write_bags, write_features_csv, write_features_jsonl, write_symbols, FeatureFormat,
};
pub use synthetic::{generate_synthetic_lda_corpus, SyntheticLdaCorpus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDocument {
    pub id: String,
    #[serde(rename = "group", default)]
    pub group_label: Option<String>,
    pub frames: Vec<Vec<f64>>,
}

impl FeatureDocument {
    pub fn new(id: impl Into<String>, group_label: Option<String>, frames: Vec<Vec<f64>>) -> Self {
        Self {
            id: id.into(),
            group_label,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame dimension, or `None` for a document without frames.
    pub fn dim(&self) -> Option<usize> {
        self.frames.first().map(Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDocument {
    pub id: String,
    #[serde(rename = "group", default)]
    pub group_label: Option<String>,
    pub symbols: Vec<usize>,
}

impl SymbolDocument {
    pub fn new(id: impl Into<String>, group_label: Option<String>, symbols: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            group_label,
            symbols,
        }
    }
}

/// Symbol histogram of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfSounds {
    pub id: String,
    #[serde(rename = "group", default)]
    pub group_label: Option<String>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl BagOfSounds {
    pub fn from_counts(id: impl Into<String>, group_label: Option<String>, counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self {
            id: id.into(),
            group_label,
            counts,
            total,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    /// `(symbol, count)` pairs for symbols that occur at least once.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(w, &c)| (w, c))
    }
}

/// Counts symbol occurrences into a length-`vocab_size` histogram.
pub fn to_bag(doc: &SymbolDocument, vocab_size: usize) -> Result<BagOfSounds> {
    let mut counts = vec![0u64; vocab_size];
    for &s in &doc.symbols {
        if s >= vocab_size {
            return Err(Error::SymbolOutOfRange {
                symbol: s,
                vocab_size,
            });
        }
        counts[s] += 1;
    }
    Ok(BagOfSounds::from_counts(
        doc.id.clone(),
        doc.group_label.clone(),
        counts,
    ))
}

/// Checks the load-time invariants: unique ids, a single shared frame
/// dimension, and finite values. Returns the shared dimension (`None` when
/// there are no frames at all).
pub fn validate_features(docs: &[FeatureDocument]) -> Result<Option<usize>> {
    let mut seen = HashSet::with_capacity(docs.len());
    let mut dim: Option<usize> = None;
    for doc in docs {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::DuplicateId(doc.id.clone()));
        }
        for (t, frame) in doc.frames.iter().enumerate() {
            match dim {
                None => dim = Some(frame.len()),
                Some(d) if d != frame.len() => {
                    return Err(Error::dims(
                        format!("document `{}` frame {t}", doc.id),
                        d,
                        frame.len(),
                    ))
                }
                _ => {}
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    doc_id: doc.id.clone(),
                    frame: t,
                });
            }
        }
    }
    if dim == Some(0) {
        return Err(Error::InvalidArgument("frames have dimension 0".into()));
    }
    Ok(dim)
}

/// Checks that bags share one vocabulary size, have consistent totals and
/// unique ids. Returns the vocabulary size (`None` for an empty list).
pub fn validate_bags(bags: &[BagOfSounds]) -> Result<Option<usize>> {
    let mut seen = HashSet::with_capacity(bags.len());
    let mut vocab = None;
    for bag in bags {
        if !seen.insert(bag.id.as_str()) {
            return Err(Error::DuplicateId(bag.id.clone()));
        }
        match vocab {
            None => vocab = Some(bag.vocab_size()),
            Some(v) if v != bag.vocab_size() => {
                return Err(Error::dims(
                    format!("bag `{}` vocabulary", bag.id),
                    v,
                    bag.vocab_size(),
                ))
            }
            _ => {}
        }
        let sum: u64 = bag.counts.iter().sum();
        if sum != bag.total {
            return Err(Error::InvalidArgument(format!(
                "bag `{}` total {} does not match count sum {sum}",
                bag.id, bag.total
            )));
        }
    }
    Ok(vocab)
}

/// Stacks all frames of all documents into one list (for GMM training).
pub fn pool_frames(docs: &[FeatureDocument]) -> Vec<Vec<f64>> {
    docs.iter().flat_map(|d| d.frames.iter().cloned()).collect()
}
