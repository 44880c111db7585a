//! Feature weighting (sublinear TF-IDF, BM25) and per-instance normalization.
//!
//! Both schemes use natural logarithms. Corpus statistics (`N`, `df`,
//! average padded length) always come from the training vocabulary, also
//! when weighting documents at prediction time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{SparseCounts, Vocabulary};

/// Added to every MinMax-scaled score so the lowest present feature stays
/// distinguishable from an absent one.
pub const MINMAX_OFFSET: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SublinearTfidf,
    Bm25,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    L2,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightingConfig {
    pub scheme: Scheme,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub normalization: Normalization,
}

fn default_k1() -> f64 {
    2.0
}

fn default_b() -> f64 {
    0.75
}

impl Default for WeightingConfig {
    fn default() -> Self {
        WeightingConfig {
            scheme: Scheme::SublinearTfidf,
            k1: 2.0,
            b: 0.75,
            normalization: Normalization::L2,
        }
    }
}

impl WeightingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// `(1 + ln tf) * ln(n_docs / df)`
pub fn tfidf_weight(tf: u32, df: u32, n_docs: usize) -> f64 {
    (1.0 + (tf as f64).ln()) * (n_docs as f64 / df as f64).ln()
}

/// Okapi BM25 with the Robertson/Spärck Jones IDF.
///
/// The IDF goes negative once a term occurs in more than half the documents;
/// such values are returned as is.
pub fn bm25_weight(tf: u32, df: u32, n_docs: usize, dl: f64, avg_dl: f64, k1: f64, b: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let length_norm = 1.0 - b + b * dl / avg_dl;
    let saturation = tf / (tf + k1 * length_norm);
    let (n, df) = (n_docs as f64, df as f64);
    saturation * ((n - df + 0.5) / (df + 0.5)).ln()
}

/// One weighted, normalized instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    /// `(vocabulary index, score)`, sorted by index.
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Self {
        entries.sort_by_key(|e| e.0);
        SparseVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i] * v).sum()
    }
}

/// Scales to unit Euclidean norm. A zero vector is returned unchanged.
pub fn normalize_l2(x: &SparseVector) -> SparseVector {
    let norm = x.norm();
    if norm == 0.0 {
        return x.clone();
    }
    SparseVector {
        entries: x.entries.iter().map(|&(i, v)| (i, v / norm)).collect(),
    }
}

/// Per-instance MinMax: `(s - min) / (max - min) + 0.01` over the present
/// features. When every present score is equal, all of them become `1.01`.
pub fn normalize_minmax(x: &SparseVector) -> SparseVector {
    let Some(min) = x.entries.iter().map(|e| e.1).reduce(f64::min) else {
        return x.clone();
    };
    let max = x.entries.iter().map(|e| e.1).fold(min, f64::max);
    let range = max - min;
    let entries = x
        .entries
        .iter()
        .map(|&(i, v)| {
            let scaled = if range > 0.0 { (v - min) / range } else { 1.0 };
            (i, scaled + MINMAX_OFFSET)
        })
        .collect();
    SparseVector { entries }
}

/// Weights `counts` with `v`'s corpus statistics, then normalizes.
pub fn apply_weighting(counts: &SparseCounts, v: &Vocabulary, cfg: &WeightingConfig) -> SparseVector {
    let n_docs = v.n_docs();
    let dl = counts.dl as f64;
    let raw = counts
        .counts
        .iter()
        .map(|&(i, tf)| {
            let df = v.df(i);
            let score = match cfg.scheme {
                Scheme::SublinearTfidf => tfidf_weight(tf, df, n_docs),
                Scheme::Bm25 => bm25_weight(tf, df, n_docs, dl, v.avg_dl(), cfg.k1, cfg.b),
            };
            (i, score)
        })
        .collect();
    let raw = SparseVector { entries: raw };
    match cfg.normalization {
        Normalization::L2 => normalize_l2(&raw),
        Normalization::Minmax => normalize_minmax(&raw),
    }
}
