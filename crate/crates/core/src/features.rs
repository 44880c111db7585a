//! Character n-gram extraction and vocabulary construction.
//!
//! Texts are lowercased and wrapped in two boundary sentinels, U+0002 before
//! the first character and U+0003 after the last, so n-grams touching the
//! start or end of a post are distinct features. All lengths are measured in
//! Unicode scalar values of the padded string.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const START: char = '\u{2}';
pub const END: char = '\u{3}';

/// Lowercases `text` and adds the boundary sentinels.
///
/// ```
/// use charclf::features::preprocess;
/// assert_eq!(preprocess("Ab"), "\u{2}ab\u{3}");
/// ```
pub fn preprocess(text: &str) -> String {
    let stripped: String = text.chars().filter(|&c| c != START && c != END).collect();
    let mut out = String::with_capacity(stripped.len() + 2);
    out.push(START);
    out.push_str(&stripped.to_lowercase());
    out.push(END);
    out
}

/// Byte offsets of every char boundary, including the final one.
fn boundaries(s: &str) -> Vec<usize> {
    s.char_indices().map(|(i, _)| i).chain([s.len()]).collect()
}

fn is_bare_sentinel(gram: &str) -> bool {
    let mut chars = gram.chars();
    matches!((chars.next(), chars.next()), (Some(START | END), None))
}

/// Calls `f` on every n-gram of `padded` with length in `min_len..=max_len`,
/// skipping the two bare sentinels. Order: by start position, then length.
pub fn for_each_ngram<'a>(padded: &'a str, min_len: usize, max_len: usize, mut f: impl FnMut(&'a str)) {
    let bounds = boundaries(padded);
    let n_chars = bounds.len() - 1;
    for start in 0..n_chars {
        for len in min_len..=max_len {
            let end = start + len;
            if end > n_chars {
                break;
            }
            let gram = &padded[bounds[start]..bounds[end]];
            if len == 1 && is_bare_sentinel(gram) {
                continue;
            }
            f(gram);
        }
    }
}

/// All n-grams of `padded` as an owned multiset.
pub fn extract_ngrams(padded: &str, min_len: usize, max_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    for_each_ngram(padded, min_len, max_len, |g| out.push(g.to_owned()));
    out
}

/// What the `min_count` threshold is compared against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneBy {
    /// Occurrences across the whole corpus.
    #[default]
    Total,
    /// Number of documents containing the n-gram.
    Df,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramConfig {
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    pub max_len: usize,
    #[serde(default = "default_min_count")]
    pub min_count: u64,
    #[serde(default)]
    pub prune_by: PruneBy,
}

fn default_min_len() -> usize {
    1
}

fn default_min_count() -> u64 {
    2
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            min_len: 1,
            max_len: 5,
            min_count: 2,
            prune_by: PruneBy::Total,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "n-gram lengths must satisfy 1 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

/// N-gram index with the corpus statistics needed by the weighting schemes.
///
/// Indices follow lexicographic (code point) order of the n-grams, so two
/// builds over the same corpus agree regardless of document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct Vocabulary {
    entries: Vec<(String, u32)>,
    lookup: HashMap<String, usize>,
    n_docs: usize,
    avg_dl: f64,
    config: NgramConfig,
}

#[derive(Serialize, Deserialize)]
struct VocabularyMeta {
    n_docs: usize,
    avg_dl: f64,
    min_len: usize,
    max_len: usize,
    min_count: u64,
    #[serde(default)]
    prune_by: PruneBy,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    meta: VocabularyMeta,
    entries: Vec<(String, u32)>,
}

impl From<Vocabulary> for VocabularyFile {
    fn from(v: Vocabulary) -> Self {
        VocabularyFile {
            meta: VocabularyMeta {
                n_docs: v.n_docs,
                avg_dl: v.avg_dl,
                min_len: v.config.min_len,
                max_len: v.config.max_len,
                min_count: v.config.min_count,
                prune_by: v.config.prune_by,
            },
            entries: v.entries,
        }
    }
}

impl TryFrom<VocabularyFile> for Vocabulary {
    type Error = Error;

    fn try_from(f: VocabularyFile) -> Result<Self> {
        let config = NgramConfig {
            min_len: f.meta.min_len,
            max_len: f.meta.max_len,
            min_count: f.meta.min_count,
            prune_by: f.meta.prune_by,
        };
        config.validate()?;
        for pair in f.entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::Config(format!(
                    "vocabulary entries out of order at {:?}",
                    pair[1].0
                )));
            }
        }
        if let Some((g, df)) = f
            .entries
            .iter()
            .find(|(_, df)| *df == 0 || *df as usize > f.meta.n_docs)
        {
            return Err(Error::Config(format!("n-gram {g:?} has invalid df {df}")));
        }
        Ok(Vocabulary::from_parts(f.entries, f.meta.n_docs, f.meta.avg_dl, config))
    }
}

impl Vocabulary {
    fn from_parts(entries: Vec<(String, u32)>, n_docs: usize, avg_dl: f64, config: NgramConfig) -> Self {
        let lookup = entries.iter().enumerate().map(|(i, (g, _))| (g.clone(), i)).collect();
        Vocabulary {
            entries,
            lookup,
            n_docs,
            avg_dl,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn avg_dl(&self) -> f64 {
        self.avg_dl
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    pub fn index_of(&self, gram: &str) -> Option<usize> {
        self.lookup.get(gram).copied()
    }

    pub fn ngram(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn df(&self, index: usize) -> u32 {
        self.entries[index].1
    }

    /// `(ngram, df)` pairs in index order.
    pub fn entries(&self) -> &[(String, u32)] {
        &self.entries
    }
}

/// Builds the vocabulary of `docs`, which must already be padded.
pub fn build_vocabulary(docs: &[String], config: &NgramConfig) -> Result<Vocabulary> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    // (total frequency, document frequency); integer sums make the merge
    // order irrelevant.
    let counts: HashMap<&str, (u64, u32)> = docs
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<&str, (u64, u32)>, doc| {
            let mut local: HashMap<&str, u64> = HashMap::new();
            for_each_ngram(doc, config.min_len, config.max_len, |g| {
                *local.entry(g).or_default() += 1;
            });
            for (g, n) in local {
                let slot = acc.entry(g).or_default();
                slot.0 += n;
                slot.1 += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (g, (total, df)) in b {
                let slot = a.entry(g).or_default();
                slot.0 += total;
                slot.1 += df;
            }
            a
        });

    let mut entries: Vec<(String, u32)> = counts
        .into_iter()
        .filter(|&(_, (total, df))| match config.prune_by {
            PruneBy::Total => total >= config.min_count,
            PruneBy::Df => df as u64 >= config.min_count,
        })
        .map(|(g, (_, df))| (g.to_owned(), df))
        .collect();
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let total_len: usize = docs.iter().map(|d| d.chars().count()).sum();
    let avg_dl = total_len as f64 / docs.len() as f64;
    Ok(Vocabulary::from_parts(entries, docs.len(), avg_dl, config.clone()))
}

/// Raw term frequencies of one padded document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseCounts {
    /// `(vocabulary index, tf)`, sorted by index.
    pub counts: Vec<(usize, u32)>,
    /// Padded length in Unicode scalar values.
    pub dl: usize,
}

/// Counts the in-vocabulary n-grams of `padded`. Unknown n-grams are dropped.
pub fn vectorize(padded: &str, v: &Vocabulary) -> SparseCounts {
    let mut tf: HashMap<usize, u32> = HashMap::new();
    for_each_ngram(padded, v.config.min_len, v.config.max_len, |g| {
        if let Some(i) = v.index_of(g) {
            *tf.entry(i).or_default() += 1;
        }
    });
    let mut counts: Vec<(usize, u32)> = tf.into_iter().collect();
    counts.sort_unstable();
    SparseCounts {
        counts,
        dl: padded.chars().count(),
    }
}
