//! A trained pipeline: vocabulary, weighting and one-vs-rest weights bundled
//! so raw text can be classified exactly as the training data was.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, preprocess, vectorize, Vocabulary};
use crate::linear_model::{train_ovr, BinaryModel, OneVsRest};
use crate::weighting::{apply_weighting, SparseVector};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    config: PipelineConfig,
    vocabulary: Vocabulary,
    ovr: OneVsRest,
}

/// Turns raw texts into weighted, normalized vectors against `v`.
pub fn featurize_all(texts: &[&str], v: &Vocabulary, cfg: &PipelineConfig) -> Vec<SparseVector> {
    texts
        .par_iter()
        .map(|t| apply_weighting(&vectorize(&preprocess(t), v), v, &cfg.weighting))
        .collect()
}

/// Builds the vocabulary on `texts` and trains the classifier.
///
/// `labels[i]` indexes `classes`.
pub fn fit_texts(texts: &[&str], labels: &[usize], classes: &[String], cfg: &PipelineConfig) -> Result<LinearModel> {
    cfg.validate()?;
    if texts.len() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} texts, {} labels",
            texts.len(),
            labels.len()
        )));
    }
    let padded: Vec<String> = texts.par_iter().map(|t| preprocess(t)).collect();
    let vocabulary = build_vocabulary(&padded, &cfg.ngram)?;
    let x: Vec<SparseVector> = padded
        .par_iter()
        .map(|p| apply_weighting(&vectorize(p, &vocabulary), &vocabulary, &cfg.weighting))
        .collect();
    let ovr = train_ovr(
        &x,
        labels,
        classes,
        cfg.positive_class.as_deref(),
        vocabulary.len(),
        &cfg.train,
    )?;
    Ok(LinearModel {
        config: cfg.clone(),
        vocabulary,
        ovr,
    })
}

/// Trains on every document of `d` for `cfg.problem`.
pub fn fit(d: &Dataset, cfg: &PipelineConfig) -> Result<LinearModel> {
    let d = cfg.prepare(d.clone())?;
    let classes = d.problem(&cfg.problem)?.classes.clone();
    let labels = d.labels(&cfg.problem)?;
    let labels = class_indices(&labels, &classes);
    let texts: Vec<&str> = d.documents().iter().map(|doc| doc.text.as_str()).collect();
    fit_texts(&texts, &labels, &classes, cfg)
}

pub(crate) fn class_indices(labels: &[&str], classes: &[String]) -> Vec<usize> {
    labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .expect("label validated against class list")
        })
        .collect()
}

impl LinearModel {
    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn classifier(&self) -> &OneVsRest {
        &self.ovr
    }

    pub fn classes(&self) -> &[String] {
        self.ovr.classes()
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        let padded = preprocess(text);
        apply_weighting(
            &vectorize(&padded, &self.vocabulary),
            &self.vocabulary,
            &self.config.weighting,
        )
    }

    pub fn decision_values(&self, text: &str) -> Vec<f64> {
        self.ovr.decision_values(&self.featurize(text))
    }

    pub fn predict(&self, text: &str) -> &str {
        self.ovr.predict(&self.featurize(text))
    }

    /// Class indices for a batch of texts, in input order.
    pub fn predict_indices(&self, texts: &[&str]) -> Vec<usize> {
        featurize_all(texts, &self.vocabulary, &self.config)
            .iter()
            .map(|x| self.ovr.predict_index(x))
            .collect()
    }

    pub fn predict_batch(&self, texts: &[&str]) -> Vec<&str> {
        self.predict_indices(texts)
            .into_iter()
            .map(|i| self.classes()[i].as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(raw)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    classes: Vec<String>,
    config: PipelineConfig,
    vocabulary: Vocabulary,
    models: Vec<StoredBinary>,
}

#[derive(Serialize, Deserialize)]
struct StoredBinary {
    class: String,
    /// Nonzero weights as `(index, value)`.
    weights: Vec<(usize, f64)>,
    bias: f64,
}

impl From<&LinearModel> for ModelFile {
    fn from(m: &LinearModel) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            classes: m.classes().to_vec(),
            config: m.config.clone(),
            vocabulary: m.vocabulary.clone(),
            models: m
                .ovr
                .models()
                .iter()
                .map(|b| StoredBinary {
                    class: b.positive_class.clone(),
                    weights: b
                        .weights
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0.0)
                        .map(|(i, w)| (i, *w))
                        .collect(),
                    bias: b.bias,
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for LinearModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: f.format_version,
                expected: FORMAT_VERSION,
            });
        }
        f.config.validate()?;
        let n = f.vocabulary.len();
        let models = f
            .models
            .into_iter()
            .map(|s| {
                let mut weights = vec![0.0; n];
                for (i, w) in s.weights {
                    *weights
                        .get_mut(i)
                        .ok_or_else(|| Error::Config(format!("weight index {i} outside vocabulary of size {n}")))? = w;
                }
                Ok(BinaryModel {
                    positive_class: s.class,
                    weights,
                    bias: s.bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LinearModel {
            config: f.config,
            vocabulary: f.vocabulary,
            ovr: OneVsRest::from_parts(f.classes, models)?,
        })
    }
}
