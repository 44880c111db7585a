//! Pipeline configuration and the five shipped presets.

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::features::NgramConfig;
use crate::linear_model::TrainConfig;
use crate::weighting::WeightingConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Problem whose classes stratify the folds; defaults to the scored one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratify_by: Option<String>,
}

fn default_k() -> usize {
    3
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 3,
            stratify_by: None,
        }
    }
}

/// Every knob of the extraction, weighting and training pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Label column to learn.
    pub problem: String,
    /// +1 side of a two-class problem. Defaults to the first class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_class: Option<String>,
    /// Explicit class order; lexicographic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_order: Option<Vec<String>>,
    #[serde(default)]
    pub ngram: NgramConfig,
    #[serde(default)]
    pub weighting: WeightingConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            name: None,
            problem: "task1".into(),
            positive_class: None,
            class_order: None,
            ngram: NgramConfig::default(),
            weighting: WeightingConfig::default(),
            train: TrainConfig::default(),
            cv: CvConfig::default(),
            seed: default_seed(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(raw: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks the invariants that do not depend on any data.
    pub fn validate(&self) -> Result<()> {
        if self.problem.is_empty() {
            return Err(Error::Config("problem name must be nonempty".into()));
        }
        self.ngram.validate()?;
        self.weighting.validate()?;
        self.train.validate()?;
        if self.cv.k < 2 {
            return Err(Error::Config(format!(
                "fold count must be at least 2, got {}",
                self.cv.k
            )));
        }
        Ok(())
    }

    pub fn stratify_by(&self) -> &str {
        self.cv.stratify_by.as_deref().unwrap_or(&self.problem)
    }

    /// Applies the configured class order to `d` and checks that every
    /// class named by the config exists in the scored problem.
    pub fn prepare(&self, d: Dataset) -> Result<Dataset> {
        self.validate()?;
        let d = match &self.class_order {
            Some(order) => d.with_class_order(&self.problem, order)?,
            None => d,
        };
        let classes = &d.problem(&self.problem)?.classes;
        let named = self.positive_class.iter().chain(self.train.class_weights.keys());
        for class in named {
            if !classes.contains(class) {
                return Err(Error::UnknownClass {
                    problem: self.problem.clone(),
                    class: class.clone(),
                });
            }
        }
        if self.positive_class.is_some() && classes.len() != 2 {
            return Err(Error::Config(format!(
                "positive_class only applies to two-class problems; {:?} has {}",
                self.problem,
                classes.len()
            )));
        }
        Ok(d)
    }
}

/// Names of the bundled presets.
pub const PRESET_NAMES: [&str; 5] = ["english1", "english2", "hindi1", "hindi2", "marathi"];

/// Raw JSON of a bundled preset.
pub fn preset_json(name: &str) -> Option<&'static str> {
    Some(match name {
        "english1" => include_str!("../../../presets/english1.json"),
        "english2" => include_str!("../../../presets/english2.json"),
        "hindi1" => include_str!("../../../presets/hindi1.json"),
        "hindi2" => include_str!("../../../presets/hindi2.json"),
        "marathi" => include_str!("../../../presets/marathi.json"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Option<PipelineConfig> {
    preset_json(name).map(|raw| PipelineConfig::from_json(raw).expect("bundled presets are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighting::{Normalization, Scheme};

    #[test]
    fn presets_parse() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.name.as_deref(), Some(name));
            assert_eq!(cfg.ngram.min_len, 1);
            assert_eq!(cfg.ngram.max_len, 5);
            assert_eq!(cfg.cv.k, 3);
        }
        assert!(preset("klingon").is_none());
    }

    #[test]
    fn english1_values() {
        let cfg = preset("english1").unwrap();
        assert_eq!(cfg.weighting.scheme, Scheme::SublinearTfidf);
        assert_eq!(cfg.weighting.normalization, Normalization::Minmax);
        assert_eq!(cfg.train.c, 1.1);
        assert_eq!(cfg.train.class_weight("HOF"), 0.5);
        assert_eq!(cfg.train.class_weight("NOT"), 1.0);
        assert!((cfg.train.cost_for("HOF") - 0.55).abs() < 1e-15);
        assert_eq!(cfg.stratify_by(), "task2");
    }

    #[test]
    fn hindi2_values() {
        let cfg = preset("hindi2").unwrap();
        assert_eq!(cfg.train.c, 0.083);
        assert_eq!(cfg.train.class_weight("PRFN"), 5.6);
        assert_eq!(cfg.weighting.normalization, Normalization::Minmax);
    }

    #[test]
    fn round_trip() {
        let cfg = preset("hindi1").unwrap();
        assert_eq!(PipelineConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = preset("marathi").unwrap();
        cfg.train.c = -1.0;
        assert!(cfg.validate().is_err());
        let raw = r#"{"problem":"task1","ngram":{"max_len":5},"unknown":1}"#;
        assert!(PipelineConfig::from_json(raw).is_err());
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"problem":"task1"}"#).unwrap();
        assert_eq!(cfg.weighting.k1, 2.0);
        assert_eq!(cfg.weighting.b, 0.75);
        assert_eq!(cfg.ngram.min_count, 2);
        assert_eq!(cfg.seed, 42);
    }
}
