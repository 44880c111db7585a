//! Macro-F1 scoring, stratified cross-validation and hyperparameter search.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::{split_stratified, Dataset, FoldAssignment};
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::pipeline::{class_indices, fit_texts};
use crate::weighting::{Normalization, Scheme};

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Builds the matrix from class indices.
    pub fn from_indices(classes: Vec<String>, gold: &[usize], pred: &[usize]) -> Result<Self> {
        if gold.len() != pred.len() {
            return Err(Error::LengthMismatch(format!(
                "{} gold, {} predicted",
                gold.len(),
                pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&g, &p) in gold.iter().zip(pred) {
            cm.counts[g][p] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Adds `other`'s counts; both must share the class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes, other.classes);
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }

    /// Precision, recall and F1 of every class. Any zero denominator yields 0.
    pub fn per_class(&self) -> Vec<ClassScore> {
        let n = self.classes.len();
        (0..n)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let predicted = (0..n).map(|g| self.counts[g][c]).sum::<u64>() as f64;
                let actual = self.counts[c].iter().sum::<u64>() as f64;
                let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
                let recall = if actual > 0.0 { tp / actual } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassScore {
                    class: self.classes[c].clone(),
                    precision,
                    recall,
                    f1,
                    support: actual as u64,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Confusion matrix of two label lists over `classes`.
pub fn confusion(gold: &[&str], pred: &[&str], classes: &[String]) -> Result<ConfusionMatrix> {
    let index = |label: &str| {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::UnknownClass {
                problem: "evaluation".into(),
                class: label.to_owned(),
            })
    };
    let gold = gold.iter().map(|g| index(g)).collect::<Result<Vec<_>>>()?;
    let pred = pred.iter().map(|p| index(p)).collect::<Result<Vec<_>>>()?;
    ConfusionMatrix::from_indices(classes.to_vec(), &gold, &pred)
}

/// Unweighted mean of per-class F1. Classes with no gold and no predicted
/// instance count as 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let scores = cm.per_class();
    if scores.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for s in &scores {
        sum += s.f1;
    }
    sum / scores.len() as f64
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .classes
            .iter()
            .map(|c| c.len())
            .chain(self.counts.iter().flatten().map(|n| n.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        write!(f, "{:<width$}", "gold\\pred")?;
        for c in &self.classes {
            write!(f, "  {c:>width$}")?;
        }
        writeln!(f)?;
        for (c, row) in self.classes.iter().zip(&self.counts) {
            write!(f, "{c:<width$}", width = width.max(9))?;
            for n in row {
                write!(f, "  {n:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub problem: String,
    pub stratify_by: String,
    pub k: usize,
    pub seed: u64,
    pub config: PipelineConfig,
    pub fold_macro_f1: Vec<f64>,
    pub mean_macro_f1: f64,
    pub pooled: ConfusionMatrix,
    pub pooled_macro_f1: f64,
}

/// What happened inside one fold.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Vocabulary the fold's model was trained with.
    pub vocabulary: Vocabulary,
    pub confusion: ConfusionMatrix,
}

/// Stratified k-fold evaluation of `cfg` on `d`.
///
/// Folds are stratified by `cfg.cv.stratify_by` (default: the scored
/// problem) using `cfg.seed`. Each fold's vocabulary and corpus statistics
/// come from its training part only.
pub fn cross_validate(d: &Dataset, cfg: &PipelineConfig) -> Result<CVReport> {
    cross_validate_detailed(d, cfg).map(|(report, _)| report)
}

pub fn cross_validate_detailed(d: &Dataset, cfg: &PipelineConfig) -> Result<(CVReport, Vec<FoldOutcome>)> {
    let d = cfg.prepare(d.clone())?;
    let folds = split_stratified(&d, cfg.cv.k, cfg.stratify_by(), cfg.seed)?;
    cross_validate_with_folds(&d, cfg, &folds)
}

/// Cross-validation over an existing fold assignment.
pub fn cross_validate_with_folds(
    d: &Dataset,
    cfg: &PipelineConfig,
    folds: &FoldAssignment,
) -> Result<(CVReport, Vec<FoldOutcome>)> {
    if folds.assignment.len() != d.len() {
        return Err(Error::LengthMismatch(format!(
            "{} fold entries for {} documents",
            folds.assignment.len(),
            d.len()
        )));
    }
    let classes = d.problem(&cfg.problem)?.classes.clone();
    let labels = class_indices(&d.labels(&cfg.problem)?, &classes);
    let texts: Vec<&str> = d.documents().iter().map(|doc| doc.text.as_str()).collect();

    let outcomes = (0..folds.k)
        .into_par_iter()
        .map(|fold| {
            let train = folds.train_indices(fold);
            let test = folds.test_indices(fold);
            let train_texts: Vec<&str> = train.iter().map(|&i| texts[i]).collect();
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = fit_texts(&train_texts, &train_labels, &classes, cfg)?;
            let test_texts: Vec<&str> = test.iter().map(|&i| texts[i]).collect();
            let gold: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let pred = model.predict_indices(&test_texts);
            let confusion = ConfusionMatrix::from_indices(classes.clone(), &gold, &pred)?;
            Ok(FoldOutcome {
                fold,
                train_indices: train,
                test_indices: test,
                vocabulary: model.vocabulary().clone(),
                confusion,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let fold_macro_f1: Vec<f64> = outcomes.iter().map(|o| macro_f1(&o.confusion)).collect();
    let mut pooled = ConfusionMatrix::new(classes);
    for o in &outcomes {
        pooled.merge(&o.confusion);
    }
    let report = CVReport {
        problem: cfg.problem.clone(),
        stratify_by: folds.stratify_by.clone(),
        k: folds.k,
        seed: folds.seed,
        config: cfg.clone(),
        mean_macro_f1: fold_macro_f1.iter().sum::<f64>() / fold_macro_f1.len() as f64,
        fold_macro_f1,
        pooled_macro_f1: macro_f1(&pooled),
        pooled,
    };
    Ok((report, outcomes))
}

/// Grid over the regularization constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CGrid {
    Values(Vec<f64>),
    /// `steps` values evenly spaced in log scale from `min` to `max`.
    LogRange {
        min: f64,
        max: f64,
        steps: usize,
    },
}

impl CGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            CGrid::Values(ref v) => v.clone(),
            CGrid::LogRange { min, max, steps } => {
                if steps == 1 {
                    return vec![min];
                }
                // Base 10 so decades come out exact.
                let (lo, hi) = (min.log10(), max.log10());
                (0..steps)
                    .map(|i| match i {
                        0 => min,
                        i if i == steps - 1 => max,
                        i => 10f64.powf(lo + (hi - lo) * i as f64 / (steps - 1) as f64),
                    })
                    .collect()
            }
        }
    }
}

/// Axes of the hyperparameter search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub max_ngram_len: Vec<usize>,
    pub scheme: Vec<Scheme>,
    pub normalization: Vec<Normalization>,
    pub c: CGrid,
    /// Candidate weights per class; unlisted classes keep the base config.
    #[serde(default)]
    pub class_weights: BTreeMap<String, Vec<f64>>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let empty = |axis: &str| Err(Error::Config(format!("search axis {axis} is empty")));
        if self.max_ngram_len.is_empty() {
            return empty("max_ngram_len");
        }
        if let Some(n) = self.max_ngram_len.iter().find(|n| !(4..=8).contains(*n)) {
            return Err(Error::Config(format!("max n-gram length {n} outside 4..=8")));
        }
        if self.scheme.is_empty() {
            return empty("scheme");
        }
        if self.normalization.is_empty() {
            return empty("normalization");
        }
        let cs = self.c.values();
        if cs.is_empty() {
            return empty("C");
        }
        if let Some(c) = cs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("C value {c} is not positive")));
        }
        for (class, ws) in &self.class_weights {
            if ws.is_empty() {
                return empty(&format!("class_weights.{class}"));
            }
            if let Some(w) = ws.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                return Err(Error::Config(format!("weight {w} for {class:?} is not positive")));
            }
        }
        Ok(())
    }

    fn axes(&self) -> Vec<usize> {
        let mut sizes = vec![
            self.max_ngram_len.len(),
            self.scheme.len(),
            self.normalization.len(),
            self.c.values().len(),
        ];
        sizes.extend(self.class_weights.values().map(Vec::len));
        sizes
    }

    /// Number of grid points.
    pub fn size(&self) -> usize {
        self.axes().iter().product()
    }

    /// Grid point `index` in enumeration order (the last class weight varies
    /// fastest, maximum n-gram length slowest).
    pub fn point(&self, index: usize) -> Vec<usize> {
        let sizes = self.axes();
        let mut choice = vec![0; sizes.len()];
        let mut rest = index;
        for (slot, &size) in choice.iter_mut().zip(&sizes).rev() {
            *slot = rest % size;
            rest /= size;
        }
        choice
    }

    fn apply(&self, base: &PipelineConfig, choice: &[usize]) -> PipelineConfig {
        let mut cfg = base.clone();
        cfg.ngram.max_len = self.max_ngram_len[choice[0]];
        cfg.weighting.scheme = self.scheme[choice[1]];
        cfg.weighting.normalization = self.normalization[choice[2]];
        cfg.train.c = self.c.values()[choice[3]];
        for ((class, ws), &pick) in self.class_weights.iter().zip(&choice[4..]) {
            cfg.train.class_weights.insert(class.clone(), ws[pick]);
        }
        cfg.name = None;
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Grid,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Position in evaluation order; breaks ranking ties.
    pub index: usize,
    pub config: PipelineConfig,
}

/// The configurations a search with these arguments evaluates, in order.
///
/// Grid mode takes the first `budget` grid points. Random mode draws
/// `budget` points, each axis uniformly and independently, from a ChaCha8
/// stream seeded with `seed`.
pub fn candidates(
    base: &PipelineConfig,
    space: &SearchSpace,
    budget: usize,
    mode: SearchMode,
    seed: u64,
) -> Result<Vec<Candidate>> {
    space.validate()?;
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    let choices: Vec<Vec<usize>> = match mode {
        SearchMode::Grid => (0..budget.min(space.size())).map(|i| space.point(i)).collect(),
        SearchMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sizes = space.axes();
            (0..budget)
                .map(|_| sizes.iter().map(|&s| rng.gen_range(0..s)).collect())
                .collect()
        }
    };
    Ok(choices
        .iter()
        .enumerate()
        .map(|(index, choice)| Candidate {
            index,
            config: space.apply(base, choice),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub rank: usize,
    pub candidate: usize,
    pub report: CVReport,
}

/// Cross-validates every candidate and ranks them by mean fold Macro-F1.
pub fn search(
    d: &Dataset,
    base: &PipelineConfig,
    space: &SearchSpace,
    budget: usize,
    mode: SearchMode,
    seed: u64,
) -> Result<Vec<SearchResult>> {
    let cands = candidates(base, space, budget, mode, seed)?;
    let reports = cands
        .par_iter()
        .map(|c| cross_validate(d, &c.config))
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<(usize, CVReport)> = reports.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.mean_macro_f1.total_cmp(&a.1.mean_macro_f1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .enumerate()
        .map(|(pos, (candidate, report))| SearchResult {
            rank: pos + 1,
            candidate,
            report,
        })
        .collect())
}

/// Ranked CSV: one row per evaluated configuration.
pub fn search_csv(results: &[SearchResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "rank",
        "candidate",
        "max_ngram_len",
        "scheme",
        "normalization",
        "c",
        "class_weights",
        "mean_macro_f1",
        "pooled_macro_f1",
    ])?;
    for r in results {
        let cfg = &r.report.config;
        let weights = cfg
            .train
            .class_weights
            .iter()
            .map(|(c, w)| format!("{c}={w}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.rank.to_string(),
            r.candidate.to_string(),
            cfg.ngram.max_len.to_string(),
            scheme_name(cfg.weighting.scheme).to_string(),
            normalization_name(cfg.weighting.normalization).to_string(),
            cfg.train.c.to_string(),
            weights,
            format!("{:.6}", r.report.mean_macro_f1),
            format!("{:.6}", r.report.pooled_macro_f1),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::SublinearTfidf => "sublinear_tfidf",
        Scheme::Bm25 => "bm25",
    }
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::L2 => "l2",
        Normalization::Minmax => "minmax",
    }
}
