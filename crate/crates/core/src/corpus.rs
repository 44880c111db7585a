//! Labeled document collections, descriptive statistics and stratified folds.
//!
//! Data travels as UTF-8 TSV with a header row. The `id` and `text` columns
//! are mandatory; every other column is a label column naming a problem
//! (for example `task1`, `task2`). Tabs, newlines, carriage returns and
//! backslashes inside a cell are written as `\t`, `\n`, `\r` and `\\`. An
//! empty label cell means the document carries no label for that problem.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// problem name -> class name
    pub labels: BTreeMap<String, String>,
}

impl Document {
    pub fn label(&self, problem: &str) -> Option<&str> {
        self.labels.get(problem).map(String::as_str)
    }
}

/// A classification problem declared by a label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    /// Fixed class order. Tie-breaking downstream depends on it.
    pub classes: Vec<String>,
}

/// An immutable, validated collection of documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    documents: Vec<Document>,
    problems: Vec<Problem>,
}

impl Dataset {
    /// Builds a dataset, inferring each problem's classes as the sorted
    /// distinct label values.
    pub fn new(documents: Vec<Document>, problem_names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(Error::Config("document id must be nonempty".into()));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }

        let mut problems = Vec::with_capacity(problem_names.len());
        for name in problem_names {
            let classes: BTreeSet<&str> = documents.iter().filter_map(|d| d.label(&name)).collect();
            if classes.len() < 2 {
                return Err(Error::TooFewClasses {
                    problem: name,
                    found: classes.len(),
                });
            }
            let classes = classes.into_iter().map(str::to_owned).collect();
            problems.push(Problem { name, classes });
        }

        for doc in &documents {
            for problem in doc.labels.keys() {
                if !problems.iter().any(|p| &p.name == problem) {
                    return Err(Error::UnknownProblem(problem.clone()));
                }
            }
        }

        Ok(Dataset { documents, problems })
    }

    /// Replaces the inferred class order of `problem`.
    ///
    /// `order` must list every observed class exactly once; it may also name
    /// classes that never occur in this particular file.
    pub fn with_class_order(mut self, problem: &str, order: &[String]) -> Result<Self> {
        let unique: BTreeSet<&String> = order.iter().collect();
        if unique.len() != order.len() {
            return Err(Error::Config(format!(
                "class order for {problem:?} lists a class twice"
            )));
        }
        if order.len() < 2 {
            return Err(Error::TooFewClasses {
                problem: problem.to_owned(),
                found: order.len(),
            });
        }
        let slot = self
            .problems
            .iter_mut()
            .find(|p| p.name == problem)
            .ok_or_else(|| Error::UnknownProblem(problem.to_owned()))?;
        for class in &slot.classes {
            if !unique.contains(class) {
                return Err(Error::UnknownClass {
                    problem: problem.to_owned(),
                    class: class.clone(),
                });
            }
        }
        slot.classes = order.to_vec();
        Ok(self)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn problem(&self, name: &str) -> Result<&Problem> {
        self.problems
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::UnknownProblem(name.to_owned()))
    }

    /// Gold labels of `problem` in document order. Fails if any document is
    /// unlabeled for it.
    pub fn labels(&self, problem: &str) -> Result<Vec<&str>> {
        self.problem(problem)?;
        self.documents
            .iter()
            .map(|d| {
                d.label(problem).ok_or_else(|| Error::MissingLabel {
                    id: d.id.clone(),
                    problem: problem.to_owned(),
                })
            })
            .collect()
    }

    /// Normalized TSV rendering. Loading the output gives back an equal
    /// dataset, and rendering that again gives the same bytes.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\ttext");
        for p in &self.problems {
            out.push('\t');
            out.push_str(&escape_cell(&p.name));
        }
        out.push('\n');
        for doc in &self.documents {
            out.push_str(&escape_cell(&doc.id));
            out.push('\t');
            out.push_str(&escape_cell(&doc.text));
            for p in &self.problems {
                out.push('\t');
                if let Some(label) = doc.label(&p.name) {
                    out.push_str(&escape_cell(label));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Reads a labeled TSV file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&raw)
}

/// Parses labeled TSV text. At least one label column is required.
pub fn parse_dataset(raw: &str) -> Result<Dataset> {
    let table = parse_table(raw)?;
    if table.label_columns.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "header declares no label column".into(),
        });
    }
    Dataset::new(table.documents, table.label_columns)
}

/// Reads `id` and `text` only; label columns, if any, are ignored.
pub fn load_unlabeled(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut docs = parse_table(&raw)?.documents;
    for d in &mut docs {
        d.labels.clear();
    }
    Ok(docs)
}

struct Table {
    label_columns: Vec<String>,
    documents: Vec<Document>,
}

fn parse_table(raw: &str) -> Result<Table> {
    let mut lines = raw.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate();

    let header = match lines.next() {
        Some((_, h)) if !h.trim().is_empty() => h,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let columns: Vec<String> = header.split('\t').map(unescape_cell).collect();
    let position = |name: &str| columns.iter().position(|c| c == name);
    let id_col = position("id").ok_or_else(|| Error::MissingColumn("id".into()))?;
    let text_col = position("text").ok_or_else(|| Error::MissingColumn("text".into()))?;
    let label_cols: Vec<usize> = (0..columns.len()).filter(|&i| i != id_col && i != text_col).collect();
    let mut names = HashSet::new();
    for c in &columns {
        if !names.insert(c.as_str()) {
            return Err(Error::Parse {
                line: 1,
                message: format!("column {c:?} declared twice"),
            });
        }
    }

    let mut documents = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != columns.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} columns, found {}", columns.len(), cells.len()),
            });
        }
        let id = unescape_cell(cells[id_col]);
        if id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty id".into(),
            });
        }
        let labels = label_cols
            .iter()
            .filter(|&&c| !cells[c].is_empty())
            .map(|&c| (columns[c].clone(), unescape_cell(cells[c])))
            .collect();
        documents.push(Document {
            id,
            text: unescape_cell(cells[text_col]),
            labels,
        });
    }

    Ok(Table {
        label_columns: label_cols.iter().map(|&c| columns[c].clone()).collect(),
        documents,
    })
}

pub fn escape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub problem: String,
    pub classes: Vec<ClassStats>,
    /// Documents without a label for this problem.
    pub unlabeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub documents: usize,
    pub empty_documents: usize,
    /// Mean text length in Unicode scalar values, before padding.
    pub mean_length_chars: f64,
    pub problems: Vec<ProblemStats>,
}

pub fn dataset_stats(d: &Dataset) -> StatsReport {
    let lengths: Vec<usize> = d.documents.iter().map(|x| x.text.chars().count()).collect();
    let mean_length_chars = if lengths.is_empty() {
        0.0
    } else {
        lengths.iter().sum::<usize>() as f64 / lengths.len() as f64
    };

    let problems = d
        .problems
        .iter()
        .map(|p| {
            let mut counts = vec![0usize; p.classes.len()];
            let mut unlabeled = 0;
            for doc in &d.documents {
                match doc.label(&p.name) {
                    Some(l) => {
                        let i = p.classes.iter().position(|c| c == l).expect("validated");
                        counts[i] += 1;
                    }
                    None => unlabeled += 1,
                }
            }
            let labeled: usize = counts.iter().sum();
            let classes = p
                .classes
                .iter()
                .zip(counts)
                .map(|(class, count)| ClassStats {
                    class: class.clone(),
                    count,
                    percent: if labeled == 0 {
                        0.0
                    } else {
                        100.0 * count as f64 / labeled as f64
                    },
                })
                .collect();
            ProblemStats {
                problem: p.name.clone(),
                classes,
                unlabeled,
            }
        })
        .collect();

    StatsReport {
        documents: d.len(),
        empty_documents: lengths.iter().filter(|&&l| l == 0).count(),
        mean_length_chars,
        problems,
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents        {}", self.documents)?;
        writeln!(f, "empty documents  {}", self.empty_documents)?;
        writeln!(f, "mean length      {:.1} chars", self.mean_length_chars)?;
        for p in &self.problems {
            writeln!(f)?;
            writeln!(f, "problem {}", p.problem)?;
            let width = p.classes.iter().map(|c| c.class.len()).max().unwrap_or(0).max(5);
            writeln!(f, "  {:<width$}  {:>8}  {:>6}", "class", "#", "%")?;
            for c in &p.classes {
                writeln!(f, "  {:<width$}  {:>8}  {:>6.1}", c.class, c.count, c.percent)?;
            }
            if p.unlabeled > 0 {
                writeln!(f, "  {:<width$}  {:>8}", "(none)", p.unlabeled)?;
            }
        }
        Ok(())
    }
}

/// Fold membership for every document of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold of each document, in document order.
    pub assignment: Vec<usize>,
    pub seed: u64,
    pub stratify_by: String,
}

impl FoldAssignment {
    /// Document indices held out in fold `f`.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == f)
            .collect()
    }

    /// Document indices used for training when fold `f` is held out.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != f)
            .collect()
    }
}

/// Stratified k-fold assignment.
///
/// Each class's members are shuffled with a ChaCha8 stream seeded by `seed`
/// and dealt round-robin into the folds. The dealing position carries over
/// from one class to the next so fold sizes stay balanced overall. Every
/// class therefore lands `floor(n/k)` or `ceil(n/k)` times in each fold.
pub fn split_stratified(d: &Dataset, k: usize, problem: &str, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let classes = &d.problem(problem)?.classes;
    let labels = d.labels(problem)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, label) in labels.iter().enumerate() {
        let c = classes.iter().position(|c| c == label).expect("validated");
        members[c].push(i);
    }
    for (class, m) in classes.iter().zip(&members) {
        // Classes declared through a class order but absent from this data
        // have nothing to distribute.
        if !m.is_empty() && m.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                size: m.len(),
                k,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; d.len()];
    let mut next = 0usize;
    for mut group in members {
        group.shuffle(&mut rng);
        for doc in group {
            assignment[doc] = next;
            next = (next + 1) % k;
        }
    }

    Ok(FoldAssignment {
        k,
        assignment,
        seed,
        stratify_by: problem.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str, label: &str) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            labels: [("task1".to_string(), label.to_string())].into(),
        }
    }

    fn balanced(per_class: &[(&str, usize)]) -> Dataset {
        let mut docs = Vec::new();
        for (class, n) in per_class {
            for i in 0..*n {
                docs.push(doc(&format!("{class}{i}"), "x", class));
            }
        }
        Dataset::new(docs, vec!["task1".into()]).unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let d = parse_dataset("id\ttext\ttask1\nt1\thello\tNOT\nt2\tyou\tHOF\nt3\tok\tNOT\n").unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.problem("task1").unwrap().classes, vec!["HOF", "NOT"]);
    }

    #[test]
    fn duplicate_id_is_named() {
        let err = parse_dataset("id\ttext\ttask1\nt1\ta\tNOT\nt1\tb\tHOF\n").unwrap_err();
        assert!(matches!(&err, Error::DuplicateId(id) if id == "t1"));
        assert!(err.to_string().contains("t1"));
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let err = parse_dataset("id\ttext\ttask1\nt1\ta\tNOT\nt2\tb\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_text_column() {
        let err = parse_dataset("id\tbody\ttask1\nt1\ta\tNOT\n").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "text"));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(parse_dataset("").is_err());
    }

    #[test]
    fn escapes_survive_round_trip() {
        let raw = "id\ttext\ttask1\nt1\ttab\\there\\nnew \\\\ slash\tA\nt2\t\tB\n";
        let d = parse_dataset(raw).unwrap();
        assert_eq!(d.documents()[0].text, "tab\there\nnew \\ slash");
        assert_eq!(d.documents()[1].text, "");
        assert_eq!(d.to_tsv(), raw);
    }

    #[test]
    fn unlabeled_cells_are_absent_labels() {
        let raw = "id\ttext\ttask1\ttask2\na\tx\tNOT\tNONE\nb\ty\tHOF\tHATE\nc\tz\tHOF\t\n";
        let d = parse_dataset(raw).unwrap();
        assert_eq!(d.documents()[2].label("task2"), None);
        assert!(matches!(d.labels("task2"), Err(Error::MissingLabel { .. })));
        let stats = dataset_stats(&d);
        assert_eq!(stats.problems[1].unlabeled, 1);
    }

    #[test]
    fn single_class_problem_rejected() {
        let err = parse_dataset("id\ttext\ttask1\na\tx\tNOT\n").unwrap_err();
        assert!(matches!(err, Error::TooFewClasses { .. }));
    }

    #[test]
    fn class_order_override() {
        let d = balanced(&[("NOT", 2), ("HOF", 2)]);
        let d = d.with_class_order("task1", &["NOT".into(), "HOF".into()]).unwrap();
        assert_eq!(d.problem("task1").unwrap().classes, vec!["NOT", "HOF"]);
        let bad = d.with_class_order("task1", &["NOT".into(), "X".into()]);
        assert!(matches!(bad, Err(Error::UnknownClass { .. })));
    }

    #[test]
    fn stats_single_class_counts() {
        let mut docs: Vec<Document> = (0..4).map(|i| doc(&i.to_string(), "ab", "A")).collect();
        docs.push(doc("extra", "", "B"));
        let d = Dataset::new(docs, vec!["task1".into()]).unwrap();
        let s = dataset_stats(&d);
        assert_eq!(s.problems[0].classes[0].count, 4);
        assert!((s.problems[0].classes[0].percent - 80.0).abs() < 1e-12);
        assert_eq!(s.empty_documents, 1);
        assert!((s.mean_length_chars - 8.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn nine_docs_three_classes() {
        let d = balanced(&[("A", 3), ("B", 3), ("C", 3)]);
        let folds = split_stratified(&d, 3, "task1", 42).unwrap();
        for f in 0..3 {
            let mut classes: Vec<&str> = folds
                .test_indices(f)
                .into_iter()
                .map(|i| d.documents()[i].label("task1").unwrap())
                .collect();
            classes.sort();
            assert_eq!(classes, vec!["A", "B", "C"]);
        }
    }

    #[test]
    fn split_is_deterministic() {
        let d = balanced(&[("A", 11), ("B", 7)]);
        let a = split_stratified(&d, 3, "task1", 9).unwrap();
        let b = split_stratified(&d, 3, "task1", 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seventy_thirty_split_counts() {
        let d = balanced(&[("maj", 70), ("min", 30)]);
        for seed in 0..20 {
            let folds = split_stratified(&d, 3, "task1", seed).unwrap();
            for f in 0..3 {
                let idx = folds.test_indices(f);
                let minority = idx
                    .iter()
                    .filter(|&&i| d.documents()[i].label("task1") == Some("min"))
                    .count();
                assert_eq!(minority, 10);
                let majority = idx.len() - minority;
                assert!(majority == 23 || majority == 24, "{majority}");
            }
        }
    }

    #[test]
    fn class_smaller_than_k() {
        let d = balanced(&[("A", 5), ("B", 2)]);
        let err = split_stratified(&d, 3, "task1", 1).unwrap_err();
        assert!(matches!(&err, Error::ClassTooSmall { class, .. } if class == "B"));
    }

    #[test]
    fn k_below_two() {
        let d = balanced(&[("A", 5), ("B", 5)]);
        assert!(split_stratified(&d, 1, "task1", 1).is_err());
    }
}
