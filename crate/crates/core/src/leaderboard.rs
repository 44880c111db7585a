//! Cross-problem team rankings from per-problem Macro-F1 scores.
//!
//! Scores are first divided by the best score of their problem, so every
//! problem's winner sits at exactly 1 and problems of different difficulty
//! carry equal weight. A team's overall score is the plain mean of its
//! transformed scores over the problems it entered. Missing problems are not
//! imputed; the number of problems entered is reported next to the score.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub team: String,
    pub problem: String,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert((r.team.as_str(), r.problem.as_str())) {
                return Err(Error::Config(format!(
                    "team {:?} listed twice for problem {:?}",
                    r.team, r.problem
                )));
            }
            if !(0.0..=1.0).contains(&r.macro_f1) {
                return Err(Error::Config(format!(
                    "score {} of team {:?} on {:?} outside [0, 1]",
                    r.macro_f1, r.team, r.problem
                )));
            }
        }
        Ok(ScoreTable { rows })
    }

    /// Reads `team,problem,macro_f1` CSV.
    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for required in ["team", "problem", "macro_f1"] {
            if !headers.iter().any(|h| h == required) {
                return Err(Error::MissingColumn(required.into()));
            }
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<ScoreRow>, _>>()?;
        ScoreTable::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    /// Problem names in order of first appearance.
    pub fn problems(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.problem.as_str()))
            .map(|r| r.problem.clone())
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Divides every score by the maximum score of its problem.
pub fn transform(t: &ScoreTable) -> Result<ScoreTable> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for r in &t.rows {
        let slot = best.entry(&r.problem).or_insert(0.0);
        *slot = slot.max(r.macro_f1);
    }
    if let Some((p, _)) = best.iter().find(|(_, &m)| m <= 0.0) {
        return Err(Error::AllZeroProblem((*p).to_owned()));
    }
    let rows = t
        .rows
        .iter()
        .map(|r| ScoreRow {
            macro_f1: r.macro_f1 / best[r.problem.as_str()],
            ..r.clone()
        })
        .collect();
    Ok(ScoreTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: usize,
    pub team: String,
    pub mean_transformed: f64,
    pub problems_entered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedRanking {
    pub problems: Vec<String>,
    pub entries: Vec<RankingEntry>,
}

/// Ranks teams by their mean transformed score over `problems`.
///
/// `t` must already be transformed. Teams that entered none of the listed
/// problems are left out. Ties keep alphabetical team order.
pub fn aggregate(t: &ScoreTable, problems: &[String]) -> Result<TransformedRanking> {
    if problems.is_empty() {
        return Err(Error::Config("problem subset is empty".into()));
    }
    let known: BTreeSet<String> = t.problems().into_iter().collect();
    for p in problems {
        if !known.contains(p) {
            return Err(Error::UnknownProblem(p.clone()));
        }
    }
    let wanted: BTreeSet<&str> = problems.iter().map(String::as_str).collect();

    let mut per_team: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &t.rows {
        if wanted.contains(r.problem.as_str()) {
            per_team.entry(&r.team).or_default().push(r.macro_f1);
        }
    }
    let mut entries: Vec<RankingEntry> = per_team
        .into_iter()
        .map(|(team, scores)| RankingEntry {
            rank: 0,
            team: team.to_owned(),
            mean_transformed: scores.iter().sum::<f64>() / scores.len() as f64,
            problems_entered: scores.len(),
        })
        .collect();
    // Stable sort keeps the alphabetical order of the BTreeMap for ties.
    entries.sort_by(|a, b| b.mean_transformed.total_cmp(&a.mean_transformed));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(TransformedRanking {
        problems: problems.to_vec(),
        entries,
    })
}

impl TransformedRanking {
    pub fn entry(&self, team: &str) -> Option<&RankingEntry> {
        self.entries.iter().find(|e| e.team == team)
    }

    /// Aligned table with one score column per "number of problems entered",
    /// largest first, and a team count per column at the bottom.
    pub fn render_text(&self) -> String {
        let max_count = self.problems.len();
        let team_width = self
            .entries
            .iter()
            .map(|e| e.team.chars().count())
            .max()
            .unwrap_or(0)
            .max("Number of teams".len());
        let mut out = String::new();
        let _ = write!(out, "{:>4}  {:<team_width$}", "Rank", "Team");
        for n in (1..=max_count).rev() {
            let _ = write!(out, "  {n:>6}");
        }
        out.push('\n');
        for e in &self.entries {
            let _ = write!(out, "{:>4}  {:<team_width$}", e.rank, e.team);
            for n in (1..=max_count).rev() {
                if n == e.problems_entered {
                    let _ = write!(out, "  {:>6.4}", e.mean_transformed);
                } else {
                    let _ = write!(out, "  {:>6}", "");
                }
            }
            out.push('\n');
        }
        let _ = write!(out, "{:>4}  {:<team_width$}", "", "Number of teams");
        for n in (1..=max_count).rev() {
            let teams = self.entries.iter().filter(|e| e.problems_entered == n).count();
            let _ = write!(out, "  {teams:>6}");
        }
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["rank", "team", "problems_entered", "mean_transformed"])?;
        for e in &self.entries {
            w.write_record([
                e.rank.to_string(),
                e.team.clone(),
                e.problems_entered.to_string(),
                format!("{:.4}", e.mean_transformed),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[(&str, &str, f64)]) -> ScoreTable {
        ScoreTable::new(
            rows.iter()
                .map(|&(t, p, s)| ScoreRow {
                    team: t.into(),
                    problem: p.into(),
                    macro_f1: s,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn winner_maps_to_one() {
        let t = transform(&table(&[("a", "p", 0.5), ("b", "p", 0.8), ("c", "q", 0.3)])).unwrap();
        assert_eq!(t.rows()[1].macro_f1, 1.0);
        assert_eq!(t.rows()[2].macro_f1, 1.0);
        assert!((t.rows()[0].macro_f1 - 0.625).abs() < 1e-15);
    }

    #[test]
    fn satlab_english1_quotient() {
        let t = transform(&table(&[
            ("NLP-CIC", "english1", 0.8305),
            ("SATLab", "english1", 0.7823),
        ]))
        .unwrap();
        assert!((t.rows()[1].macro_f1 - 0.941_962_67).abs() < 1e-8);
    }

    #[test]
    fn all_zero_problem_rejected() {
        let err = transform(&table(&[("a", "p", 0.0), ("b", "q", 0.5)])).unwrap_err();
        assert!(matches!(err, Error::AllZeroProblem(p) if p == "p"));
    }

    #[test]
    fn duplicate_and_range_checks() {
        let dup = ScoreTable::new(vec![
            ScoreRow {
                team: "a".into(),
                problem: "p".into(),
                macro_f1: 0.5,
            },
            ScoreRow {
                team: "a".into(),
                problem: "p".into(),
                macro_f1: 0.6,
            },
        ]);
        assert!(dup.is_err());
        let out = ScoreTable::new(vec![ScoreRow {
            team: "a".into(),
            problem: "p".into(),
            macro_f1: 1.5,
        }]);
        assert!(out.is_err());
    }

    #[test]
    fn aggregate_counts_and_order() {
        let t = transform(&table(&[
            ("a", "p", 0.5),
            ("b", "p", 1.0),
            ("a", "q", 0.9),
            ("c", "q", 0.45),
        ]))
        .unwrap();
        let r = aggregate(&t, &["p".into(), "q".into()]).unwrap();
        let teams: Vec<&str> = r.entries.iter().map(|e| e.team.as_str()).collect();
        assert_eq!(teams, vec!["b", "a", "c"]);
        assert_eq!(r.entry("a").unwrap().problems_entered, 2);
        assert!((r.entry("a").unwrap().mean_transformed - 0.75).abs() < 1e-15);
        assert!(r.render_text().contains("Number of teams"));
    }

    #[test]
    fn unknown_problem_in_subset() {
        let t = transform(&table(&[("a", "p", 0.5)])).unwrap();
        assert!(matches!(aggregate(&t, &["zz".into()]), Err(Error::UnknownProblem(_))));
        assert!(aggregate(&t, &[]).is_err());
    }

    #[test]
    fn csv_input() {
        let raw = "team,problem,macro_f1\nA Team,p,0.5\n\"B, Inc\",p,0.25\n";
        let t = ScoreTable::from_csv_reader(raw.as_bytes()).unwrap();
        assert_eq!(t.rows()[1].team, "B, Inc");
        assert!(ScoreTable::from_csv_reader("team,score\nA,0.5\n".as_bytes()).is_err());
    }
}
