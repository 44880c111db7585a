//! `charclf`: train, apply and evaluate character n-gram classifiers.
//!
//! Exit codes: 0 on success, 2 for bad usage or bad data, 3 for internal
//! failures.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use charclf::config::{preset, PipelineConfig};
use charclf::corpus::{
    dataset_stats, escape_cell, load_dataset, load_unlabeled, parse_dataset, unescape_cell, Dataset,
};
use charclf::leaderboard::{aggregate, transform, ScoreTable};
use charclf::model_selection::{confusion, cross_validate, macro_f1, search, search_csv, SearchMode, SearchSpace};
use charclf::pipeline::{fit, LinearModel};
use charclf::synth::{generate, SynthSpec};
use charclf::weighting::{Normalization, Scheme};

#[derive(Parser)]
#[command(name = "charclf", version, about = "Character n-gram text classification")]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus size, text length and class distribution.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Train on a labeled TSV file and write a model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model_out: PathBuf,
    },
    /// Label every row of a TSV file; writes `id<TAB>label`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Macro-F1 and confusion matrix of predictions against gold labels.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value = "task1")]
        problem: String,
        #[arg(long)]
        json: bool,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        stratify_by: Option<String>,
        /// Full JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated search over a hyperparameter space.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// JSON search space.
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Grid)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Rank teams by mean score relative to each problem's best score.
    Leaderboard {
        /// CSV with columns team, problem, macro_f1.
        scores: PathBuf,
        /// Comma-separated subset; all problems by default.
        #[arg(long, value_delimiter = ',')]
        problems: Option<Vec<String>>,
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic two-level corpus as TSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 600)]
        docs: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file or bundled preset name.
    #[arg(long)]
    config: Option<String>,
    /// Label column to learn and score.
    #[arg(long, visible_alias = "score")]
    problem: Option<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max_ngram: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Tfidf,
    Bm25,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L2,
    Minmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Random,
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl From<charclf::Error> for Failure {
    fn from(e: charclf::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Text for stdout on success.
type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("internal error: thread pool: {e}");
            return ExitCode::from(3);
        }
    };

    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| pool.install(|| run(cli.command))));
    match result {
        Ok(Ok(stdout)) => {
            let mut handle = std::io::stdout().lock();
            match handle.write_all(stdout.as_bytes()).and_then(|_| handle.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("internal error: stdout: {e}");
                    ExitCode::from(3)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Ok(Err(Failure::Usage(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Stats { data, json } => {
            let d = load_dataset(&data)?;
            if d.is_empty() {
                return Err(Failure::Usage(format!("{}: no documents", data.display())));
            }
            let report = dataset_stats(&d);
            if json {
                to_json(&report)
            } else {
                Ok(report.to_string())
            }
        }
        Command::Train { data, cfg, model_out } => {
            let cfg = resolve_config(&cfg)?;
            let d = load_labeled(&data, &[&cfg.problem])?;
            let model = fit(&d, &cfg)?;
            write(&model_out, &model.to_json())?;
            log::info!(
                "{} features, {} classes",
                model.vocabulary().len(),
                model.classes().len()
            );
            Ok(String::new())
        }
        Command::Predict { model, data, out: dest } => {
            let model = LinearModel::load(&model)?;
            let docs = load_unlabeled(&data)?;
            let texts: Vec<&str> = docs.iter().map(|d| d.text.as_str()).collect();
            let labels = model.predict_batch(&texts);
            let mut tsv = String::from("id\tlabel\n");
            for (doc, label) in docs.iter().zip(labels) {
                let _ = writeln!(tsv, "{}\t{}", escape_cell(&doc.id), escape_cell(label));
            }
            match dest {
                Some(path) => write(&path, &tsv).map(|_| String::new()),
                None => Ok(tsv),
            }
        }
        Command::Eval {
            gold,
            pred,
            problem,
            json,
        } => eval(&gold, &pred, &problem, json),
        Command::Cv {
            data,
            cfg,
            k,
            seed,
            stratify_by,
            out: dest,
        } => {
            let mut cfg = resolve_config_quiet(&cfg)?;
            if let Some(k) = k {
                cfg.cv.k = k;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if stratify_by.is_some() {
                cfg.cv.stratify_by = stratify_by;
            }
            cfg.validate()?;
            echo(&cfg);
            let d = load_labeled(&data, &[&cfg.problem, cfg.stratify_by()])?;
            let report = cross_validate(&d, &cfg)?;
            if let Some(path) = dest {
                write(&path, &to_json(&report)?)?;
            }
            let mut out = format!(
                "problem {}  stratified by {}  k={}  seed={}\n",
                report.problem, report.stratify_by, report.k, report.seed
            );
            for (i, f) in report.fold_macro_f1.iter().enumerate() {
                let _ = writeln!(out, "fold {}  macro-F1 {f:.4}", i + 1);
            }
            let _ = writeln!(out, "mean macro-F1    {:.4}", report.mean_macro_f1);
            let _ = writeln!(out, "pooled macro-F1  {:.4}", report.pooled_macro_f1);
            Ok(out)
        }
        Command::Tune {
            data,
            cfg,
            space,
            budget,
            mode,
            seed,
            out: dest,
            csv,
        } => {
            let base = resolve_config(&cfg)?;
            let raw = read(&space)?;
            let space: SearchSpace =
                serde_json::from_str(&raw).map_err(|e| Failure::Usage(format!("{}: {e}", space.display())))?;
            let mode = match mode {
                ModeArg::Grid => SearchMode::Grid,
                ModeArg::Random => SearchMode::Random,
            };
            let d = load_labeled(&data, &[&base.problem, base.stratify_by()])?;
            let results = search(&d, &base, &space, budget, mode, seed)?;
            if let Some(path) = dest {
                write(&path, &to_json(&results)?)?;
            }
            if let Some(path) = csv {
                write(&path, &search_csv(&results)?)?;
            }
            let mut out = String::new();
            for r in results.iter().take(10) {
                let c = &r.report.config;
                let _ = writeln!(
                    out,
                    "{:>3}  #{:<4} n={} {:?} {:?} C={}  macro-F1 {:.4}",
                    r.rank,
                    r.candidate,
                    c.ngram.max_len,
                    c.weighting.scheme,
                    c.weighting.normalization,
                    c.train.c,
                    r.report.mean_macro_f1
                );
            }
            Ok(out)
        }
        Command::Leaderboard {
            scores,
            problems,
            csv,
            json,
        } => {
            let table = ScoreTable::load(&scores)?;
            let problems = problems.unwrap_or_else(|| table.problems());
            let transformed = transform(&table)?;
            let ranking = aggregate(&transformed, &problems)?;
            if json {
                to_json(&json!({
                    "problems": ranking.problems,
                    "entries": ranking.entries,
                    "transformed": transformed.rows(),
                }))
            } else if csv {
                Ok(ranking.to_csv()?)
            } else {
                Ok(ranking.render_text())
            }
        }
        Command::Synth { out: dest, docs, seed } => {
            if docs < 10 {
                return Err(Failure::Usage("--docs must be at least 10".into()));
            }
            let d = generate(&SynthSpec {
                n_docs: docs,
                seed,
                ..Default::default()
            });
            write(&dest, &d.to_tsv())?;
            Ok(String::new())
        }
    }
}

fn resolve_config(args: &ConfigArgs) -> Result<PipelineConfig, Failure> {
    let cfg = resolve_config_quiet(args)?;
    echo(&cfg);
    Ok(cfg)
}

/// File or preset, then flag overrides.
fn resolve_config_quiet(args: &ConfigArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        None => PipelineConfig::default(),
        Some(c) if Path::new(c).is_file() => PipelineConfig::load(c)?,
        Some(c) => preset(c).ok_or_else(|| Failure::Usage(format!("{c:?} is neither a config file nor a preset")))?,
    };
    if let Some(p) = &args.problem {
        if *p != cfg.problem {
            // A preset's class-specific settings do not carry over.
            cfg.positive_class = None;
            cfg.class_order = None;
            cfg.train.class_weights.clear();
        }
        cfg.problem = p.clone();
    }
    if let Some(c) = args.c {
        cfg.train.c = c;
    }
    if let Some(n) = args.max_ngram {
        cfg.ngram.max_len = n;
    }
    if let Some(s) = args.scheme {
        cfg.weighting.scheme = match s {
            SchemeArg::Tfidf => Scheme::SublinearTfidf,
            SchemeArg::Bm25 => Scheme::Bm25,
        };
    }
    if let Some(n) = args.norm {
        cfg.weighting.normalization = match n {
            NormArg::L2 => Normalization::L2,
            NormArg::Minmax => Normalization::Minmax,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn echo(cfg: &PipelineConfig) {
    eprintln!("effective config: {}", serde_json::to_string(cfg).unwrap_or_default());
}

fn eval(gold_path: &Path, pred_path: &Path, problem: &str, json: bool) -> Outcome {
    let gold = load_labeled(gold_path, &[problem])?;
    let preds = read_predictions(pred_path)?;

    let gold_ids: BTreeSet<&str> = gold.documents().iter().map(|d| d.id.as_str()).collect();
    let pred_ids: BTreeSet<&str> = preds.keys().map(String::as_str).collect();
    if gold_ids != pred_ids {
        let missing = gold_ids.difference(&pred_ids).count();
        let extra = pred_ids.difference(&gold_ids).count();
        return Err(Failure::Usage(format!(
            "ids differ: {missing} gold ids without prediction, {extra} predictions without gold"
        )));
    }

    let gold_labels = gold.labels(problem)?;
    let pred_labels: Vec<&str> = gold.documents().iter().map(|d| preds[&d.id].as_str()).collect();
    let mut classes = gold.problem(problem)?.classes.clone();
    let unseen: BTreeSet<&str> = pred_labels
        .iter()
        .copied()
        .filter(|l| !classes.iter().any(|c| c == l))
        .collect();
    classes.extend(unseen.into_iter().map(str::to_owned));

    let cm = confusion(&gold_labels, &pred_labels, &classes)?;
    let score = macro_f1(&cm);
    if json {
        return to_json(&json!({
            "problem": problem,
            "macro_f1": score,
            "per_class": cm.per_class(),
            "confusion": cm,
        }));
    }
    let mut out = format!("macro-F1 {score:.4}\n\n");
    let _ = writeln!(
        out,
        "{:<12} {:>9} {:>9} {:>9} {:>8}",
        "class", "precision", "recall", "F1", "support"
    );
    for s in cm.per_class() {
        let _ = writeln!(
            out,
            "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            s.class, s.precision, s.recall, s.f1, s.support
        );
    }
    let _ = write!(out, "\n{cm}");
    Ok(out)
}

/// `id<TAB>label` rows under a header.
fn read_predictions(path: &Path) -> Result<HashMap<String, String>, Failure> {
    let raw = read(path)?;
    let mut lines = raw.lines();
    let bad = |line: usize, msg: &str| Failure::Usage(format!("{}:{line}: {msg}", path.display()));
    match lines.next() {
        Some("id\tlabel") => {}
        _ => return Err(bad(1, "expected header `id<TAB>label`")),
    }
    let mut out = HashMap::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((id, label)) = line.split_once('\t') else {
            return Err(bad(i + 2, "expected two columns"));
        };
        if out.insert(unescape_cell(id), unescape_cell(label)).is_some() {
            return Err(bad(i + 2, "duplicate id"));
        }
    }
    Ok(out)
}

/// Like `load_dataset`, but first checks that every column in `needed` is
/// present so the error can name it.
fn load_labeled(path: &Path, needed: &[&str]) -> Result<Dataset, Failure> {
    let raw = read(path)?;
    let header: Vec<String> = raw
        .lines()
        .next()
        .unwrap_or("")
        .split('\t')
        .map(unescape_cell)
        .collect();
    if let Some(col) = needed.iter().find(|c| !header.iter().any(|h| h == *c)) {
        let e = charclf::Error::MissingColumn((*col).to_owned());
        return Err(Failure::Usage(format!("{}: {e}", path.display())));
    }
    Ok(parse_dataset(&raw)?)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))
}
