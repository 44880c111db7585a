use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn charclf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charclf"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

struct Fixture {
    dir: TempDir,
    data: PathBuf,
}

impl Fixture {
    fn new(docs: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("syn.tsv");
        let o = charclf(&["synth", "--out", s(&data), "--docs", &docs.to_string()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        Fixture { dir, data }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    fn train(&self, model: &Path, extra: &[&str]) -> Output {
        let mut args = vec!["train", "--data", s(&self.data), "--model-out", s(model)];
        args.extend_from_slice(extra);
        charclf(&args)
    }
}

#[test]
fn stats_text_and_json() {
    let f = Fixture::new(90);
    let o = charclf(&["stats", "--data", s(&f.data)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("documents        90"));
    let o = charclf(&["stats", "--data", s(&f.data), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["documents"], 90);
    assert_eq!(v["problems"][0]["problem"], "task1");
}

#[test]
fn stats_rejects_empty_input() {
    let f = Fixture::new(30);
    let empty = f.write("empty.tsv", "");
    let o = charclf(&["stats", "--data", s(&empty)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("error"));
    let header_only = f.write("header.tsv", "id\ttext\ttask1\n");
    assert_eq!(code(&charclf(&["stats", "--data", s(&header_only)])), 2);
}

#[test]
fn train_is_reproducible_and_records_preset() {
    let f = Fixture::new(120);
    let (a, b) = (f.path("a.json"), f.path("b.json"));
    let o = f.train(&a, &["--config", "english1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("effective config"));
    assert_eq!(code(&f.train(&b, &["--config", "english1"])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    let cfg = &v["config"];
    assert_eq!(cfg["ngram"]["max_len"], 5);
    assert_eq!(cfg["weighting"]["scheme"], "sublinear_tfidf");
    assert_eq!(cfg["weighting"]["normalization"], "minmax");
    assert_eq!(cfg["train"]["c"], 1.1);
    assert_eq!(cfg["train"]["class_weights"]["HOF"], 0.5);
}

#[test]
fn flags_override_config() {
    let f = Fixture::new(60);
    let m = f.path("m.json");
    let o = f.train(
        &m,
        &[
            "--config",
            "english1",
            "--c",
            "4",
            "--max-ngram",
            "3",
            "--scheme",
            "bm25",
            "--norm",
            "l2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&m).unwrap()).unwrap();
    assert_eq!(v["config"]["train"]["c"], 4.0);
    assert_eq!(v["config"]["ngram"]["max_len"], 3);
    assert_eq!(v["config"]["weighting"]["scheme"], "bm25");
    assert_eq!(v["config"]["weighting"]["normalization"], "l2");
}

#[test]
fn config_file_accepted_and_bad_values_rejected() {
    let f = Fixture::new(60);
    let cfg = f.write("cfg.json", r#"{"problem":"task2","ngram":{"max_len":4}}"#);
    assert_eq!(code(&f.train(&f.path("m.json"), &["--config", s(&cfg)])), 0);
    let bad = f.write("bad.json", r#"{"problem":"task1","train":{"c":-1}}"#);
    assert_eq!(code(&f.train(&f.path("m.json"), &["--config", s(&bad)])), 2);
    assert_eq!(code(&f.train(&f.path("m.json"), &["--config", "no-such-preset"])), 2);
}

#[test]
fn missing_label_column_is_named() {
    let f = Fixture::new(30);
    let data = f.write("nolabel.tsv", "id\ttext\ttask2\n1\ta\tX\n2\tb\tY\n");
    let o = charclf(&["train", "--data", s(&data), "--model-out", s(&f.path("m.json"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("\"task1\""), "{}", stderr(&o));
}

#[test]
fn predict_keeps_rows_and_order() {
    let f = Fixture::new(90);
    let m = f.path("m.json");
    assert_eq!(code(&f.train(&m, &["--config", "english1"])), 0);
    let input = f.write("new.tsv", "id\ttext\nz\tqzx qzx\na\t\nm\txqj kzv\n");
    let o = charclf(&["predict", "--model", s(&m), "--data", s(&input)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "id\tlabel");
    assert_eq!(lines[1], "z\tNOT");
    assert!(lines[2].starts_with("a\t"));
    assert_eq!(lines[3], "m\tHOF");
}

#[test]
fn predict_on_training_data_matches_gold() {
    let f = Fixture::new(150);
    let m = f.path("m.json");
    assert_eq!(code(&f.train(&m, &["--config", "english1"])), 0);
    let preds = f.path("p.tsv");
    assert_eq!(
        code(&charclf(&[
            "predict",
            "--model",
            s(&m),
            "--data",
            s(&f.data),
            "--out",
            s(&preds)
        ])),
        0
    );
    let o = charclf(&["eval", "--gold", s(&f.data), "--pred", s(&preds), "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["macro_f1"], 1.0);
}

#[test]
fn model_version_mismatch_exits_2() {
    let f = Fixture::new(60);
    let m = f.path("m.json");
    assert_eq!(code(&f.train(&m, &[])), 0);
    let raw = std::fs::read_to_string(&m)
        .unwrap()
        .replacen("\"format_version\":1", "\"format_version\":7", 1);
    std::fs::write(&m, raw).unwrap();
    let o = charclf(&["predict", "--model", s(&m), "--data", s(&f.data)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("version"));
}

#[test]
fn eval_worked_example_and_id_mismatch() {
    let f = Fixture::new(30);
    let gold = f.write("gold.tsv", "id\ttext\ttask1\n1\t.\tA\n2\t.\tB\n3\t.\tA\n4\t.\tB\n");
    let pred = f.write("pred.tsv", "id\tlabel\n4\tB\n3\tA\n2\tA\n1\tA\n");
    let o = charclf(&["eval", "--gold", s(&gold), "--pred", s(&pred)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("macro-F1 0.7333"), "{}", stdout(&o));

    let same = f.write("same.tsv", "id\tlabel\n1\tA\n2\tB\n3\tA\n4\tB\n");
    let o = charclf(&["eval", "--gold", s(&gold), "--pred", s(&same), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["macro_f1"], 1.0);

    let short = f.write("short.tsv", "id\tlabel\n1\tA\n2\tB\n9\tA\n4\tB\n");
    assert_eq!(code(&charclf(&["eval", "--gold", s(&gold), "--pred", s(&short)])), 2);
}

#[test]
fn cv_protocol_flags() {
    let f = Fixture::new(120);
    let report = f.path("cv.json");
    let o = charclf(&[
        "cv",
        "--data",
        s(&f.data),
        "--config",
        "hindi1",
        "--k",
        "3",
        "--stratify-by",
        "task2",
        "--score",
        "task1",
        "--seed",
        "5",
        "--out",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("mean macro-F1"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["stratify_by"], "task2");
    assert_eq!(v["problem"], "task1");
    assert_eq!(v["seed"], 5);
    assert_eq!(v["fold_macro_f1"].as_array().unwrap().len(), 3);
}

#[test]
fn tune_random_is_repeatable_and_zero_budget_fails() {
    let f = Fixture::new(60);
    let space = f.write(
        "space.json",
        r#"{"max_ngram_len":[4,5],"scheme":["sublinear_tfidf","bm25"],"normalization":["l2","minmax"],
            "c":{"log_range":{"min":0.1,"max":10,"steps":5}}}"#,
    );
    let mut outs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = f.path(name);
        let o = charclf(&[
            "tune",
            "--data",
            s(&f.data),
            "--space",
            s(&space),
            "--mode",
            "random",
            "--budget",
            "4",
            "--seed",
            "7",
            "--out",
            s(&out),
            "--csv",
            s(&f.path("t.csv")),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let csv = std::fs::read_to_string(f.path("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let o = charclf(&["tune", "--data", s(&f.data), "--space", s(&space), "--budget", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn leaderboard_outputs_and_errors() {
    let scores = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/leaderboard_2021.csv");
    let o = charclf(&["leaderboard", s(&scores)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("Number of teams"));
    let o = charclf(&[
        "leaderboard",
        s(&scores),
        "--problems",
        "hindi1,hindi2,marathi",
        "--csv",
    ]);
    assert!(stdout(&o).contains("SATLab,3,0.9800"), "{}", stdout(&o));
    let o = charclf(&["leaderboard", s(&scores), "--problems", "hindi1,tamil"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tamil"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&charclf(&["frobnicate"])), 2);
    assert_eq!(code(&charclf(&["stats"])), 2);
    assert_eq!(code(&charclf(&["stats", "--data", "/no/such/file.tsv"])), 2);
    assert_eq!(code(&charclf(&["--threads", "0", "stats", "--data", "x"])), 2);
}
