use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURE_CONFIG: &str = include_str!("../../core/tests/fixtures/mini_config.json");

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bpsignal"));
    c.env_remove("BPSIGNAL_LOG");
    c
}

fn call(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = call(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Temp dir holding the mini corpus and the fixture config.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--spec", "mini", "--out", "corpus.jsonl", "--truth", "truth.json"]);
    fs::write(dir.path().join("config.json"), FIXTURE_CONFIG).unwrap();
    dir
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn assert_same_tree(a: &Path, b: &Path) {
    let (x, y) = (read_dir(a), read_dir(b));
    assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
    for (name, bytes) in &x {
        assert!(bytes == &y[name], "{name} differs between {} and {}", a.display(), b.display());
    }
}

#[test]
fn run_is_byte_identical_across_reruns_and_thread_counts() {
    let w = workspace();
    let d = w.path();
    ok(d, &["--threads", "1", "run", "--config", "config.json", "--output-dir", "one"]);
    ok(d, &["--threads", "1", "run", "--config", "config.json", "--output-dir", "again"]);
    ok(d, &["--threads", "8", "run", "--config", "config.json", "--output-dir", "eight"]);
    let files = read_dir(&d.join("one"));
    for name in ["evaluation.json", "table2_models.tsv", "table7_variance.tsv", "features.csv", "categories.json"] {
        assert!(files.contains_key(name), "{name} missing");
    }
    assert_same_tree(&d.join("one"), &d.join("again"));
    assert_same_tree(&d.join("one"), &d.join("eight"));
}

#[test]
fn synth_is_reproducible_and_seed_overrides() {
    let w = workspace();
    let d = w.path();
    ok(d, &["synth", "--spec", "mini", "--out", "b.jsonl", "--truth", "b.json"]);
    assert_eq!(fs::read(d.join("corpus.jsonl")).unwrap(), fs::read(d.join("b.jsonl")).unwrap());
    ok(d, &["synth", "--spec", "mini", "--seed", "99", "--out", "c.jsonl", "--truth", "c.json"]);
    assert_ne!(fs::read(d.join("corpus.jsonl")).unwrap(), fs::read(d.join("c.jsonl")).unwrap());
}

fn json(p: PathBuf) -> serde_json::Value {
    serde_json::from_slice(&fs::read(&p).unwrap()).unwrap()
}

#[test]
fn run_equals_composed_standalone_steps() {
    let w = workspace();
    let d = w.path();
    ok(d, &["run", "--config", "config.json"]);

    let cfg: serde_json::Value = serde_json::from_str(FIXTURE_CONFIG).unwrap();
    fs::write(d.join("cohort.json"), cfg["cohort"].to_string()).unwrap();
    fs::write(d.join("grid.json"), cfg["grids"].to_string()).unwrap();
    let variance = &cfg["analysis"]["variance"];
    let vflag = |k: &str| variance[k].as_u64().unwrap().to_string();

    let ingest = ok(d, &["ingest", "--input", "corpus.jsonl", "--out", "s/grouped.jsonl", "--stats", "s/ingest_stats.json"]);
    let stats: serde_json::Value = serde_json::from_slice(&ingest.stderr).unwrap();
    assert!(stats["records_accepted"].as_u64().unwrap() > 0);
    ok(
        d,
        &[
            "cohort", "--input", "s/grouped.jsonl", "--config", "cohort.json", "--out", "s/users.jsonl",
            "--out-bipolar", "s/bipolar.jsonl", "--out-control", "s/control.jsonl",
            "--summary", "s/table1_cohort.tsv",
        ],
    );
    ok(
        d,
        &[
            "features", "--users", "s/users.jsonl", "--out", "s/features.csv", "--tfidf-out", "s/tfidf.json",
            "--min-df", "2", "--max-features", "2000",
        ],
    );
    let cv = ["--seed", "7", "--k-outer", "3", "--k-inner", "2", "--grid", "grid.json"];
    let mut args = vec!["evaluate", "--features", "s/features.csv", "--model", "logreg,svm,rf"];
    args.extend(cv);
    ok(d, &[&args[..], &["--out", "s/evaluation.json", "--table", "s/table2_models.tsv"]].concat());
    ok(
        d,
        &[
            &args[..],
            &["--feature-sets", "liwc,empath,tfidf,user", "--out", "s/feature_sets.json", "--table", "s/table3_feature_sets.tsv"],
        ]
        .concat(),
    );
    let mut cat = vec!["evaluate", "--features", "s/features.csv", "--model", "rf"];
    cat.extend(cv);
    ok(
        d,
        &[
            &cat[..],
            &["--per-category", "--users", "s/users.jsonl", "--cohort-config", "cohort.json", "--out", "s/categories.json", "--table", "s/table4_categories.tsv"],
        ]
        .concat(),
    );
    for out in ["s/merit.json", "s/table5_merit.tsv"] {
        ok(d, &["analyze", "merit", "--features", "s/features.csv", "--top", "15", "--out", out]);
    }
    for out in ["s/emotion.json", "s/table6_emotion.tsv"] {
        ok(d, &["analyze", "emotion", "--features", "s/features.csv", "--out", out]);
    }
    for out in ["s/variance.json", "s/table7_variance.tsv"] {
        ok(
            d,
            &[
                "analyze", "variance", "--users", "s/users.jsonl", "--seed", "7",
                "--n-sample", &vflag("n_sample"), "--min-user-tokens", &vflag("min_user_tokens"),
                "--min-month-tokens", &vflag("min_month_tokens"), "--min-months", &vflag("min_months"),
                "--out", out,
            ],
        );
    }

    let run = d.join("out");
    let mut compared = 0;
    for name in read_dir(&d.join("s")).keys() {
        if !run.join(name).exists() {
            continue;
        }
        assert!(fs::read(run.join(name)).unwrap() == fs::read(d.join("s").join(name)).unwrap(), "{name} differs");
        compared += 1;
    }
    assert_eq!(compared, 17);

    let b = fs::read_to_string(d.join("s/bipolar.jsonl")).unwrap().lines().count();
    let c = fs::read_to_string(d.join("s/control.jsonl")).unwrap().lines().count();
    let cohort = json(run.join("cohort.json"));
    assert_eq!(b as u64, cohort["n_bipolar"].as_u64().unwrap());
    assert_eq!(c as u64, cohort["n_control"].as_u64().unwrap());
}

#[test]
fn train_then_predict_roundtrip() {
    let w = workspace();
    let d = w.path();
    ok(d, &["ingest", "--input", "corpus.jsonl", "--out", "g.jsonl"]);
    fs::write(d.join("cohort.json"), r#"{"category_min_words": 200}"#).unwrap();
    ok(d, &["cohort", "--input", "g.jsonl", "--config", "cohort.json", "--out", "u.jsonl"]);
    ok(d, &["profile", "--users", "u.jsonl", "--out", "p.csv"]);
    fs::write(d.join("params.json"), r#"{"model": "rf", "n_trees": 10, "max_depth": 4}"#).unwrap();
    ok(d, &["train", "--features", "p.csv", "--model", "rf", "--params", "params.json", "--seed", "3", "--out", "m.json"]);
    ok(d, &["predict", "--features", "p.csv", "--model", "m.json", "--out", "pred.csv"]);
    let pred = fs::read_to_string(d.join("pred.csv")).unwrap();
    assert_eq!(pred.lines().next(), Some("user_id,predicted,score"));
    assert_eq!(pred.lines().count(), 61);

    // params for another model kind are a config error
    let out = call(d, &["train", "--features", "p.csv", "--model", "svm", "--params", "params.json", "--seed", "3", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_lexicon_is_a_config_error_before_any_work() {
    let w = workspace();
    let d = w.path();
    let mut cfg: serde_json::Value = serde_json::from_str(FIXTURE_CONFIG).unwrap();
    cfg["lexicon"] = "no/such/file.dic".into();
    fs::write(d.join("bad.json"), cfg.to_string()).unwrap();
    let out = call(d, &["run", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lexicon"));
    assert!(!d.join("out").exists());

    let out = call(d, &["profile", "--lexicon", "missing.dic", "--users", "x.jsonl", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_by_failure_class() {
    let w = workspace();
    let d = w.path();
    // usage errors
    assert_eq!(call(d, &["evaluate"]).status.code(), Some(2));
    assert_eq!(call(d, &["--threads", "0", "synth", "--spec", "mini", "--out", "a", "--truth", "b"]).status.code(), Some(2));
    assert_eq!(call(d, &["run", "--config", "absent.json"]).status.code(), Some(2));
    fs::write(d.join("broken.json"), "{ not json").unwrap();
    assert_eq!(call(d, &["run", "--config", "broken.json"]).status.code(), Some(2));
    // bad data
    fs::write(d.join("bad.csv"), "user_id,label,f\nu1,7,x\n").unwrap();
    let out = call(d, &["analyze", "merit", "--features", "bad.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("analyze"));
    fs::write(d.join("users.jsonl"), "{\"author\": 3}\n").unwrap();
    assert_eq!(call(d, &["profile", "--users", "users.jsonl", "--out", "p.csv"]).status.code(), Some(3));
    // help succeeds
    assert_eq!(call(d, &["--help"]).status.code(), Some(0));
}
