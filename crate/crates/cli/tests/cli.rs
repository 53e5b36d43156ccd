use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture_config() -> PathBuf {
    root().join("fixtures/synthetic-small/config.toml")
}

fn rfa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfa"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("RFA_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn run_reports_six_families_over_ten_folds() {
    let out = tempfile::tempdir().unwrap();
    ok(&rfa(&["run", "--config", p(&fixture_config()), "--out", p(out.path())]));
    let r = report(out.path());
    let models = r["models"].as_array().unwrap();
    let names: Vec<&str> = models.iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["controls", "language", "added", "rc", "fa", "rfa"]);
    for m in models {
        assert_eq!(m["folds"].as_array().unwrap().len(), 10);
    }
    assert_eq!(r["timestamp_unix"], 1_700_000_000u64);
    assert!(r["config"]["pipeline"].is_object(), "config snapshot embedded");
    assert!(fs::read_to_string(out.path().join("table.txt"))
        .unwrap()
        .contains("rfa"));
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        ok(&rfa(&[
            "run",
            "--config",
            p(&fixture_config()),
            "--out",
            p(dir.path()),
            "--families",
            "rc,rfa",
        ]));
    }
    for file in ["report.json", "table.txt"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }

    // Without a pinned epoch only the timestamp may differ.
    let c = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rfa"))
        .args([
            "run",
            "--config",
            p(&fixture_config()),
            "--out",
            p(c.path()),
            "--families",
            "rc,rfa",
        ])
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .unwrap();
    ok(&out);
    let (mut x, mut y) = (report(a.path()), report(c.path()));
    x["timestamp_unix"] = Value::Null;
    y["timestamp_unix"] = Value::Null;
    assert_eq!(x, y);
}

#[test]
fn embedded_config_replays_the_run() {
    let first = tempfile::tempdir().unwrap();
    ok(&rfa(&[
        "run",
        "--config",
        p(&fixture_config()),
        "--out",
        p(first.path()),
        "--families",
        "fa",
    ]));
    let snapshot = report(first.path())["config"].clone();
    let cfg: rfa_core::config::RunConfig = serde_json::from_value(snapshot).unwrap();
    // Data paths in the snapshot are relative to the original config.
    let dir = tempfile::tempdir().unwrap();
    let base = root().join("fixtures/synthetic-small");
    for file in ["factors.csv", "outcome.csv", "ngrams.csv", "topics.csv"] {
        fs::copy(base.join(file), dir.path().join(file)).unwrap();
    }
    let path = dir.path().join("replay.toml");
    fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    let second = tempfile::tempdir().unwrap();
    ok(&rfa(&["run", "--config", p(&path), "--out", p(second.path())]));
    assert_eq!(report(first.path())["models"], report(second.path())["models"]);
}

#[test]
fn seed_flag_overrides_config() {
    let out = tempfile::tempdir().unwrap();
    ok(&rfa(&[
        "run",
        "--config",
        p(&fixture_config()),
        "--out",
        p(out.path()),
        "--families",
        "controls",
        "--seed",
        "41",
    ]));
    let r = report(out.path());
    assert_eq!(r["seed"], 41);
    assert_eq!(r["config"]["pipeline"]["seed"], 41);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn missing_outcome_exits_3_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let base = root().join("fixtures/synthetic-small");
    let cfg = write_config(
        dir.path(),
        &format!(
            "[data]\nfactors = {:?}\noutcome = \"nowhere/outcome.csv\"\n\n[[data.language]]\ngroup = \"topics\"\npath = {:?}\nformat = \"wide\"\n",
            base.join("factors.csv"),
            base.join("topics.csv"),
        ),
    );
    let out = rfa(&["run", "--config", p(&cfg), "--out", p(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere/outcome.csv"));
}

#[test]
fn unknown_config_key_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[data]\noutcome = \"y.csv\"\n\n[pipeline.ngrams]\nk_best = 10\nn_components = 5\nwidth = 3\n",
    );
    let out = rfa(&["run", "--config", p(&cfg), "--out", p(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("pipeline.ngrams"), "{msg}");
    assert!(msg.contains("width"), "{msg}");
}

#[test]
fn invalid_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[data]\noutcome = \"y.csv\"\n\n[[data.language]]\ngroup = \"ngrams\"\npath = \"n.csv\"\n\n[experiment]\nfolds = 1\n",
    );
    let out = rfa(&["run", "--config", p(&cfg), "--out", p(&dir.path().join("out"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let bad_family = rfa(&["run", "--config", p(&fixture_config()), "--families", "rfa,nope"]);
    assert_eq!(bad_family.status.code(), Some(2));
}

#[test]
fn synth_reproduces_the_committed_fixture() {
    let out = tempfile::tempdir().unwrap();
    ok(&rfa(&[
        "synth",
        "--spec",
        p(&root().join("configs/small.toml")),
        "--out",
        p(out.path()),
    ]));
    let committed = root().join("fixtures/synthetic-small");
    for file in [
        "config.toml",
        "factors.csv",
        "ngrams.csv",
        "outcome.csv",
        "topics.csv",
        "truth.json",
    ] {
        assert_eq!(
            fs::read(out.path().join(file)).unwrap(),
            fs::read(committed.join(file)).unwrap(),
            "{file}"
        );
    }
    let truth: Value = serde_json::from_str(&fs::read_to_string(out.path().join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["beta"].as_array().unwrap().len(), 11);
}

#[test]
fn fit_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&rfa(&[
        "fit",
        "--config",
        p(&fixture_config()),
        "--out",
        p(dir.path()),
        "--family",
        "rfa",
    ]));
    let model = dir.path().join("model.json");
    assert!(model.exists());
    ok(&rfa(&[
        "predict",
        "--model",
        p(&model),
        "--config",
        p(&fixture_config()),
        "--out",
        p(dir.path()),
    ]));
    let text = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("group_id,prediction"));
    let preds: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(preds.len(), 120);

    // In-sample predictions should track the outcome they were fitted on.
    let outcome = fs::read_to_string(root().join("fixtures/synthetic-small/outcome.csv")).unwrap();
    let y: Vec<f64> = outcome
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let r = rfa_core::numerics::pearson_r(&y, &preds).unwrap();
    assert!(r > 0.7, "in-sample r {r}");

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"version\": 99}").unwrap();
    let out = rfa(&[
        "predict",
        "--model",
        p(&broken),
        "--config",
        p(&fixture_config()),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweeps_write_curves() {
    for (kind, rows) in [("kbest", 8), ("factors", 11), ("fs", 4)] {
        let out = tempfile::tempdir().unwrap();
        ok(&rfa(&[
            "sweep",
            kind,
            "--config",
            p(&fixture_config()),
            "--out",
            p(out.path()),
            "--families",
            "rfa",
        ]));
        let curves = fs::read_to_string(out.path().join("curves.csv")).unwrap();
        assert_eq!(curves.lines().count(), rows + 1, "{kind}: {curves}");
        assert!(out.path().join("report.json").exists());
    }
}
