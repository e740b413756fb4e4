use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nishpaksh_core::risk::default_question_bank;
use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nishpaksh"));
    cmd.env_remove("NISHPAKSH_QUESTION_BANK");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    csv: PathBuf,
    schema: PathBuf,
}

fn fixture(dir: &Path, name: &str, extra: &[&str]) -> Fixture {
    let csv = dir.join(format!("{name}.csv"));
    let schema = dir.join(format!("{name}.schema.json"));
    let mut args = vec![
        "fixtures",
        "generate",
        "--out",
        p(&csv),
        "--schema-out",
        p(&schema),
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    Fixture { csv, schema }
}

fn survey(dir: &Path, rating: i64) -> PathBuf {
    let path = dir.join(format!("survey-{rating}.json"));
    let responses: Vec<Value> = default_question_bank()
        .iter()
        .map(|i| serde_json::json!({"item_id": i.id, "rating": rating}))
        .collect();
    fs::write(
        &path,
        serde_json::to_vec(&serde_json::json!({ "responses": responses })).unwrap(),
    )
    .unwrap();
    path
}

fn config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"model":{"model_type":"machine-learning","task":"binary-classification",
            "purpose":"loan approval","intended_use":"pre-deployment audit","version":"3"}}"#,
    )
    .unwrap();
    path
}

fn error_code(out: &Output) -> String {
    let v: Value = serde_json::from_slice(&out.stderr)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    v["code"].as_str().unwrap().to_string()
}

#[test]
fn reference_bias_index_and_fairness_score() {
    let out = run(&[
        "score",
        "bi",
        "--evaluated",
        "[0.106,0.368,0.094,0.074,0.074]",
        "--reference",
        r#"{"SPD":0.187,"NDI":0.753,"EOD":0.226,"AOD":0.176,"EO":0.176}"#,
    ]);
    assert!(out.status.success());
    let bi = stdout_json(&out)["value"].as_f64().unwrap();
    assert!((bi - 0.1965).abs() < 5e-4, "{bi}");

    let out = run(&["score", "fs", "--bi", "[0.19648, 0.76116]"]);
    let fs = stdout_json(&out);
    assert!((fs["raw"].as_f64().unwrap() - 0.4441).abs() < 5e-4);
    assert_eq!(fs["raw"], fs["clamped"]);
}

#[test]
fn bias_index_reads_vectors_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["fixtures", "reference"]);
    let t2 = stdout_json(&out);
    let e = dir.path().join("gender.json");
    let r = dir.path().join("baseline.json");
    fs::write(&e, t2["gender"].to_string()).unwrap();
    fs::write(&r, t2["baseline"].to_string()).unwrap();
    let out = run(&["score", "bi", "--evaluated", p(&e), "--reference", p(&r)]);
    let bi = stdout_json(&out)["value"].as_f64().unwrap();
    assert!((bi - 0.7612).abs() < 5e-4, "{bi}");
}

#[test]
fn domain_errors_exit_3_with_api_error() {
    let out = run(&["score", "fs", "--bi", "[]"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_code(&out), "EMPTY_LIST");

    let out = run(&["score", "bi", "--evaluated", "[0.1,0.2]"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let f = fixture(
        dir.path(),
        "d",
        &["--p1", "0.6", "--p0", "0.4", "--rows", "100"],
    );
    let out = run(&[
        "metrics",
        "compute",
        "--data",
        p(&f.csv),
        "--schema",
        p(&f.schema),
        "--attribute",
        "age",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["audit"]).status.code(), Some(2));
    assert_eq!(run(&["score", "fs"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn metrics_compute_reports_group_rates_and_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(
        dir.path(),
        "d",
        &["--p1", "0.7", "--p0", "0.35", "--rows", "400"],
    );
    let args = [
        "metrics",
        "compute",
        "--data",
        p(&f.csv),
        "--schema",
        p(&f.schema),
        "--attribute",
        "sex",
        "--metric",
        "SPD",
        "--metric",
        "THEIL",
        "--replicates",
        "200",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["attribute"], "sex");
    assert_eq!(rows[1]["attribute"], "overall");
    for r in rows {
        let (lo, hi, x) = (
            r["ci_lower"].as_f64().unwrap(),
            r["ci_upper"].as_f64().unwrap(),
            r["value"].as_f64().unwrap(),
        );
        assert!(lo <= x && x <= hi);
    }
}

#[test]
fn survey_score_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["survey", "score", "--responses", p(&survey(dir.path(), 5))]);
    assert_eq!(stdout_json(&out)["category"], "High");
}

#[test]
fn audit_run_writes_reports_and_renders_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(
        dir.path(),
        "d",
        &["--p1", "0.7", "--p0", "0.35", "--rows", "600"],
    );
    let out_dir = dir.path().join("out");
    let out = run(&[
        "audit",
        "run",
        "--data",
        p(&f.csv),
        "--schema",
        p(&f.schema),
        "--survey",
        p(&survey(dir.path(), 3)),
        "--config",
        p(&config(dir.path())),
        "--replicates",
        "200",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let summary = stdout_json(&out);
    assert_eq!(summary["overall_verdict"], "fail");
    let id = summary["session_id"].as_str().unwrap();
    let checkpoint = out_dir.join(format!("{id}.nishpaksh.json"));
    for ext in ["json", "md", "html"] {
        let written = fs::read(out_dir.join(format!("{id}.report.{ext}"))).unwrap();
        let format = if ext == "md" { "markdown" } else { ext };
        let rendered = run(&[
            "report",
            "render",
            "--checkpoint",
            p(&checkpoint),
            "--format",
            format,
        ]);
        assert!(rendered.status.success());
        assert_eq!(rendered.stdout, written, "{ext}");
    }
    let bad = run(&[
        "report",
        "render",
        "--checkpoint",
        p(&checkpoint),
        "--format",
        "pdf",
    ]);
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(error_code(&bad), "UNKNOWN_FORMAT");
}

#[test]
fn question_bank_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let bank = dir.path().join("bank.json");
    fs::write(&bank, "[]").unwrap();
    let out = bin()
        .args(["survey", "score", "--responses", p(&survey(dir.path(), 2))])
        .env("NISHPAKSH_QUESTION_BANK", &bank)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
