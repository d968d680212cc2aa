use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn gat() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gat"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(file: &Path, out: &Path, extra: &[&str]) -> Output {
    gat().arg("run").arg(file).arg("--out").arg(out).args(extra).output().unwrap()
}

fn validate(file: &Path) -> (i32, Value) {
    let out = gat().arg("validate").arg(file).output().unwrap();
    (out.status.code().unwrap(), serde_json::from_slice(&out.stdout).unwrap())
}

fn stderr_objects(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stderr)
        .lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn version_prints_the_crate_version() {
    let out = gat().arg("version").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("gat {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn negative_n_paths_exits_2_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&data("negative_n_paths.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let errors = stderr_objects(&out);
    assert!(
        errors.iter().any(|e| e["kind"] == "configuration" && e["field"] == "n_paths"),
        "{errors:?}"
    );
    // Rejected before any output.
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn type_errors_name_the_json_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&data("wrong_type.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_objects(&out).iter().any(|e| e["field"] == "grid.steps"));
}

#[test]
fn validate_reports_lgd_out_of_range() {
    let (code, report) = validate(&data("lgd_out_of_range.json"));
    assert_eq!(code, 2);
    assert_eq!(report["valid"], false);
    let v = report["violations"].as_array().unwrap();
    assert!(v
        .iter()
        .any(|x| x["severity"] == "error" && x["message"].as_str().unwrap().contains("lgd outside [0,1]")));
}

#[test]
fn barrier_at_or_above_equity_is_a_warning() {
    let (code, report) = validate(&data("barrier_above_equity.json"));
    assert_eq!(code, 0);
    assert_eq!(report["valid"], true);
    let v = report["violations"].as_array().unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0]["severity"], "warning");
    assert!(v[0]["message"].as_str().unwrap().contains("immediate default"));
}

#[test]
fn valid_files_have_no_violations() {
    let (code, report) = validate(&data("small_valid.json"));
    assert_eq!(code, 0);
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn every_bundled_scenario_validates_quickly() {
    for entry in std::fs::read_dir(bundled("")).unwrap() {
        let path = entry.unwrap().path();
        let t0 = Instant::now();
        let (code, report) = validate(&path);
        assert!(t0.elapsed().as_secs_f64() < 1.0, "{}", path.display());
        assert_eq!(code, 0, "{}: {report}", path.display());
        assert_eq!(report["violations"].as_array().unwrap().len(), 0, "{}: {report}", path.display());
    }
}

#[test]
fn flat_market_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&bundled("flat_market.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path());
    assert_eq!(s["status"], "passed");
    assert_eq!(s["analyses"][0]["kind"], "curvature");
    assert_eq!(s["analyses"][0]["status"], "passed");
}

#[test]
fn constructed_credit_market_passes_with_vanishing_spread_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&bundled("thm1_constructed.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("credit_check.csv")).unwrap();
    let spread = text.lines().find(|l| l.starts_with("spread,")).unwrap();
    let residual: f64 = spread.split(',').nth(3).unwrap().parse().unwrap();
    assert!(residual.abs() <= 1e-14);
}

#[test]
fn failed_assertion_exits_1_and_still_writes_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&data("wrong_expectation.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let s = summary(tmp.path());
    assert_eq!(s["status"], "failed");
    assert_eq!(s["exit_code"], 1);
    assert!(tmp.path().join("price.csv").exists());
}

#[test]
fn numerical_failures_exit_3() {
    for file in ["divergent_cross.json", "barrier_above_equity.json"] {
        let tmp = tempfile::tempdir().unwrap();
        let out = run(&data(file), tmp.path(), &[]);
        assert_eq!(out.status.code(), Some(3), "{file}");
        let s = summary(tmp.path());
        assert_eq!(s["analyses"][0]["status"], "error");
        assert_eq!(s["analyses"][0]["error"]["kind"], "numerical");
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("one"), tmp.path().join("three"));
    assert!(run(&data("small_valid.json"), &a, &["--threads", "1"]).status.success());
    assert!(run(&data("small_valid.json"), &b, &["--threads", "3"]).status.success());
    let files = csv_files(&a);
    assert_eq!(files.len(), 3);
    for f in files {
        let other = b.join(f.file_name().unwrap());
        assert_eq!(std::fs::read(&f).unwrap(), std::fs::read(other).unwrap(), "{}", f.display());
    }
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gat()
        .arg("run")
        .arg(data("small_valid.json"))
        .env("GAT_OUT_DIR", tmp.path())
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("small_valid/summary.json").exists());
}

#[test]
fn outputs_are_lf_csv_without_leftover_temporaries() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&data("small_valid.json"), tmp.path(), &[]).status.success());
    for entry in std::fs::read_dir(tmp.path()).unwrap() {
        let path = entry.unwrap().path();
        assert_ne!(path.extension().and_then(|x| x.to_str()), Some("tmp"));
        if path.extension().is_some_and(|x| x == "csv") {
            let bytes = std::fs::read(&path).unwrap();
            assert!(!bytes.contains(&b'\r'));
            assert_eq!(bytes.last(), Some(&b'\n'));
        }
    }
}

#[test]
fn summary_keys_follow_the_published_schema() {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/summary.schema.json")).unwrap(),
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&data("small_valid.json"), tmp.path(), &[]).status.success());
    let s = summary(tmp.path());
    let check = |obj: &Value, schema: &Value| {
        let props = schema["properties"].as_object().unwrap();
        for key in schema["required"].as_array().unwrap() {
            assert!(obj.get(key.as_str().unwrap()).is_some(), "missing {key}");
        }
        for key in obj.as_object().unwrap().keys() {
            assert!(props.contains_key(key), "unexpected {key}");
        }
    };
    check(&s, &schema);
    assert_eq!(s["schema"], schema["properties"]["schema"]["const"]);
    for a in s["analyses"].as_array().unwrap() {
        check(a, &schema["$defs"]["analysis"]);
        for x in a["assertions"].as_array().unwrap() {
            check(x, &schema["$defs"]["assertion"]);
        }
    }
}
