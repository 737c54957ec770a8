use std::path::Path;
use std::process::{Command, Output};

fn mexico(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mexico")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = mexico(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path) {
    ok(dir, &["--seed", "3", "simulate", "--clusters", "0,1,2;3,4,5", "--n", "4000", "--out", "d.csv", "--labels", "l.csv"]);
}

const FIT: &[&str] = &["fit", "--data", "d.csv", "--tau", "0.25", "--lambda", "1", "--gamma", "0.02", "--angular", "--restarts", "3"];

#[test]
fn same_seed_gives_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    for out in ["a.json", "b.json"] {
        let mut args = vec!["--seed", "7"];
        args.extend_from_slice(FIT);
        args.extend_from_slice(&["--out", out]);
        ok(dir.path(), &args);
    }
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulate_fit_predict_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let mut args = FIT.to_vec();
    args.extend_from_slice(&["--out", "model.json"]);
    ok(dir.path(), &args);
    ok(dir.path(), &["predict", "--model", "model.json", "--data", "d.csv", "--extremes", "--out", "pred.csv"]);
    let table = ok(dir.path(), &["evaluate", "--pred", "pred.csv", "--labels", "l.csv"]);
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("run,H,C,v-M"));
    let v: f64 = lines.next().unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(v > 0.9, "v-measure {v}");

    let scores = ok(dir.path(), &["score", "--model", "model.json", "--data", "d.csv"]);
    let mut rows = scores.lines();
    assert_eq!(rows.next(), Some("sample_id,cluster,confidence,loss,normality"));
    assert_eq!(rows.count(), 4000);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("model.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["config"]["config"]["tau"], 0.25);
    assert_eq!(manifest["outputs"][0], "model.json");
}

#[test]
fn repeated_fits_use_disjoint_seeds() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let mut args = vec!["--seed", "10"];
    args.extend_from_slice(FIT);
    args.extend_from_slice(&["--out", "m.json", "--repeat", "3"]);
    ok(dir.path(), &args);
    let runs = std::fs::read_to_string(dir.path().join("m.runs.csv")).unwrap();
    let seeds: Vec<&str> = runs.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(seeds, ["10", "13", "16"]);
    for r in 0..3 {
        assert!(dir.path().join(format!("m.r{r}.json")).exists());
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    std::fs::write(dir.path().join("c.toml"), "[fit]\npreset = \"sf\"\nlambda = 2.0\ngamma = 0.05\nseed = 4\n").unwrap();
    ok(dir.path(), &["fit", "--data", "d.csv", "--config", "c.toml", "--gamma", "0.02", "--out", "m.json"]);
    let model: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    let cfg = &model["config"];
    assert_eq!((cfg["tau"].as_f64(), cfg["lambda"].as_f64(), cfg["gamma"].as_f64()), (Some(0.8), Some(2.0), Some(0.02)));
    assert_eq!(cfg["seed"], 4);

    std::fs::write(dir.path().join("bad.toml"), "[fit]\nlamda = 2.0\n").unwrap();
    let out = mexico(dir.path(), &["fit", "--data", "d.csv", "--config", "bad.toml", "--out", "m.json"]);
    assert!(!out.status.success());
}

#[test]
fn volumes_match_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let table = ok(dir.path(), &["volumes", "--p", "3,4", "--tau", "0.5,0.1"]);
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let num = |s: &str| s.parse::<f64>().unwrap();
    // p = 3: simplex area sqrt(3)/2, l1 ratio 1/4, M-set ratio 1 - 3 (1/3)^2 at tau = 1/2.
    assert!((num(rows[0][2]) - 3f64.sqrt() / 2.0).abs() < 1e-12);
    assert!((num(rows[0][3]) - 0.25).abs() < 1e-12);
    assert!((num(rows[0][5]) - 2.0 / 3.0).abs() < 1e-12);
    // tau = 0.1 lies below the overlap limit: the ratio is left empty.
    assert_eq!(rows[1][5], "");
    // p = 4, tau = 1/2: 1 - 4 (3/8)^3.
    assert!((num(rows[2][5]) - (1.0 - 4.0 * 0.375f64.powi(3))).abs() < 1e-12);
}

#[test]
fn malformed_csv_names_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "1,2,3\n4,oops,6\n").unwrap();
    let out = mexico(dir.path(), &["fit", "--data", "bad.csv", "--out", "m.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("column 2"), "{err}");
}

#[test]
fn dimension_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    let mut args = FIT.to_vec();
    args.extend_from_slice(&["--out", "m.json"]);
    ok(dir.path(), &args);
    std::fs::write(dir.path().join("narrow.csv"), "1,2,3\n4,5,6\n").unwrap();
    let out = mexico(dir.path(), &["predict", "--model", "m.json", "--data", "narrow.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("6 features"));
}

#[test]
fn skmeans_baseline_and_select_m() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path());
    ok(dir.path(), &["baseline", "skmeans", "--data", "d.csv", "--m", "2", "--gamma", "0.02", "--out", "sk.csv"]);
    let table = ok(dir.path(), &["evaluate", "--pred", "sk.csv", "sk.csv", "--labels", "l.csv"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5, "two runs plus mean and std:\n{table}");
    assert!(lines[3].starts_with("mean,"));
    ok(dir.path(), &["evaluate", "--pred", "sk.csv", "--labels", "l.csv", "--out", "ev.csv"]);
    assert!(dir.path().join("ev.csv.manifest.json").exists());

    let stdout = ok(
        dir.path(),
        &["select-m", "--data", "d.csv", "--tau", "0.25", "--lambda", "1", "--gamma", "0.02", "--angular", "--candidates", "1,2,3"],
    );
    assert_eq!(stdout.trim(), "m = 2");
}
