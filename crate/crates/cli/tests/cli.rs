use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn acbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = acbr(args);
    assert!(out.status.success(), "acbr {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn small_data(dir: &Path) -> String {
    let p = path(dir, "train.csv");
    ok(&["synth", "--out", &p, "--solvent", "60", "--insolvent", "60", "--features", "4", "--seed", "1"]);
    p
}

fn quick_model(dir: &Path, extra: &[&str]) -> (String, PathBuf) {
    let data = small_data(dir);
    let model = path(dir, "model.json");
    let report = dir.join("report.json");
    let mut args = vec!["train", "--data", &data, "--out", &model, "--swarm", "4", "--pso-iters", "3"];
    if !extra.contains(&"--methods") {
        args.extend(["--methods", "anova"]);
    }
    let report_arg = report.to_string_lossy().into_owned();
    args.extend(["--report", &report_arg]);
    args.extend(extra);
    ok(&args);
    (model, report)
}

/// Two features; the label is 1 exactly when VAR1 > 0.5, and VAR1 stays
/// at least 0.1 away from the boundary.
fn separable_csv(path: &str, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("id,VAR1,VAR2,label\n");
    for i in 0..n {
        let insolvent = i % 2 == 1;
        let x: f64 = if insolvent { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..0.4) };
        csv.push_str(&format!("c{i},{x},{},{}\n", rng.random::<f64>(), u8::from(insolvent)));
    }
    fs::write(path, csv).unwrap();
}

#[test]
fn single_method_report() {
    let dir = tempfile::tempdir().unwrap();
    let (_, report) = quick_model(dir.path(), &["--methods", "gini"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let candidates = summary["candidates"].as_array().unwrap();
    assert_eq!(candidates.len(), 1);
    assert_eq!(candidates[0]["method"], "gini");
}

#[test]
fn zero_iterations_keep_the_unit_exponents() {
    let dir = tempfile::tempdir().unwrap();
    let (model, report) = quick_model(dir.path(), &["--pso-iters", "0"]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let c = &summary["candidates"][0];
    assert_eq!(c["cv_score"], c["epcbr_score"]);
    let model: Value = serde_json::from_str(&fs::read_to_string(model).unwrap()).unwrap();
    assert!(model["similarity"]["local"]["a"].as_array().unwrap().iter().all(|v| v == 1.0));
}

#[test]
fn predicting_the_training_file_with_one_neighbor() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = quick_model(dir.path(), &["--k-grid", "1", "--no-undersample"]);
    let data = path(dir.path(), "train.csv");
    let out = path(dir.path(), "pred.csv");
    ok(&["predict", "--model", &model, "--data", &data, "--out", &out]);
    let rows: Vec<Vec<String>> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 120);
    assert!(rows.iter().all(|r| r[1] == r[5]), "every case should retrieve itself");
    assert!(rows.iter().all(|r| r[4] == r[0]));

    // with self-exclusion the nearest neighbor is another case
    ok(&["predict", "--model", &model, "--data", &data, "--out", &out, "--exclude-self"]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| {
        let cols: Vec<&str> = l.split(',').collect();
        cols[0] != cols[4]
    }));
}

#[test]
fn empty_query_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = quick_model(dir.path(), &[]);
    let empty = path(dir.path(), "empty.csv");
    fs::write(&empty, "id,VAR1,VAR2,VAR3,VAR4\n").unwrap();
    let out = acbr(&["predict", "--model", &model, "--data", &empty]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero data rows"));

    let missing_column = path(dir.path(), "narrow.csv");
    fs::write(&missing_column, "id,VAR1\nq,0.5\n").unwrap();
    assert_eq!(acbr(&["predict", "--model", &model, "--data", &missing_column]).status.code(), Some(2));
}

#[test]
fn explain_scopes() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = quick_model(dir.path(), &[]);
    let data = path(dir.path(), "train.csv");

    let plain = ok(&["explain", "--model", &model, "--data", &data, "--case", "S00003"]);
    assert!(plain.contains("probability"));
    assert!(!plain.contains("Shapley"));
    assert!(!plain.contains("what-if"));

    let json = path(dir.path(), "report.json");
    let full = ok(&[
        "explain", "--model", &model, "--data", &data, "--case", "S00003", "--shapley", "exact",
        "--whatif-target", "S00100", "--order", "shapley", "--json", &json,
    ]);
    assert!(full.contains("efficiency check"));
    assert!(full.contains("(passed)"));
    let report: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["whatif"]["steps"].as_array().unwrap().len(), 5);
    assert!(report["shapley"]["residual"].as_f64().unwrap().abs() < 1e-9);

    let out = acbr(&["explain", "--model", &model, "--data", &data, "--case", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown case"));

    let out = acbr(&["explain", "--model", &model, "--data", &data, "--case", "S00003", "--shapley", "fast"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn benchmark_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "sep.csv");
    separable_csv(&data, 200, 5);
    let csv = path(dir.path(), "table.csv");
    let args = ["benchmark", "--data", &data, "--variants", "ecbr,ewcbr", "--swarm", "4", "--pso-iters", "2", "--csv", &csv];
    let first = ok(&args);
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(ok(&args), first);
    assert_eq!(fs::read_to_string(&csv).unwrap(), table);

    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let accuracy: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!(accuracy >= 0.95, "{row}");
    }
}

#[test]
fn usage_and_startup_errors() {
    assert_eq!(acbr(&["train"]).status.code(), Some(1));
    assert_eq!(acbr(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(acbr(&["--help"]).status.code(), Some(0));
    let out = acbr(&["serve", "--model", "/nonexistent/model.json", "--bind", "127.0.0.1:0"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path());
    let model = path(dir.path(), "m.json");
    let out = acbr(&["train", "--data", &data, "--out", &model, "--metric", "speed"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new(&model).exists());
}

#[test]
fn curve_output() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = quick_model(dir.path(), &[]);
    let text = ok(&["curve", "--model", &model, "--feature", "VAR2"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "diff,similarity");
    assert_eq!(lines.len(), 202);
    assert_eq!(lines[101], "0,1");
    assert_eq!(acbr(&["curve", "--model", &model, "--feature", "VAR9"]).status.code(), Some(2));
}

fn http_get(addr: &str, path: &str) -> (String, String) {
    use std::io::{Read, Write};
    let mut s = std::net::TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    (head.lines().next().unwrap().to_string(), body.to_string())
}

#[test]
fn serve_api_and_static_assets() {
    use std::io::{BufRead, BufReader};
    let dir = tempfile::tempdir().unwrap();
    let (model, _) = quick_model(dir.path(), &["--k-grid", "5"]);
    let www = dir.path().join("www");
    fs::create_dir(&www).unwrap();
    fs::write(www.join("index.html"), "<p>console</p>").unwrap();

    let mut child = Command::new(env!("CARGO_BIN_EXE_acbr"))
        .args(["serve", "--model", &model, "--bind", "127.0.0.1:0", "--static"])
        .arg(&www)
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut banner = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut banner).unwrap();
    let addr = banner.trim().strip_prefix("listening on http://").unwrap().to_string();

    let (status, body) = http_get(&addr, "/health");
    let health: Value = serde_json::from_str(&body).unwrap();
    let (page_status, page) = http_get(&addr, "/index.html");
    let (curve_status, _) = http_get(&addr, "/curves/VAR7");
    let (missing_status, _) = http_get(&addr, "/nothing-here");
    child.kill().unwrap();
    child.wait().unwrap();

    assert!(status.contains("200"), "{status}");
    assert_eq!(health["k"], 5);
    assert_eq!(health["features"].as_array().unwrap().len(), 4);
    assert!(page_status.contains("200"));
    assert_eq!(page, "<p>console</p>");
    assert!(curve_status.contains("404"));
    assert!(missing_status.contains("404"));
}
