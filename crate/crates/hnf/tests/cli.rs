use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hnf::formats::{read_weight, write_weight};
use hnf_core::linalg::Matrix;
use hnf_core::matrixgen::WeightMatrix;

fn hnf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnf"))
        .args(args)
        .env_remove("HNF_MEM_BUDGET")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_blobs(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["train", "--data", "blobs", "--n1", "10", "--depth", "3", "--out", out];
    args.extend_from_slice(extra);
    hnf(&args)
}

fn parse_table(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

#[test]
fn train_writes_artifacts_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = train_blobs(&run, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(run.join("report.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 4);
    for f in ["network.json", "run.json", "report.csv", "layer1.hnfw", "layer3.hnfw", "map0.hnfm", "map3.hnfm"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["monotonicity_certified"], true);
    assert_eq!(manifest["settings"]["n1"], 10);
}

#[test]
fn eval_reproduces_the_training_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = hnf(&["train", "--data", "blobs", "--elm", "--n1", "30", "--depth", "3", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = fs::read_to_string(run.join("report.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let jsonl = dir.path().join("eval.jsonl");
    let o = hnf(&["eval", "--out", run.to_str().unwrap(), "--jsonl", jsonl.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let evals: Vec<serde_json::Value> = fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(evals.len(), rows.len());
    for (r, e) in rows.iter().zip(&evals) {
        assert_eq!(r["layer"], e["layer"]);
        let (a, b) = (r["train_cost"].as_f64().unwrap(), e["train_cost"].as_f64().unwrap());
        assert!((a - b).abs() <= 1e-9 * a.max(1e-300), "{a} vs {b}");
        assert_eq!(r["train_acc"], e["train_acc"]);
        assert_eq!(r["test_acc"], e["test_acc"]);
    }
    assert_eq!(parse_table(&stdout(&o)).len(), rows.len());
}

#[test]
fn eval_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&hnf(&["eval", "--out", run.to_str().unwrap()])), 3);
    assert_eq!(code(&train_blobs(&run, &[])), 0);
    assert_eq!(code(&hnf(&["eval", "--out", run.to_str().unwrap(), "--layer", "99"])), 2);
    let o = hnf(&["eval", "--out", run.to_str().unwrap(), "--layer", "2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(parse_table(&stdout(&o)).len(), 1);
}

#[test]
fn train_error_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(code(&hnf(&["train", "--out", out])), 3);
    assert_eq!(code(&hnf(&["train", "--data", "csv:/no/such/file.csv", "--out", out])), 3);
    assert_eq!(code(&hnf(&["train", "--data", "blobs", "--depth", "0", "--out", out])), 2);
    assert_eq!(code(&hnf(&["train", "--data", "blobs", "--n1", "3", "--out", out])), 2);
    assert_eq!(code(&hnf(&["train", "--data", "blobs", "--admm-penalty", "-1", "--out", out])), 2);
    assert_eq!(code(&hnf(&["train", "--bogus-flag"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_hnf"))
        .args(["train", "--data", "blobs", "--depth", "6", "--n1", "8", "--out", out])
        .env("HNF_MEM_BUDGET", "100000")
        .output()
        .unwrap();
    assert_eq!(code(&o), 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hnf.toml");
    fs::write(&cfg, "data = \"blobs\"\nn1 = 12\ndepth = 4\n").unwrap();
    let run = dir.path().join("run");
    let o = hnf(&["train", "--config", cfg.to_str().unwrap(), "--depth", "2", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(run.join("report.jsonl")).unwrap().lines().count(), 3);
    let net: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("network.json")).unwrap()).unwrap();
    assert_eq!(net["layers"][0]["rows"], 12);

    fs::write(&cfg, "data = \"blobs\"\nunknown_key = 1\n").unwrap();
    assert_eq!(code(&hnf(&["train", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn verify_fresh_and_saved_networks() {
    let o = hnf(&["verify", "--data", "blobs", "--n1", "10", "--depth", "3", "--trials", "200"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    for row in parse_table(&stdout(&o)) {
        let margin: f64 = row[3].parse().unwrap();
        assert!(margin >= 0.0, "{row:?}");
    }
    assert_eq!(code(&hnf(&["verify", "--trials", "0"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train_blobs(&run, &[])), 0);
    assert_eq!(code(&hnf(&["verify", "--out", run.to_str().unwrap(), "--trials", "100"])), 0);
}

#[test]
fn verify_fails_on_duplicated_weight_column() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train_blobs(&run, &[])), 0);
    let path = run.join("layer1.hnfw");
    let w = read_weight(&path).unwrap();
    let m = Matrix::from_fn(w.rows(), w.cols(), |i, j| w.matrix()[(i, if j == 1 { 0 } else { j })]);
    write_weight(&path, &WeightMatrix::from_parts(m, w.kind(), w.seed()).unwrap()).unwrap();
    let o = hnf(&["verify", "--out", run.to_str().unwrap(), "--trials", "50"]);
    assert_eq!(code(&o), 4, "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("inversion-round-trip") && l.contains("FAIL")));
}

#[test]
fn curves_match_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&train_blobs(&run, &[])), 0);
    let o = hnf(&["curves", "--out", run.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "layer,nodes_cumulative,train_acc,test_acc,train_cost");
    assert_eq!(lines.len(), 5);
    let report: Vec<serde_json::Value> = fs::read_to_string(run.join("report.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    for (line, r) in lines[1..].iter().zip(&report) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1].parse::<u64>().unwrap(), r["nodes_cumulative"].as_u64().unwrap());
        assert_eq!(cells[2].parse::<f64>().unwrap(), r["train_acc"].as_f64().unwrap());
        assert_eq!(cells[4].parse::<f64>().unwrap(), r["train_cost"].as_f64().unwrap());
    }

    let csv = dir.path().join("c.csv");
    assert_eq!(code(&hnf(&["curves", "--out", run.to_str().unwrap(), "--csv", csv.to_str().unwrap()])), 0);
    assert_eq!(fs::read_to_string(&csv).unwrap(), text);

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&hnf(&["curves", "--report", empty.to_str().unwrap()])), 3);
    assert_eq!(code(&hnf(&["curves", "--report", dir.path().join("nope").to_str().unwrap()])), 3);
}

#[test]
fn csv_data_with_custom_label_column() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let mut text = String::from("cls;a;b;c\n");
    for j in 0..90 {
        let c = j % 3;
        text.push_str(&format!("k{c};{};{};{}\n", c as f64 * 3.0 + (j as f64 * 0.37).sin(), (j as f64).cos(), c));
    }
    fs::write(&csv, text).unwrap();
    let run = dir.path().join("run");
    let src = format!("csv:{}", csv.display());
    let o = hnf(&[
        "train", "--data", &src, "--delimiter", ";", "--label-col", "cls", "--n1", "4", "--depth", "2",
        "--train-count", "60", "--out", run.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["data"]["n_train"], 60);
    assert_eq!(manifest["data"]["label_names"], serde_json::json!(["k0", "k1", "k2"]));
    assert_eq!(code(&hnf(&["eval", "--out", run.to_str().unwrap()])), 0);
}
