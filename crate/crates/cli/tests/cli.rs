use std::path::Path;
use std::process::{Command, Output};

fn coolant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coolant"))
        .args(args)
        .env_remove("COOLANT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path, stages: &str) -> String {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{
  "seed": 11,
  "library": {{ "alcohols": 8, "chlorides": 3, "acids": 3, "purchasables": 2 }},
  "stages": {stages},
  "teacher": {{ "product_labels": 20, "epochs": 2, "batch_size": 16, "lr": 0.001, "hidden": 8, "latent": 4, "val_fraction": 0.1 }},
  "distill": {{ "sample_fraction": 0.4, "val_fraction": 0.1, "holdout": 10,
               "surrogate": {{ "epochs": 5, "batch_size": 16, "lr": 0.001, "final_lr": 0.00001, "slope": 0.01, "seed": 0 }} }}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn parse_reports_descriptors_and_failures() {
    let ok = coolant(&["parse", "OCC"]);
    assert_eq!(ok.status.code(), Some(0));
    let line: serde_json::Value = serde_json::from_str(stdout(&ok).trim()).unwrap();
    assert_eq!(line["smiles"], "CCO");
    assert_eq!(line["descriptors"]["heavy_atom_count"], 3);

    let bad = coolant(&["parse", "CCO", "C1CC"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stdout(&bad).lines().count(), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(coolant(&["nonsense"]).status.code(), Some(2));
    assert_eq!(coolant(&["react"]).status.code(), Some(2));
    assert_eq!(coolant(&["react", "--sizes", "1,2"]).status.code(), Some(2));
    assert_eq!(coolant(&["parse"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "{}");
    let out = Command::new(env!("CARGO_BIN_EXE_coolant"))
        .args(["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()])
        .env("COOLANT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn count_only_from_sizes() {
    let o = coolant(&["react", "--sizes", "44707,10719,46016"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["ethers"], 479_214_333u64);
    assert_eq!(v["esters"], 2_057_237_312u64);
    assert_eq!(v["total"], 2_536_451_645u64);
}

#[test]
fn filter_and_react_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("mols.csv");
    std::fs::write(&input, "id,smiles\na,CCO\nb,CCCl\nc,c1ccccc1\nd,CC(=O)O\n").unwrap();
    let input = input.to_str().unwrap();

    let o = coolant(&["filter", "--input", input, "--stage", "post"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "id,smiles,passed,violations");
    assert_eq!(rows[1], "a,CCO,true,");
    assert_eq!(rows[2], "b,CCCl,false,Chlorine");
    assert_eq!(rows[3], "c,c1ccccc1,false,AromaticRing");

    let o = coolant(&["react", "--reactants", input, "--count-only"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["total"], 2);
    let o = coolant(&["react", "--reactants", input]);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains("a,b,ether,CCOCC"));
    assert!(text.contains("a,d,ester,"));
}

#[test]
fn run_rerun_report_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"{"oracle": true}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = coolant(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o).lines().count(), 7);
    }
    for stage in ["filter", "react", "teacher", "lookup", "surrogate", "screen", "oracle"] {
        let name = format!("manifests/{stage}.json");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{stage}");
    }
    assert!(!std::fs::read_to_string(a.join("candidates.csv")).unwrap().is_empty());

    let o = coolant(&["report", "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["manifests"].as_array().unwrap().len(), 7);

    let o = coolant(&["bench", "--out", a.to_str().unwrap(), "--limit", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stages"].as_array().unwrap().len(), 4);

    let o = coolant(&["screen", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);

    std::fs::write(a.join("products.csv"), "tampered\n").unwrap();
    let o = coolant(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--stages", "react"]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::write(a.join("products.csv"), "tampered\n").unwrap();
    assert_eq!(coolant(&["report", "--out", a.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn failing_stage_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "{}");
    let out = dir.path().join("empty");
    let o = coolant(&["screen", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifests/screen.json")).unwrap()).unwrap();
    assert_eq!(m["status"], "failed");
    let o = coolant(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--stages", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bias_tools() {
    let o = coolant(&["bias", "check", "--rho", "-0.5", "--t1", "0", "--t2", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let expected = 0.25 + (-0.5f64).asin() / (2.0 * std::f64::consts::PI);
    assert!((v["case1"]["joint"].as_f64().unwrap() - expected).abs() < 1e-8);
    assert_eq!(v["case1"]["holds"], true);

    let o = coolant(&["bias", "scan", "--t1", "0.5", "--t2", "-0.5", "--grid", "-0.5,0,0.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["monotone"], true);

    let o = coolant(&["bias", "sim", "--k", "3", "--samples", "20000", "--batches", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn train_gate_and_stl_write_weights() {
    let dir = tempfile::tempdir().unwrap();
    let gate = dir.path().join("gate.weights");
    let metrics = dir.path().join("metrics.jsonl");
    let o = coolant(&[
        "train-gate",
        "--synthetic",
        "40",
        "--epochs",
        "2",
        "--batch-size",
        "16",
        "--out",
        gate.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(gate.exists() && gate.with_extension("json").exists());
    assert_eq!(std::fs::read_to_string(&metrics).unwrap().lines().count(), 2);

    let stl = dir.path().join("stl.weights");
    let o = coolant(&["train-stl", "--synthetic", "40", "--epochs", "1", "--task", "1", "--out", stl.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stl.exists());
    let o = coolant(&["train-stl", "--synthetic", "40", "--task", "9", "--out", stl.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
