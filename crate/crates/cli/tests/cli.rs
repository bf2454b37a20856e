use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn drcfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drcfs"))
        .args(args)
        .env_remove("DRCFS_THREADS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_select_scores_against_truth() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = drcfs(&["simulate", "--m", "6", "--n", "1500", "--p-c", "0.4", "--seed", "3", "--out", path(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = fs::read_to_string(sim.join("data.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header.ends_with(",Y"), "{header}");

    let report = dir.path().join("report.json");
    let out = drcfs(&[
        "select",
        "--input",
        path(&sim.join("data.csv")),
        "--truth",
        path(&sim.join("ground_truth.json")),
        "--seed",
        "1",
        "--out",
        path(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["tool"], "drcfs");
    let results = doc["report"]["results"].as_array().unwrap();
    assert_eq!(results.len(), header.split(',').count() - 1);
    assert!(doc["report"]["metrics"]["acc"].as_f64().is_some());
}

#[test]
fn select_writes_json_to_stdout_without_out() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let mut text = String::from("A,B,Y\n");
    for r in 0..200 {
        let a = (r % 13) as f64 - 6.0;
        let b = ((r * 7) % 11) as f64 - 5.0;
        text.push_str(&format!("{a},{b},{}\n", a + ((r * 31) % 5) as f64 * 0.1));
    }
    fs::write(&csv, text).unwrap();
    let out = drcfs(&["select", "--input", path(&csv), "--k", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["k"], 4);
    assert_eq!(doc["report"]["results"][0]["name"], "A");
}

#[test]
fn malformed_csv_exits_with_ingestion_code() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "X1,X2,Y\n1,2,3\n4,oops,6\n").unwrap();
    let out = drcfs(&["select", "--input", path(&csv)]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&csv, "X1,X2\n1,2\n").unwrap();
    assert_eq!(drcfs(&["select", "--input", path(&csv)]).status.code(), Some(2));
}

#[test]
fn bad_flags_exit_with_usage_code() {
    assert_eq!(drcfs(&["select", "--no-such-flag"]).status.code(), Some(4));
    assert_eq!(drcfs(&["select", "--learner", "svm"]).status.code(), Some(4));
    assert_eq!(drcfs(&["select", "--q", "0"]).status.code(), Some(4));
    assert_eq!(drcfs(&["select"]).status.code(), Some(4));
    assert_eq!(drcfs(&["--help"]).status.code(), Some(0));
}

#[test]
fn deterministic_benchmark_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = drcfs(&[
            "benchmark", "--m", "5", "--n", "400", "--replicates", "3", "--seed", "7", "--deterministic", "--out",
            path(&out_dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["runs.csv", "selection_frequency.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let runs = fs::read_to_string(a.join("runs.csv")).unwrap();
    // header, three replicates, one summary row
    assert_eq!(runs.lines().count(), 5);
}

#[test]
fn grid_config_yields_one_summary_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.json");
    fs::write(
        &cfg,
        r#"{"dgp": {"m": 4, "n": 300, "p_c": 0.5}, "grid": {"n": [300, 600]}, "replicates": 2, "seed": 11}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = drcfs(&["benchmark", "--config", path(&cfg), "--deterministic", "--out", path(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert_ne!(cells[0]["config_hash"], cells[1]["config_hash"]);
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().filter(|l| l.contains(",mean,")).count(), 2);
}

#[test]
fn oracle_check_passes_on_random_models() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("oracle.json");
    let out = drcfs(&["oracle-check", "--seed", "5", "--out", path(&out_file)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_file).unwrap()).unwrap();
    let summary = &doc["oracle"];
    assert_eq!(summary["models"], summary["parents_identified"]);
    assert!(summary["acde_checks"].as_u64().unwrap() > 0);
}

#[test]
fn oracle_check_rejects_an_invalid_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(&model, r#"{"features": [], "outcome": {"parents": [0], "table": [0.0], "noise": [[0.0, 1.0]]}}"#).unwrap();
    assert_eq!(drcfs(&["oracle-check", "--input", path(&model)]).status.code(), Some(2));
}
