use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpn-eigen"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn theorem_check_round() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["theorem-check", "--n", "2", "--w", "round"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(dir.path(), "theorem-check");
    assert_eq!(report["passed"], true);
    let lambda2 = report["detail"]["lambda2"].as_f64().unwrap();
    assert!((lambda2 - 6.0).abs() < 1e-8);
    assert_eq!(report["detail"]["bound"].as_f64().unwrap(), 12.0);
}

#[test]
fn ratio_table_has_63_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["ratio-table", "--n-max", "64"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("ratio-table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,A_n,B_n,ratio,lower_bound"));
    assert_eq!(lines.count(), 63);
}

#[test]
fn degree_of_flip_b() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["degree", "--map", "flip-b", "--dim", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(dir.path(), "degree");
    assert_eq!(report["detail"]["report"]["integral"]["degree"], 1);
    assert_eq!(report["detail"]["symmetry"]["passed"], true);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 3\n[spectrum]\nl = 4\nk = 11\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = run(dir.path(), &["spectrum", "--config", cfg, "--k", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(dir.path(), "spectrum");
    assert_eq!(report["params"]["n"], 3);
    assert_eq!(report["params"]["l"], 4);
    assert_eq!(report["params"]["k"], 10);
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // A negative band makes the bound unattainable: assertion failure.
    let out = run(dir.path(), &["limits-fold", "--sequence", "0.9", "--band", "-0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(dir.path(), "limits-fold")["passed"], false);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "no-such-key = 1\n").unwrap();
    let out = run(dir.path(), &["ratio-table", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["theorem-check", "--w", "lumpy"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["spectrum", "--n", "abc"]);
    assert_eq!(out.status.code(), Some(2));

    // |d| = 1 is outside the open ball.
    let out = run(dir.path(), &["com-solve", "--radius", "1.0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn csv_is_reproducible_across_thread_counts() {
    let args = ["vfield-search", "--starts", "6", "--max-evals", "300", "--seed", "11"];
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let dir = tempfile::tempdir().unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_rpn-eigen"))
            .args(args)
            .arg("--out-dir")
            .arg(dir.path())
            .env("RPN_EIGEN_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.code() == Some(0) || out.status.code() == Some(1));
        outputs.push(std::fs::read(dir.path().join("vfield-search.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
