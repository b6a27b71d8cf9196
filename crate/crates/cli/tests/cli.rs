use std::path::Path;
use std::process::{Command, Output};

fn chip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chip")).args(args).output().expect("spawn chip")
}

fn ok(args: &[&str]) -> String {
    let out = chip(args);
    assert!(out.status.success(), "chip {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path) -> String {
    let log = dir.join("sim.csv");
    let log_s = log.to_str().unwrap().to_string();
    ok(&[
        "simulate", "--n", "40", "--k", "2", "-T", "200", "--mu1", "0.03", "--mu2", "0.003", "--alpha1", "0.3",
        "--alpha2", "0.1", "--seed", "3", "--out", &log_s,
    ]);
    log_s
}

#[test]
fn simulate_cluster_fit_eval() {
    let dir = tempfile::tempdir().unwrap();
    let log = simulate(dir.path());

    let labels = ok(&["cluster", &log, "--raw", "--k", "2"]);
    assert_eq!(labels.lines().next(), Some("node,token,block"));
    assert_eq!(labels.lines().count(), 41);

    let auto = chip(&["cluster", &log, "--raw", "--k", "auto"]);
    assert!(String::from_utf8_lossy(&auto.stderr).contains("eigengap selects k = 2"));

    let report: serde_json::Value = serde_json::from_str(&ok(&["fit", &log, "--raw", "--k", "auto"])).unwrap();
    assert_eq!(report["k"], 2);
    assert_eq!(report["block_sizes"].as_array().unwrap().len(), 2);
    assert_eq!(report["test_loglik"][0]["model"], "chip");
    assert_eq!(report["test_loglik"][1]["model"], "poisson");

    let table = ok(&["eval", &log, "--raw", "--k", "2", "--test-count", "50"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "model,k,test_ll_per_event,l_train,l_test");
    assert!(lines[1].starts_with("chip,2,") && lines[1].ends_with(",50"));
    assert!(lines[2].starts_with("poisson,2,"));
}

#[test]
fn ingest_normalises_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    std::fs::write(&raw, "sender,receiver,timestamp\nalice,bob,100\nbob,bob,150\nbob,carol,200\n").unwrap();
    let out = dir.path().join("norm.csv");
    let summary = ok(&["ingest", raw.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["self_edges_dropped"], 1);
    assert_eq!(summary["nodes"], 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("sender,receiver,timestamp\n1,2,0\n2,3,1000"));

    std::fs::write(&raw, "sender,receiver,timestamp\na,b,1\na,b,zz\n").unwrap();
    let bad = chip(&["ingest", raw.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 3"));
}

#[test]
fn experiment_outputs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_chip"))
            .env("CHIP_THREADS", threads)
            .args(["experiment", "fig2a", "--grid", "n=16,32", "--replicates", "3", "--seed", "11", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        out
    };
    let a = run("a", "1");
    let b = run("b", "2");
    for name in ["fig2a.csv", "fig2a_summary.csv", "fig2a_manifest.json"] {
        let x = std::fs::read(a.join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let rows = std::fs::read_to_string(a.join("fig2a.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 3 * 2);
    assert!(rows.lines().next().unwrap().contains(",seed,"));
}

#[test]
fn experiment_config_round_trip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let toml = ok(&["experiment", "ci-coverage", "--replicates", "4", "--dump-config"]);
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, toml).unwrap();
    let again = ok(&["experiment", "--config", path.to_str().unwrap(), "--dump-config"]);
    assert!(again.contains("replicates = 4"));

    assert!(ok(&["experiment", "--list"]).lines().any(|l| l == "heatmap-fixed-k"));
    assert!(!chip(&["experiment", "nope"]).status.success());
    assert!(!chip(&["experiment", "fig2a", "--grid", "n=0"]).status.success());
    assert!(!chip(&["cluster", "missing.csv", "--k", "0"]).status.success());
}
