use std::path::Path;
use std::process::{Command, Output};

fn odflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("stderr line");
    serde_json::from_str(line).expect("error JSON on stderr")
}

#[test]
fn simulate_then_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = odflow(&["simulate", "--out", path(&data), "--seed", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["flows.csv", "origin.csv", "destination.csv", "od.csv", "centroids.csv", "run.toml"] {
        assert!(data.join(f).exists(), "missing {f}");
    }
    let results = tmp.path().join("results");
    let out = odflow(&["estimate", "--config", path(&data.join("run.toml")), "--out", path(&results)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("W_D Distance"));
    assert!(table.contains("LR test: p-value"));
    for f in ["model_1.json", "table.txt", "table.csv", "coefficients.csv", "metadata.json"] {
        assert!(results.join(f).exists(), "missing {f}");
    }
}

#[test]
fn mc_is_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let out = odflow(&["mc", "--replications", "20", "--threads", threads, "--out", path(dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let x = std::fs::read(a.join("summary.csv")).unwrap();
    let y = std::fs::read(b.join("summary.csv")).unwrap();
    assert_eq!(x, y);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["replications"], 20);
    assert!(json["rng"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn weights_subcommand_writes_triplets() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("c.csv");
    std::fs::write(&c, "id,x_km,y_km\nA,0,0\nB,100,0\nC,400,0\n").unwrap();
    let w = tmp.path().join("w.csv");
    let out = odflow(&["--cutoff-km", "150", "weights", "--centroids", path(&c), "--out", path(&w)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&w).unwrap();
    assert!(text.starts_with("# d_c_km=150; isolated=C\n"));
    assert!(text.contains("A,B,1"));

    let out = odflow(&["--isolated", "error", "weights", "--centroids", path(&c), "--out", path(&w)]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "isolated_units");
}

#[test]
fn validation_errors_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = odflow(&["estimate", "--config", path(&tmp.path().join("missing.toml"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config");

    let data = tmp.path().join("data");
    assert!(odflow(&["simulate", "--out", path(&data)]).status.success());
    let flows = std::fs::read_to_string(data.join("flows.csv")).unwrap();
    let mut lines: Vec<String> = flows.lines().map(String::from).collect();
    let cell: Vec<String> = lines[3].split(',').map(String::from).collect();
    lines[3] = format!("{},{},-1", cell[0], cell[1]);
    std::fs::write(data.join("flows.csv"), lines.join("\n") + "\n").unwrap();
    let out = odflow(&["estimate", "--config", path(&data.join("run.toml"))]);
    assert!(!out.status.success());
    let err = error_json(&out);
    assert_eq!(err["error"], "negative_flow");
    assert!(err["message"].as_str().unwrap().contains(cell[0].as_str()));

    let out = odflow(&["mc", "--replications", "5", "--out", path(&tmp.path().join("mc"))]);
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"], "invalid_input");
}

#[test]
fn unknown_policy_is_rejected() {
    let out = odflow(&["--zero-flow", "drop", "mc", "--out", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero-flow"));
}
