use std::process::{Command, Output};

use serde_json::Value;

fn sqfn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqfn")).args(args).output().expect("sqfn runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_with_an_empty_selection_passes() {
    let out = sqfn(&["verify", "--suite"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["checks"].as_array().unwrap().len(), 0);
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn selecting_ex38_reports_its_five_checks() {
    let out = sqfn(&["verify", "--suite", "ex38", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(
        ids,
        ["ex38.pointwise", "ex38.carleson-stable", "ex38.strong-divergence", "ex38.fourier", "ex38.two-cube-growth"]
    );
    for c in v["checks"].as_array().unwrap() {
        assert!(["PAPER", "TRIVIAL", "DERIVED"].contains(&c["provenance"].as_str().unwrap()));
        if c["provenance"] == "PAPER" {
            assert!(!c["anchor"].as_str().unwrap().is_empty());
        }
    }
}

#[test]
fn permuted_selection_gives_identical_output() {
    let a = sqfn(&["verify", "--suite", "weights", "kernels", "--seed", "11"]);
    let b = sqfn(&["verify", "--suite", "kernels", "weights", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn run_writes_a_report_with_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ex37.json");
    let out = sqfn(&["run", "ex37", "--grid-h", "0.0078125", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["scenario"], "ex37");
    assert_eq!(v["environment"]["grid_h"], 0.0078125);
    assert!(v["environment"]["runtime_ms"].is_u64());
}

#[test]
fn configuration_errors_exit_with_two() {
    assert_eq!(sqfn(&["run", "ex39"]).status.code(), Some(2));
    assert_eq!(sqfn(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(sqfn(&["run", "ex37", "--per-octave", "0"]).status.code(), Some(2));
    assert_eq!(sqfn(&["constants", "--p", "2", "--ap", "1,1", "--sc", "1"]).status.code(), Some(2));
    assert_eq!(sqfn(&["kernel", "/nonexistent/kernel.toml"]).status.code(), Some(2));
}

#[test]
fn oversized_grids_exit_with_three() {
    let out = sqfn(&["run", "ex38", "--grid-h", "1e-7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity"));
}

#[test]
fn plotdata_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("meanzero.csv");
    let out = sqfn(&["plotdata", "meanzero", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("corner,side,value"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(!rows.is_empty() && rows.iter().all(|r| r.len() == 3 && r[2] >= 0.0));
}

#[test]
fn constants_evaluates_both_formulas() {
    let out = sqfn(&["constants", "--p", "4,4", "--ap", "1,1", "--sc", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["bound_constant"], 5.0);
    assert!(v["c0"].is_null());

    let v = json(&sqfn(&["constants", "--p", "4,4", "--ap", "1,1", "--sc", "1", "--b", "2"]));
    let c0 = v["c0"].as_f64().unwrap();
    assert!((c0 - (32.0 + 2f64.powf(2.0 / 3.0))).abs() < 1e-12);
}

#[test]
fn kernel_file_is_summarised() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.toml");
    std::fs::write(
        &path,
        "m = 1\nn = 1\nN = 4.0\ngamma = 1.0\nform = \"convolution\"\n\n[kernel]\nname = \"derived_psi\"\n\n[[weights]]\ntag = \"power\"\na = 0.5\n",
    )
    .unwrap();
    let out = sqfn(&["kernel", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["m"], 1);
    assert_eq!(v["t_constant"], true);
    assert!((v["derived"]["gamma_prime"].as_f64().unwrap() - 0.3).abs() < 1e-15);
    assert_eq!(v["weights"].as_array().unwrap().len(), 1);

    std::fs::write(&path, "m = 1\n").unwrap();
    assert_eq!(sqfn(&["kernel", path.to_str().unwrap()]).status.code(), Some(2));
}
