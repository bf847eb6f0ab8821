use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qqlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qqlab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QQLAB_SEED")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn run_algorithm_branches() {
    let tmp = tempfile::tempdir().unwrap();
    let u2 = qqlab(&["run-algorithm", "--perm", "U2", "--json"], tmp.path());
    assert_eq!(u2.status.code(), Some(0));
    let j = json_of(&u2);
    assert_eq!(j["verdict"], "positive cyclic");
    assert_eq!(j["outcome_level"], 2);
    assert_eq!(j["classical"]["verdict"], "single query insufficient");

    let u6 = json_of(&qqlab(&["run-algorithm", "--perm", "U6", "--json"], tmp.path()));
    assert_eq!(u6["verdict"], "negative cyclic");
    assert_eq!(u6["outcome_level"], 4);

    let d5 = qqlab(&["run-algorithm", "--dim", "5", "--perm", "shift:3", "--json"], tmp.path());
    assert_eq!(json_of(&d5)["verdict"], "positive cyclic");

    let text = qqlab(&["run-algorithm", "--perm", "[2,3,4,1]"], tmp.path());
    assert!(String::from_utf8_lossy(&text.stdout).contains("positive cyclic"));

    let d2 = json_of(&qqlab(&["run-algorithm", "--dim", "2", "--perm", "reflect:1", "--json"], tmp.path()));
    assert_eq!(d2["degenerate"], true);
    assert_eq!(d2["classical"]["quantum_advantage"], false);
}

#[test]
fn run_algorithm_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in ["[1,3,2,4]", "U9", "[1,1,2,3]", "spin:2"] {
        let out = qqlab(&["run-algorithm", "--perm", bad], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    let out = qqlab(&["run-algorithm", "--dim", "1", "--perm", "[1]"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tiny_budget_leaves_gates_unconverged() {
    let tmp = tempfile::tempdir().unwrap();
    let out = qqlab(
        &[
            "optimize-gates",
            "--out",
            "g",
            "--set",
            "optimizer.fidelity_goal=0.9999",
            "--set",
            "optimizer.max_evals=40",
            "--set",
            "optimizer.n_restarts=1",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let files = read_dir_sorted(&tmp.path().join("g"));
    assert_eq!(files.len(), 17);
    let uft: Value = serde_json::from_slice(&files.iter().find(|f| f.0 == "UFT.json").unwrap().1).unwrap();
    assert_eq!(uft["converged"], false);
    assert!(uft["evals_used"].as_u64().unwrap() <= 40);
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let out = qqlab(&["optimize-gates", "--out", "gates"], dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let gates = read_dir_sorted(&dir.join("gates"));
    assert_eq!(gates.len(), 17);
    assert!(gates.iter().all(|(name, _)| name.ends_with(".json")));

    let again = qqlab(&["optimize-gates", "--out", "gates2"], dir);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(read_dir_sorted(&dir.join("gates2")), gates);

    let sim = qqlab(&["simulate-experiment", "--out", "results", "--json"], dir);
    assert_eq!(sim.status.code(), Some(0), "{}", String::from_utf8_lossy(&sim.stderr));
    let report = json_of(&sim);
    assert_eq!(report["verdicts_correct"], 8);
    let perms = report["permutations"].as_array().unwrap();
    let level = |label: &str| perms.iter().find(|p| p["label"] == label).unwrap()["outcome_level"].clone();
    assert_eq!(level("U2"), 2);
    assert_eq!(level("U6"), 4);
    for p in perms {
        assert_eq!(p["agrees"], true);
        assert_eq!(p["steps"].as_array().unwrap().len(), 3);
    }
    let report_path = dir.join("results/report.json");
    let stored = fs::read(&report_path).unwrap();
    assert_eq!(stored, sim.stdout);

    let rerun = qqlab(&["simulate-experiment", "--out", "results2", "--json"], dir);
    assert_eq!(rerun.stdout, sim.stdout);
    assert_eq!(read_dir_sorted(&dir.join("results/figures")), read_dir_sorted(&dir.join("results2/figures")));

    // exported SVGs match the ones written by the experiment, byte for byte
    let exp = qqlab(&["export-figures", "--report", "results/report.json", "--out", "svg"], dir);
    assert_eq!(exp.status.code(), Some(0));
    let svgs = read_dir_sorted(&dir.join("svg"));
    assert_eq!(svgs.len(), 24);
    let first = qqlab(&["export-figures", "--report", "results/report.json", "--out", "svg2"], dir);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(read_dir_sorted(&dir.join("svg2")), svgs);

    // CSV grids equal the stored reconstructed matrices exactly
    let csv = qqlab(&["export-figures", "--report", "results/report.json", "--format", "csv", "--out", "csv"], dir);
    assert_eq!(csv.status.code(), Some(0));
    let u6 = perms.iter().find(|p| p["label"] == "U6").unwrap();
    let rec = &u6["steps"][2]["reconstructed"];
    let text = fs::read_to_string(dir.join("csv/U6_step_iii.csv")).unwrap();
    for (k, line) in text.lines().skip(1).enumerate() {
        let part = if k < 4 { "re" } else { "im" };
        let row = k % 4;
        let cells: Vec<f64> = line.split(',').skip(2).map(|c| c.parse().unwrap()).collect();
        for (c, v) in cells.iter().enumerate() {
            assert_eq!(*v, rec[part][row * 4 + c].as_f64().unwrap());
        }
    }

    // a missing gate file
    fs::remove_file(dir.join("gates/UFTinv_U6_UFT.json")).unwrap();
    let missing = qqlab(&["simulate-experiment", "--out", "results3"], dir);
    assert_eq!(missing.status.code(), Some(4));
    let subset = qqlab(&["simulate-experiment", "--out", "results4", "--set", "permutations=[\"U2\"]"], dir);
    assert_eq!(subset.status.code(), Some(0));

    // a tampered gate file fails verification
    let path = dir.join("gates/UFT.json");
    let mut doc: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    doc["achieved_fidelity"] = Value::from(0.5);
    fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let tampered = qqlab(&["simulate-experiment", "--out", "results5", "--set", "permutations=[\"U2\"]"], dir);
    assert_eq!(tampered.status.code(), Some(1));
}

#[test]
fn seed_environment_variable_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qqlab"))
        .args(["optimize-gates", "--out", "g", "--json", "--set", "optimizer.max_evals=30", "--set", "optimizer.n_restarts=1"])
        .current_dir(tmp.path())
        .env("QQLAB_SEED", "4242")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let uft: Value = serde_json::from_slice(&fs::read(tmp.path().join("g/UFT.json")).unwrap()).unwrap();
    assert_eq!(uft["config"]["seed"], 4242);
}

#[test]
fn export_rejects_malformed_reports() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), "{\"provenance\": 3}").unwrap();
    let out = qqlab(&["export-figures", "--report", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(6));
    let out = qqlab(&["export-figures", "--report", "absent.json"], tmp.path());
    assert_eq!(out.status.code(), Some(6));
}

#[test]
fn config_file_and_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"optimizer": {"max_evals": 30, "n_restarts": 1}}"#).unwrap();
    let out = qqlab(&["optimize-gates", "--config", "cfg.json", "--out", "g"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    fs::write(tmp.path().join("bad.json"), r#"{"optimizer": {"n_blocks": 0}}"#).unwrap();
    let out = qqlab(&["optimize-gates", "--config", "bad.json", "--out", "g"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}
