//! End-to-end checks of the command-line interface.

use std::path::Path;
use std::process::Command;

fn qtomo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qtomo"))
}

#[test]
fn simulate_then_estimate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = qtomo()
        .args([
            "simulate",
            "--design",
            "pauli",
            "--m",
            "4",
            "--rank",
            "2",
            "--sigma",
            "0.1",
            "--n",
            "400",
            "--reps",
            "2",
            "--epsilon",
            "auto:0.01",
            "--seed",
            "5",
            "--save-data",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("rows.csv").exists());
    assert!(out.join("plot.csv").exists());
    assert!(out.join("dataset.csv.meta.json").exists());

    let est = out.join("estimate.csv");
    let status = qtomo()
        .args(["estimate", "--epsilon", "auto:0.01", "--data"])
        .arg(out.join("dataset.csv"))
        .arg("--out")
        .arg(&est)
        .status()
        .unwrap();
    assert!(status.success());
    let loaded = qtomo_cli::csvio::load_estimate_matrix(&est).unwrap();
    assert_eq!(loaded.dim(), 4);
    assert!((loaded.trace() - 1.0).abs() < 1e-8);
}

#[test]
fn sweep_writes_slope_report_and_enforces_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let status = qtomo()
        .args([
            "sweep",
            "--axis",
            "n",
            "--design",
            "pauli",
            "--m",
            "4",
            "--rank",
            "1",
            "--sigma",
            "0.1",
            "--n",
            "200,400,800,1600",
            "--reps",
            "10",
            "--epsilon",
            "auto:0.01",
            "--seed",
            "3",
            "--slope-min",
            "-1.6",
            "--slope-max",
            "-0.4",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("slope.csv").exists());
    let text = std::fs::read_to_string(out.join("slope.csv")).unwrap();
    assert!(text.starts_with("axis,slope,ci_low,ci_high"));

    // An impossible window must fail via the exit code.
    let status = qtomo()
        .args([
            "sweep",
            "--axis",
            "n",
            "--design",
            "pauli",
            "--m",
            "4",
            "--n",
            "200,400,800,1600",
            "--reps",
            "5",
            "--seed",
            "3",
            "--slope-min",
            "5.0",
            "--out",
        ])
        .arg(dir.path().join("sweep2"))
        .status()
        .unwrap();
    assert!(!status.success());
}

#[test]
fn bernstein_and_popcheck_exit_zero_on_pass() {
    let dir = tempfile::tempdir().unwrap();
    let status = qtomo()
        .args([
            "bernstein",
            "--design",
            "mc-uniform",
            "--m",
            "4",
            "--n",
            "50",
            "--reps",
            "500",
            "--t-points",
            "10",
            "--seed",
            "7",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("bernstein.csv").exists());

    let status = qtomo()
        .args([
            "popcheck",
            "--design",
            "pauli",
            "--m",
            "4",
            "--eps-grid",
            "1e-3,1e-1,4",
            "--seed",
            "7",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("popcheck.csv").exists());
}

#[test]
fn bounds_subcommand_evaluates_and_reports_missing_symbols() {
    let output = qtomo()
        .args([
            "bounds",
            "--theorem",
            "thm22",
            "--m",
            "4",
            "--n",
            "10000",
            "--t",
            "1.0",
            "--sigma-xi",
            "1.0",
            "--rank",
            "1",
            "--approx-sq",
            "0.0",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.starts_with("thm22,"), "got: {text}");
    assert!(text.contains("max:rank-term="));

    // Missing symbol: the error names both the field and the display.
    let output = qtomo()
        .args(["bounds", "--theorem", "thm22", "--m", "4", "--n", "100"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(
        err.contains("approx_error_sq") && err.contains("thm22"),
        "unhelpful error: {err}"
    );
}

#[test]
fn config_file_drives_simulate_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        r#"
[experiment]
design = "mc-uniform"
m = 3
rank = 1
noise = "gaussian"
sigma = 0.05
ns = [200]
epsilon = "auto:0.02"
replications = 2
seed = 11
metrics = ["l2pi", "trace"]
"#,
    )
    .unwrap();
    let out = dir.path().join("cfg-run");
    let status = qtomo()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--reps", "3", "--out"]) // flag overrides the config value
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let rows = std::fs::read_to_string(out.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3, "override to 3 replications");
}

#[test]
fn reruns_are_byte_identical_across_processes_and_directories() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &std::path::Path| {
        let status = qtomo()
            .args([
                "sweep", "--axis", "n", "--design", "pauli", "--m", "4", "--rank", "1",
                "--sigma", "0.1", "--n", "200,400,800,1600", "--reps", "6",
                "--epsilon", "auto:0.01", "--seed", "314", "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    run(&dir.path().join("a"));
    run(&dir.path().join("b"));
    let strip_wall = |path: std::path::PathBuf| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    assert_eq!(
        strip_wall(dir.path().join("a/rows.csv")),
        strip_wall(dir.path().join("b/rows.csv"))
    );
    for file in ["plot.csv", "slope.csv", "bounds.csv"] {
        assert_eq!(
            std::fs::read_to_string(dir.path().join("a").join(file)).unwrap(),
            std::fs::read_to_string(dir.path().join("b").join(file)).unwrap(),
            "{file} differs between reruns"
        );
    }
}

#[test]
fn dataset_sidecar_documents_the_run(){
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    qtomo()
        .args([
            "simulate", "--design", "gauss", "--m", "3", "--rank", "1", "--sigma", "0.2",
            "--n", "50", "--reps", "1", "--epsilon", "0.01", "--seed", "9", "--save-data", "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("dataset.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["design_kind"], "gauss");
    assert_eq!(meta["m"], 3);
    assert_eq!(meta["n"], 50);
    assert_eq!(meta["noise_kind"], "gaussian");
    // Dense draws serialize as content hashes and reload by replay.
    let data = qtomo_cli::csvio::load_dataset(Path::new(&out.join("dataset.csv"))).unwrap();
    assert_eq!(data.len(), 50);
}
