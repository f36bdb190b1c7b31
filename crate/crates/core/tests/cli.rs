//! End-to-end checks of the `rhoscope` binary: exit codes, machine-readable
//! errors, output files and run-to-run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rhoscope"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const COHERENT: &str = r#"{
    "version": 1,
    "signal": {"kind": "coherent", "mean": 0.5},
    "reference": {"alpha_sq": 0.5},
    "bs1": {"t_over_r_sq": 1.0},
    "cutoff": 12,
    "n_max": 3
}"#;

#[test]
fn element_exact_prints_known_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", COHERENT);
    let output = binary()
        .args(["element", "--config"])
        .arg(&config)
        .args(["--n", "0", "--lambda", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("element <1|rho|0>"), "{text}");
    assert!(text.contains("0.42888"), "{text}");
    assert!(text.contains("conditioning"), "{text}");
    assert!(text.contains("P_0"), "{text}");
}

#[test]
fn vacuum_offdiagonal_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        &COHERENT.replace(
            r#"{"kind": "coherent", "mean": 0.5}"#,
            r#"{"kind": "fock", "n": 0}"#,
        ),
    );
    let output = binary()
        .args(["element", "--config"])
        .arg(&config)
        .args(["--n", "0", "--lambda", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(stdout(&output).contains("0.0000000000 + 0.0000000000i"));
}

#[test]
fn invalid_config_exits_2_with_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", r#"{"version": 1, "bogus": true}"#);
    let output = binary()
        .args(["element", "--config"])
        .arg(&config)
        .args(["--n", "0", "--lambda", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    let first_line = err.lines().next().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(first_line).unwrap();
    assert_eq!(parsed["error"]["class"], "validation");
}

#[test]
fn unmeasurable_element_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
            "version": 1,
            "signal": {"kind": "coherent", "mean": 0.5},
            "reference": {"alpha_sq": 0.5, "model": {"phase-diffused": {"sigma": 1e9}}},
            "cutoff": 10,
            "n_max": 2
        }"#,
    );
    let output = binary()
        .args(["element", "--config"])
        .arg(&config)
        .args(["--n", "0", "--lambda", "2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr(&output).contains("unmeasurable-element"));
}

#[test]
fn matrix_random_state_writes_valid_hermitian_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        r#"{
            "version": 1,
            "signal": {"kind": "random", "seed": 4},
            "reference": {"alpha_sq": 1.0},
            "cutoff": 10,
            "n_max": 3
        }"#,
    );
    let output = binary()
        .args(["matrix", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    // The emitted JSON passes density-matrix schema validation (Hermitian,
    // PSD, trace within the tail budget).
    let text = std::fs::read_to_string(dir.path().join("matrix.json")).unwrap();
    let rho = rhoscope::fock::DensityMatrix::from_json(&text).unwrap();
    assert_eq!(rho.cutoff(), 3);
    let csv = std::fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    let rho_csv = rhoscope::fock::DensityMatrix::from_csv(&csv).unwrap();
    assert!((rho.entry(1, 2) - rho_csv.entry(1, 2)).norm() < 1e-15);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["mode_used"], "exact");
    assert_eq!(report["failures"], 0);
    assert!(report["elements"].as_array().unwrap().len() == 10);
}

#[test]
fn sampled_element_is_deterministic_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "c.json",
        &COHERENT.replace(
            "\"n_max\": 3",
            "\"n_max\": 3, \"mode\": {\"sampled\": {\"shots\": 50000, \"seed\": 21}}",
        ),
    );
    let run = || {
        let output = binary()
            .args(["element", "--config"])
            .arg(&config)
            .args(["--n", "0", "--lambda", "1"])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0));
        stdout(&output)
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    assert!(first.contains("std error"));

    // A different seed gives a different estimate.
    let output = binary()
        .args(["element", "--config"])
        .arg(&config)
        .args(["--n", "0", "--lambda", "1", "--seed", "22"])
        .output()
        .unwrap();
    assert_ne!(stdout(&output), first);
}

#[test]
fn tables_flags_golden_digit_breach_and_prints_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["tables", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    // The ideal golden digits are internally inconsistent with the exact
    // coherent matrix; the command reports that and exits 4.
    assert_eq!(output.status.code(), Some(4));
    let text = stdout(&output);
    assert!(text.contains("pipeline exact"), "{text}");
    assert!(text.contains("BREACH (0,4)"), "{text}");
    assert!(text.contains("vacuum diagonal inflated: true"), "{text}");
    assert!(text.contains("off-diagonals deflated: true"), "{text}");
    for name in ["table_ideal.json", "table_lossy.json", "tables_report.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    // The lossy table must stay inside its own tolerance.
    assert!(!text.contains("BREACH (0,0)"), "{text}");
}

#[test]
fn tables_eta_one_override_reproduces_ideal_pipeline() {
    let output = binary().args(["tables", "--eta", "1.0"]).output().unwrap();
    let text = stdout(&output);
    assert!(
        text.contains("lossy pipeline vs ideal pipeline, max |diff| = 0.000e0"),
        "{text}"
    );
}

#[test]
fn sample_exports_counts_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", COHERENT);
    let output = binary()
        .args(["sample", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .args(["--shots", "10000", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    assert!(text.starts_with("n_a,n_b,n_c,count"));
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 10000);
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", COHERENT);
    let output = binary()
        .args(["oracle-check", "--config"])
        .arg(&config)
        .args(["--lambda-max", "3", "--n-limit", "3"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("PASS"), "{text}");
    assert!(text.contains("completeness residual"), "{text}");
}

#[test]
fn eta_override_switches_matrix_to_lossy_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "c.json", COHERENT);
    let output = binary()
        .args(["matrix", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .args(["--mode", "smeared", "--eta-a", "0.9", "--eta-b", "0.9", "--eta-c", "0.9"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let text = std::fs::read_to_string(dir.path().join("matrix.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    let vacuum = parsed["re"][0][0].as_f64().unwrap();
    // Loss inflates the apparent vacuum weight above exp(-1/2).
    assert!(vacuum > 0.65, "vacuum {vacuum}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["efficiencies"][0], 0.9);
    assert_eq!(report["config"]["efficiency"]["a"], 0.9);
}
