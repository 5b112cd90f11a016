//! End-to-end tests of the `gibbs` binary: exit codes, determinism, and the
//! artifact layout of every subcommand.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gibbs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gibbs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn same_seed_gives_byte_identical_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = gibbs(
            tmp.path(),
            &["simulate", "--preset", "surrogate-waveguide", "--seed", "5", "--out", run],
        );
        assert_exit(&out, 0);
    }
    let a = fs::read(tmp.path().join("a/dataset.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/dataset.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn zero_noise_rows_match_the_clean_forward() {
    let tmp = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "experiment": "zero-noise-toy",
        "problem": {
            "kind": "toy-fredholm",
            "n": 3,
            "eval_points": 10,
            "source_points": 50,
            "pieces": 2,
            "truth_coefficients": [4.0, 4.0],
            "truth_cutpoints": [0.5],
            "noise": { "kind": "multiplicative-lognormal-blockwise", "sigma": 1.0, "seed": 0 }
        },
        "losses": ["l1"],
        "seed": 9,
        "out": "zn"
    });
    fs::write(tmp.path().join("config.json"), config.to_string()).unwrap();
    let out = gibbs(
        tmp.path(),
        &["simulate", "--config", "config.json", "--zero-noise"],
    );
    assert_exit(&out, 0);
    let text = fs::read_to_string(tmp.path().join("zn/dataset.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| *r == rows[0]), "{rows:?}");
}

#[test]
fn calibrate_is_deterministic_and_writes_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = gibbs(
            tmp.path(),
            &["calibrate", "--preset", "conjugate", "--particles", "200", "--out", run],
        );
        assert_exit(&out, 0);
    }
    for file in ["calibration.csv", "calibration.json", "checkpoints/w_00.json", "checkpoints/w_09.json"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // echoed config must parse back and carry the overridden particle count
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/effective-config.json")).unwrap())
            .unwrap();
    assert_eq!(echoed["particles"], 200);
}

#[test]
fn sample_without_calibration_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbs(
        tmp.path(),
        &["sample", "--preset", "conjugate", "--out", "fresh"],
    );
    assert_exit(&out, 3);
}

#[test]
fn tampered_dataset_fails_the_provenance_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbs(
        tmp.path(),
        &["calibrate", "--preset", "conjugate", "--particles", "200", "--out", "run"],
    );
    assert_exit(&out, 0);
    let path = tmp.path().join("run/dataset.csv");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace('1', "2")).unwrap();
    let out = gibbs(
        tmp.path(),
        &["sample", "--preset", "conjugate", "--particles", "200", "--out", "run"],
    );
    assert_exit(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("provenance"), "{stderr}");
}

#[test]
fn sample_emits_summaries_and_bayes_mode_uses_w_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbs(
        tmp.path(),
        &["calibrate", "--preset", "conjugate", "--particles", "200", "--out", "run"],
    );
    assert_exit(&out, 0);
    let out = gibbs(
        tmp.path(),
        &["sample", "--preset", "conjugate", "--particles", "200", "--plots", "--out", "run"],
    );
    assert_exit(&out, 0);
    let summary = fs::read_to_string(tmp.path().join("run/summary.csv")).unwrap();
    assert!(summary.starts_with("component,mean,sd,q05,q95"));
    assert!(summary.lines().count() >= 2);
    assert!(tmp.path().join("run/posterior.csv").exists());
    assert!(tmp.path().join("run/marginal_theta.svg").exists());

    let out = gibbs(
        tmp.path(),
        &["sample", "--preset", "conjugate", "--particles", "200", "--bayes", "--out", "run"],
    );
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("W = 1"), "{stdout}");
}

#[test]
fn duplicate_losses_tie_in_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "experiment": "dup",
        "problem": { "kind": "conjugate", "values": [1.0] },
        "losses": ["squared_l2", "squared_l2"],
        "loss_scale": 1.0,
        "particles": 200,
        "seed": 4,
        "out": "dup"
    });
    fs::write(tmp.path().join("config.json"), config.to_string()).unwrap();
    let out = gibbs(tmp.path(), &["select", "--config", "config.json"]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("overlap"), "{stdout}");
    let csv = fs::read_to_string(tmp.path().join("dup/predictive.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1], "duplicate candidates must report identical P_CV");
}

#[test]
fn select_needs_at_least_two_losses() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbs(
        tmp.path(),
        &["select", "--preset", "conjugate", "--out", "run"],
    );
    assert_exit(&out, 2);
}

#[test]
fn verify_stability_passes_and_includes_the_zero_row() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gibbs(tmp.path(), &["verify", "stability", "--out", "v"]);
    assert_exit(&out, 0);
    let csv = fs::read_to_string(tmp.path().join("v/stability.csv")).unwrap();
    let zero_row = csv
        .lines()
        .find(|l| l.starts_with("0,"))
        .expect("zero-delta row present");
    let fields: Vec<f64> = zero_row.split(',').map(|v| v.parse().unwrap()).collect();
    assert!(fields[1..].iter().all(|v| v.abs() < 1e-10), "{zero_row}");
}

#[test]
fn config_errors_use_exit_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    assert_exit(&gibbs(tmp.path(), &["verify", "bogus"]), 2);
    assert_exit(&gibbs(tmp.path(), &["calibrate", "--preset", "nope"]), 2);
    assert_exit(&gibbs(tmp.path(), &["calibrate"]), 2);
    fs::write(tmp.path().join("c.json"), "{}").unwrap();
    assert_exit(
        &gibbs(
            tmp.path(),
            &["calibrate", "--preset", "conjugate", "--config", "c.json"],
        ),
        2,
    );
    assert_exit(&gibbs(tmp.path(), &["calibrate", "--config", "c.json"]), 2);
}
