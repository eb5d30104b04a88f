//! End-to-end tests of the `fraclin` binary: golden output bytes, exit
//! codes, and flag/environment precedence.

use std::path::PathBuf;
use std::process::{Command, Output};

fn worked_file() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems/nilpotent.toml")
}

/// FRAC_TOL is stripped so ambient environments cannot skew golden runs.
fn fraclin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fraclin"))
        .env_remove("FRAC_TOL")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

const GOLDEN_CSV: &str = "t,x1,x2\n\
    0.250000000,0.689189584,1.12837917\n\
    0.500000000,1.04788456,0.797884561\n\
    0.750000000,1.35220502,0.651470016\n\
    1.00000000,1.62837917,0.564189584\n";

#[test]
fn solve_reproduces_the_golden_csv_bytes() {
    let file = worked_file();
    let first = fraclin(&["solve", file.to_str().unwrap(), "--samples", "4"]);
    assert!(first.status.success(), "{}", stderr_of(&first));
    assert_eq!(stdout_of(&first), GOLDEN_CSV);

    let second = fraclin(&["solve", file.to_str().unwrap(), "--samples", "4"]);
    assert_eq!(first.stdout, second.stdout, "output must be byte-deterministic");
}

#[test]
fn solve_writes_the_same_bytes_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("trajectory.csv");
    let res = fraclin(&[
        "solve",
        worked_file().to_str().unwrap(),
        "--samples",
        "4",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    assert_eq!(stdout_of(&res), "", "CSV goes to the file, not stdout");
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), GOLDEN_CSV);
}

#[test]
fn closed_form_lists_the_worked_solution_terms() {
    let res = fraclin(&[
        "solve",
        worked_file().to_str().unwrap(),
        "--samples",
        "1",
        "--closed-form",
    ]);
    assert!(res.status.success());
    let text = stdout_of(&res);
    assert!(text.contains(
        "x1(t) = 1.12837917 · (t - 0)^0.500000000 + 0.500000000 · (t - 0)^1.00000000\n"
    ), "{text}");
    assert!(text.contains("x2(t) = 0.564189584 · (t - 0)^-0.500000000\n"), "{text}");
}

#[test]
fn include_origin_emits_the_regular_factor_row() {
    let res = fraclin(&[
        "solve",
        worked_file().to_str().unwrap(),
        "--samples",
        "1",
        "--include-origin",
    ]);
    assert!(res.status.success());
    let text = stdout_of(&res);
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with('#') && comment.contains("p = -0.500000000"), "{comment}");
    assert_eq!(lines.next().unwrap(), "t,x1,x2");
    // x(t) ~ (0, 1/Γ(0.5))·t^{-1/2} near the origin.
    assert_eq!(lines.next().unwrap(), "0.00000000,0.00000000,0.564189584");
}

#[test]
fn grid_lane_matches_the_exact_solution() {
    let res = fraclin(&[
        "solve",
        worked_file().to_str().unwrap(),
        "--samples",
        "4",
        "--grid",
        "64",
    ]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let text = stdout_of(&res);
    let golden: Vec<&str> = GOLDEN_CSV.lines().collect();
    let got: Vec<&str> = text.lines().collect();
    assert_eq!(got.len(), golden.len());
    for (g, w) in got.iter().zip(&golden).skip(1) {
        let gv: Vec<f64> = g.split(',').map(|s| s.parse().unwrap()).collect();
        let wv: Vec<f64> = w.split(',').map(|s| s.parse().unwrap()).collect();
        for (a, b) in gv.iter().zip(&wv) {
            assert!((a - b).abs() < 1e-6, "grid row {g} vs exact {w}");
        }
    }
}

#[test]
fn phi_prints_the_worked_transition_matrix() {
    let res = fraclin(&["phi", worked_file().to_str().unwrap(), "--t", "1"]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let text = stdout_of(&res);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "phi(1, 0) =");
    assert_eq!(lines[1], "0.564189584,0.500000000");
    assert_eq!(lines[2], "0.00000000,0.564189584");
    assert_eq!(lines[3], "terms_used: 2");
    assert!(lines[4].starts_with("tail_estimate: 0.000e0"), "{}", lines[4]);
}

#[test]
fn ml_matches_its_spot_values() {
    let res = fraclin(&["ml", "1", "1", "1"]);
    assert!(res.status.success());
    assert!(stdout_of(&res).starts_with("E_(1,1)(1) = 2.71828183\n"), "{}", stdout_of(&res));

    let res = fraclin(&["ml", "0.5", "0.5", "0"]);
    assert!(res.status.success());
    assert!(stdout_of(&res).starts_with("E_(0.5,0.5)(0) = 0.564189584\n"));
}

#[test]
fn validate_quick_passes_and_reports_each_check() {
    let res = fraclin(&["validate"]);
    assert!(res.status.success(), "{}", stdout_of(&res));
    let text = stdout_of(&res);
    assert!(text.contains("integral power rule (exact lane)"));
    assert!(text.contains(" 0 failed"));
}

#[test]
fn corrupted_gamma_reference_fails_validation_with_code_3() {
    let res = fraclin(&["validate", "--corrupt-gamma"]);
    assert_eq!(res.status.code(), Some(3));
    let text = stdout_of(&res);
    assert!(text.contains("FAIL"), "{text}");
    assert!(text.contains("deliberately skewed"));
}

#[test]
fn malformed_file_exits_1_with_line_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "alpha = 0.5\nt0 = zero\n").unwrap();
    let res = fraclin(&["solve", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr_of(&res).contains("line 2"), "{}", stderr_of(&res));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    std::fs::write(
        &path,
        "alpha = 0.5\nt0 = 0.0\nhorzon = 1.0\nx0 = [1.0]\nA = []\n",
    )
    .unwrap();
    let res = fraclin(&["solve", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr_of(&res).contains("horzon"), "{}", stderr_of(&res));
}

#[test]
fn non_convergence_exits_2_with_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("strong.toml");
    std::fs::write(
        &path,
        "alpha = 0.9\nt0 = 0.0\nhorizon = 4.0\nx0 = [1.0, 0.0]\n\n[[A]]\npower = 0\nentries = [0.0, 20.0, 20.0, 0.0]\n",
    )
    .unwrap();
    let res = fraclin(&["solve", path.to_str().unwrap(), "--samples", "2"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr_of(&res).contains("diverging"), "{}", stderr_of(&res));
}

#[test]
fn zero_initial_state_without_forcing_gives_zero_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.toml");
    std::fs::write(
        &path,
        "alpha = 0.5\nt0 = 0.0\nhorizon = 1.0\nx0 = [0.0, 0.0]\n\n[[A]]\npower = 1\nentries = [0.0, 1.0, 0.0, 0.0]\n",
    )
    .unwrap();
    let res = fraclin(&["solve", path.to_str().unwrap(), "--samples", "2"]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    assert_eq!(
        stdout_of(&res),
        "t,x1,x2\n0.500000000,0.00000000,0.00000000\n1.00000000,0.00000000,0.00000000\n"
    );
}

#[test]
fn frac_tol_env_is_used_and_the_flag_wins() {
    let run_ml = |env_tol: Option<&str>, flag_tol: Option<&str>| -> usize {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fraclin"));
        cmd.env_remove("FRAC_TOL");
        if let Some(v) = env_tol {
            cmd.env("FRAC_TOL", v);
        }
        if let Some(v) = flag_tol {
            cmd.args(["--tol", v]);
        }
        let out = cmd.args(["ml", "1", "1", "1"]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let line = text.lines().find(|l| l.starts_with("terms_used:")).unwrap();
        line.split(": ").nth(1).unwrap().parse().unwrap()
    };
    let default_terms = run_ml(None, None);
    let loose_env = run_ml(Some("1e-2"), None);
    let loose_flag_tight_env = run_ml(Some("1e-13"), Some("1e-2"));
    assert!(loose_env < default_terms, "loose env tolerance must stop earlier");
    assert_eq!(loose_flag_tight_env, loose_env, "flag must override the environment");
}

#[test]
fn invalid_frac_tol_is_a_loud_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_fraclin"))
        .env("FRAC_TOL", "oops")
        .args(["ml", "1", "1", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("FRAC_TOL"));
}

#[test]
fn help_and_version_exit_zero() {
    assert!(fraclin(&["--help"]).status.success());
    assert!(fraclin(&["--version"]).status.success());
}
