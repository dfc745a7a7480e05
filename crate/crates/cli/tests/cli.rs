//! End-to-end tests of the command-line interface: exit codes, report
//! shapes and flag conflict handling.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drsd"))
}

fn instance(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../instances")
        .join(name);
    p.to_string_lossy().into_owned()
}

#[test]
fn solve_reports_objective_near_optimum() {
    let out = bin()
        .args([
            "solve",
            "--instance",
            &instance("t1.json"),
            "--method",
            "drsd",
            "--ambiguity",
            "moment",
            "--q",
            "1",
            "--seed",
            "0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("objective:"), "{stdout}");
    let value: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("objective: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (1.98..=2.02).contains(&value),
        "objective {value} outside [1.98, 2.02]"
    );
}

#[test]
fn validate_accepts_bundled_instances() {
    for name in ["t1.json", "t2.json", "t3.json", "t4.json", "syn1000.json"] {
        let out = bin()
            .args(["validate", "--instance", &instance(name)])
            .output()
            .unwrap();
        assert!(out.status.success(), "{name} failed validation");
        assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));
    }
}

#[test]
fn validate_rejects_broken_file_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  broken\n}").unwrap();
    let out = bin()
        .args(["validate", "--instance", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn validate_rejects_semantic_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("badprob.json");
    std::fs::write(
        &path,
        r#"{
        "name": "bad",
        "first_stage": {"c": [1.0], "ub": [5.0]},
        "second_stage": {"g": [1.0, 0.0], "W": [[1.0, -1.0]], "r": [0.0], "T": [[1.0]]},
        "random": [{"target": "rhs", "row": 0, "coord": 0}],
        "distribution": {"type": "scenarios", "omegas": [[0.0], [2.0]], "probs": [0.5, 0.4]}
    }"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--instance", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("probability-sum"));
}

#[test]
fn replicate_writes_expected_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("r.csv");
    let out = bin()
        .args([
            "replicate",
            "--instance",
            &instance("t1.json"),
            "--method",
            "drls",
            "--N",
            "100",
            "--reps",
            "30",
            "--seed",
            "1",
            "--no-timing",
            "--out",
            csv_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    // header + 30 replications + mean + hw95
    assert_eq!(lines.len(), 33);
    assert!(lines[0].starts_with("rep,seed,method,"));
    assert!(lines[31].starts_with("mean,"));
    assert!(lines[32].starts_with("hw95,"));
}

#[test]
fn conflicting_flags_are_usage_errors() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--instance", "x.json", "--ambiguity", "wasserstein", "--q", "1"],
        vec!["solve", "--instance", "x.json", "--ambiguity", "moment", "--eps", "0.5"],
        vec!["solve", "--instance", "x.json", "--method", "drsd", "--N", "10"],
        vec!["solve", "--instance", "x.json", "--method", "drls", "--kmin", "5"],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "args {args:?} should be rejected");
    }
    // unknown flags are rejected by the parser
    let out = bin()
        .args(["solve", "--instance", "x.json", "--frobnicate"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_instance_is_a_usage_error() {
    let out = bin()
        .args(["solve", "--instance", "/nonexistent/xyz.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn recourse_violation_is_a_solve_failure() {
    // y = w - x with y >= 0 and a cheap first stage: the method pushes x
    // past the smallest scenario and hits an infeasible subproblem, which
    // must surface as exit code 1 with the recourse diagnostic
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noncomplete.json");
    std::fs::write(
        &path,
        r#"{
        "name": "noncomplete",
        "first_stage": {"c": [0.1], "ub": [10.0]},
        "second_stage": {"g": [1.0], "W": [[1.0]], "r": [0.0], "T": [[1.0]]},
        "random": [{"target": "rhs", "row": 0, "coord": 0}],
        "distribution": {"type": "scenarios", "omegas": [[1.0], [2.0]], "probs": [0.5, 0.5]}
    }"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "solve",
            "--instance",
            path.to_str().unwrap(),
            "--method",
            "drls",
            "--N",
            "20",
            "--seed",
            "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("relatively complete recourse"),
        "stderr: {stderr}"
    );
}

#[test]
fn benchmark_prints_comparison_rows() {
    let out = bin()
        .args([
            "benchmark",
            "--instance",
            &instance("t2.json"),
            "--q",
            "1",
            "--reps",
            "3",
            "--kmin",
            "16",
            "--kmax",
            "64",
            "--N",
            "50",
            "--seed",
            "4",
            "--no-timing",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("drsd |"), "{stdout}");
    assert!(stdout.contains("drls-50 |"), "{stdout}");
}
