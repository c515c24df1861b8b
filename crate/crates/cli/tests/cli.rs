//! End-to-end tests of the `closure-lab` binary: exit codes, artifact
//! layout, listing stability and byte-level determinism of reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_closure-lab"))
}

fn run_config(dir: &Path, name: &str, body: &str) -> Output {
    let conf = dir.join(name);
    fs::write(&conf, body).unwrap();
    bin().arg("run").arg(&conf).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn list_is_stable_and_covers_all_kinds() {
    let a = bin().arg("list").output().unwrap();
    let b = bin().arg("list").output().unwrap();
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for kind in ["tower", "renorm", "grade", "flow-compare", "measure", "oe-check"] {
        assert!(text.contains(&format!("{kind} — ")), "missing kind {kind}");
    }
    // every key appears with its default or a required marker
    for key in ["tower.depth = 6", "renorm.lambda = 0.5", "renorm.epsilon   (required)"] {
        assert!(text.contains(key), "missing listing line {key}");
    }
}

#[test]
fn commuting_tower_reports_level_one_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run_config(
        dir.path(),
        "tower.cfg",
        &format!(
            "run.kind = tower\nrun.out = {}\n\
             tower.angle1 = 1.2566370614359172\ntower.axis1 = 0,0,1\n\
             tower.angle2 = 1.0\ntower.axis2 = 0,0,1\n\
             tower.depth = 3\ntower.mode = exhaustive\ntower.cap = 1000\n",
            out.display()
        ),
    );
    assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"verdict\":\"pseudo_solvable_at_level 1\""));
    assert!(out.join("data/levels.csv").is_file());
    assert!(out.join("plots/displacement.svg").is_file());
}

#[test]
fn renorm_epsilon_1e6_crosses_at_k_17() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run_config(
        dir.path(),
        "renorm.cfg",
        &format!("run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1e-6\n", out.display()),
    );
    assert_eq!(code(&result), 0);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"k\":17"), "{report}");
    assert!(report.contains("\"case\":"));
    // the conjugate ladder has one row per k plus a header
    let csv = fs::read_to_string(out.join("data/conjugates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 19);
}

#[test]
fn negative_grid_is_rejected_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run_config(
        dir.path(),
        "bad.cfg",
        &format!(
            "run.kind = flow-compare\nrun.out = {}\nflow-compare.grid_per_axis = -3\n",
            out.display()
        ),
    );
    assert_eq!(code(&result), 2);
    assert!(!out.exists(), "validation failure must not write artifacts");
}

#[test]
fn unknown_keys_and_missing_seed_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = run_config(
        dir.path(),
        "unknown.cfg",
        &format!("run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1\nrenorm.typo = 2\n", out.display()),
    );
    assert_eq!(code(&unknown), 2);
    let stderr = String::from_utf8_lossy(&unknown.stderr);
    assert!(stderr.contains("renorm.typo"), "{stderr}");

    let unseeded = run_config(
        dir.path(),
        "unseeded.cfg",
        &format!("run.kind = measure\nrun.out = {}\n", out.display()),
    );
    assert_eq!(code(&unseeded), 2);
    assert!(String::from_utf8_lossy(&unseeded.stderr).contains("run.seed"));
    assert!(!out.exists());
}

#[test]
fn unreached_threshold_is_a_numerical_failure_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run_config(
        dir.path(),
        "stuck.cfg",
        &format!(
            "run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1e-6\nrenorm.k_max = 3\n",
            out.display()
        ),
    );
    assert_eq!(code(&result), 3);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"status\":\"error\""));
    assert!(report.contains("threshold not crossed"), "{report}");
}

#[test]
fn same_config_and_seed_give_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let body = |out: &Path| {
        format!(
            "run.kind = measure\nrun.seed = 31\nrun.out = {}\n\
             measure.samples = 20000\nmeasure.group_size = 10\nmeasure.probes = 6\n",
            out.display()
        )
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_eq!(code(&run_config(dir.path(), "a.cfg", &body(&out_a))), 0);
    assert_eq!(code(&run_config(dir.path(), "b.cfg", &body(&out_b))), 0);
    let a = fs::read(out_a.join("report.json")).unwrap();
    let b = fs::read(out_b.join("report.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("m.cfg");
    let out = dir.path().join("out");
    fs::write(
        &conf,
        format!(
            "run.kind = measure\nrun.seed = 77\nrun.out = {}\n\
             measure.samples = 20000\nmeasure.group_size = 10\nmeasure.probes = 6\n",
            out.display()
        ),
    )
    .unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "8"] {
        let result = bin()
            .arg("run")
            .arg(&conf)
            .env("CLOSURE_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&result), 0, "{}", String::from_utf8_lossy(&result.stderr));
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn bad_threads_env_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("r.cfg");
    let out = dir.path().join("out");
    fs::write(
        &conf,
        format!("run.kind = renorm\nrun.out = {}\nrenorm.epsilon = 1e-4\n", out.display()),
    )
    .unwrap();
    let result = bin()
        .arg("run")
        .arg(&conf)
        .env("CLOSURE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&result), 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("CLOSURE_LAB_THREADS"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_with_code_2() {
    let none = bin().output().unwrap();
    assert_eq!(code(&none), 2);
    let unknown = bin().arg("frobnicate").output().unwrap();
    assert_eq!(code(&unknown), 2);
}

#[test]
fn oe_check_with_forced_unit_sigma_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = run_config(
        dir.path(),
        "oe.cfg",
        &format!(
            "run.kind = oe-check\nrun.out = {}\noe-check.force_sigma = 1\n",
            out.display()
        ),
    );
    assert_eq!(code(&result), 0);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    // fitted sigma is still 2; the forced flow comparison is off by
    // |H(x+t) - (Hx+t)| = t, with the largest configured t = 0.5
    // (up to Euler-step rounding accumulation)
    assert!(report.contains("\"forced_sigma\":1.0000000000000000e0"));
    let residual: f64 = report
        .split("\"residual\":")
        .nth(2)
        .and_then(|tail| tail.split(',').next())
        .and_then(|num| num.parse().ok())
        .unwrap();
    assert!((residual - 0.5).abs() < 1e-9, "residual {residual}");
    assert!(report.contains("\"sigma\":2.0000000000000000e0"));
}
