mod common;

use std::path::Path;

use common::*;
use restoration_harness::cli::{run, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE};
use restoration_harness::report::ScheduleReport;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn restore(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("restore").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn printed_objective(out: &str) -> f64 {
    let tail = out.split("objective ").nth(1).expect("objective printed");
    tail.split_whitespace().next().unwrap().parse().unwrap()
}

fn report_in(dir: &Path) -> ScheduleReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_prints_usage_and_exits_2() {
    let r = restore(&["frobnicate"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.err.contains("Usage"), "{}", r.err);
}

#[test]
fn help_exits_0() {
    let r = restore(&["--help"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("solve"));
}

#[test]
fn missing_instance_and_bad_flags_are_usage_errors() {
    assert_eq!(restore(&["solve", "/nonexistent/instance.json"]).code, EXIT_USAGE);
    let desk = fixture_path("desk");
    assert_eq!(restore(&["--backend", "cplex", "solve", &desk]).code, EXIT_USAGE);
    assert_eq!(restore(&["--tol", "0", "solve", &desk]).code, EXIT_USAGE);
    assert_eq!(restore(&["--max-iter", "0", "solve", &desk]).code, EXIT_USAGE);
    assert_eq!(restore(&["--tol", "abc", "solve", &desk]).code, EXIT_USAGE);
}

#[test]
fn malformed_instance_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = doc("desk");
    d["network"]["lines"][0]["to"] = serde_json::json!("nowhere");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, d.to_string()).unwrap();
    let r = restore(&["solve", path.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.err.contains("nowhere"), "{}", r.err);
}

#[test]
fn solve_writes_every_artifact_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let desk = fixture_path("desk");
    let r = restore(&["--tol", "0.001", "--out", out, "solve", &desk]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    for f in ["report.json", "trace.jsonl", "series.csv", "decision.json", "worst-scenario.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let report = report_in(dir.path());
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), report.trace.len());

    let worst = dir.path().join("worst-scenario.json");
    let v = restore(&["validate", &desk, dir.path().join("report.json").to_str().unwrap(), worst.to_str().unwrap()]);
    assert_eq!(v.code, EXIT_OK, "{}", v.out);
    assert!(v.out.contains("feasible"));
    assert!(relative_gap(printed_objective(&v.out), report.objective) <= 1e-6);
}

#[test]
fn validate_at_sigma_zero_matches_a_deterministic_solve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let spot = fixture_path("spot");
    assert_eq!(restore(&["--out", out, "solve", &spot]).code, EXIT_OK);
    let report = report_in(dir.path());
    let decision = dir.path().join("decision.json");
    let v = restore(&["validate", &spot, decision.to_str().unwrap(), "sigma-zero"]);
    assert_eq!(v.code, EXIT_OK);
    assert!(relative_gap(printed_objective(&v.out), report.objective) <= 1e-6);
}

#[test]
fn validate_flags_an_edited_decision() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let desk = fixture_path("desk");
    assert_eq!(restore(&["--out", out, "solve", &desk]).code, EXIT_OK);
    let mut report = report_in(dir.path());
    report.decision.repair_routes[0].clear();
    let edited = dir.path().join("edited.json");
    std::fs::write(&edited, serde_json::to_string(&report.decision).unwrap()).unwrap();
    let v = restore(&["validate", &desk, edited.to_str().unwrap(), "zero"]);
    assert_eq!(v.code, EXIT_INFEASIBLE);
    assert!(v.out.contains("[coverage]"));
}

#[test]
fn iteration_cap_exits_1_with_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = restore(&["--max-iter", "1", "--out", out, "solve", &fixture_path("res-budget")]);
    assert_eq!(r.code, EXIT_INFEASIBLE);
    assert!(r.out.contains("not converged"));
    assert!(!report_in(dir.path()).converged);
}

#[test]
fn oracle_refuses_instances_beyond_its_caps() {
    let r = restore(&["enumerate-oracle", &fixture_path("res-budget")]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.err.contains("oracle refused"));
}

#[test]
fn oracle_agrees_with_solve_on_the_desk_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let desk = fixture_path("desk");
    let o = restore(&["--out", out, "enumerate-oracle", &desk]);
    assert_eq!(o.code, EXIT_OK, "{}", o.err);
    assert!(dir.path().join("oracle.json").is_file());
    let s = restore(&["solve", &desk]);
    assert!(relative_gap(printed_objective(&o.out), printed_objective(&s.out)) <= 1e-3);
}

#[test]
fn export_model_writes_lp_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = restore(&["--out", out, "export-model", &fixture_path("desk")]);
    assert_eq!(r.code, EXIT_OK);
    let lp = std::fs::read_to_string(dir.path().join("model.lp")).unwrap();
    assert!(lp.contains("Minimize") || lp.contains("minimize"));
    assert!(r.out.contains("variables"));
    let inline = restore(&["export-model", &fixture_path("desk")]);
    assert_eq!(inline.out, lp);
}

#[test]
fn report_renders_series_from_a_saved_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(restore(&["--out", out, "solve", &fixture_path("desk")]).code, EXIT_OK);
    let saved = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let r = restore(&["report", dir.path().join("report.json").to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.ends_with(&saved));
    assert!(r.out.starts_with("converged"));
}

#[test]
fn garbage_report_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    std::fs::write(&path, "{\"converged\": true}").unwrap();
    assert_eq!(restore(&["report", path.to_str().unwrap()]).code, EXIT_USAGE);
}

#[test]
fn failed_solve_leaves_no_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let r = restore(&["--out", out.to_str().unwrap(), "solve", "/nonexistent.json"]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(!out.exists());
}

