#![allow(dead_code)]

use restoration_core::backend::{Solution, Status};
use restoration_core::ccg::recourse_lp;
use restoration_core::*;

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub fn fixture(name: &str) -> Instance {
    Instance::from_json(&fixture_text(name)).unwrap()
}

pub fn doc(name: &str) -> serde_json::Value {
    serde_json::from_str(&fixture_text(name)).unwrap()
}

pub fn load(value: &serde_json::Value) -> Instance {
    Instance::from_json(&value.to_string()).unwrap()
}

pub fn solve(inst: &Instance) -> (CompactModel, SolveReport) {
    let cm = assemble_compact(inst).unwrap();
    let report = ccg_solve(inst, &cm, &CcgParams::default(), &HighsBackend).unwrap();
    (cm, report)
}

/// Optimal recourse of a fixed schedule at `sigma`, as a primal solution.
pub fn recourse(cm: &CompactModel, x: &[f64], sigma: &[f64]) -> Solution {
    let sol = HighsBackend.solve(&recourse_lp(cm, x, sigma), &SolveParams::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    sol
}

/// Value of a second-stage model variable by name in a recourse solution.
pub fn second_value(cm: &CompactModel, sol: &Solution, name: &str) -> f64 {
    let v = cm.builder.find_var(name).unwrap_or_else(|| panic!("no variable {name}"));
    let j = cm.y.iter().position(|&y| y == v).unwrap_or_else(|| panic!("{name} is not second-stage"));
    sol.primal[j]
}

pub fn first_step(timeline: &[u8]) -> Option<usize> {
    timeline.iter().position(|&b| b == 1).map(|i| i + 1)
}
