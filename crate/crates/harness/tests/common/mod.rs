#![allow(dead_code)]

use restoration_core::*;
use restoration_harness::cli::solve_instance;
use restoration_harness::report::ScheduleReport;

pub fn fixture_path(name: &str) -> String {
    format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn doc(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture_path(name)).unwrap()).unwrap()
}

pub fn load(value: &serde_json::Value) -> Instance {
    Instance::from_json(&value.to_string()).unwrap()
}

pub fn fixture(name: &str) -> Instance {
    load(&doc(name))
}

pub fn solve(inst: &Instance) -> ScheduleReport {
    solve_instance(inst, &CcgParams::default(), &HighsBackend).unwrap()
}

pub fn line_switch(inst: &Instance, id: &str) -> usize {
    inst.switches.iter().position(|&l| inst.network.lines[l].id == id).unwrap()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
