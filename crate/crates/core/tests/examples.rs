mod common;

use common::*;
use restoration_core::ccg::{scenario_vector, solve_master};
use restoration_core::*;
use serde_json::json;

fn first_slot_after(minutes: f64, slot_length: f64, slots: usize) -> Option<usize> {
    (1..=slots).find(|&t| (t as f64 - 1.0) * slot_length >= minutes)
}

fn zero_sigma(inst: &Instance, cm: &CompactModel) -> Vec<f64> {
    scenario_vector(cm, &ScenarioRealization::for_instance(inst))
}

#[test]
fn repair_finishing_at_63_restores_the_line_from_slot_4() {
    // fault site 5 km from the depot at 30 km/h: 10 min travel, 53 min repair
    let inst = load(&json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": [{"id": "n1", "x": 0, "y": 0}, {"id": "n2", "x": 10000, "y": 0, "load": 10}],
            "lines": [{"id": "l12", "from": "n1", "to": "n2", "r": 0.3, "x": 0.3, "p_max": 500, "q_max": 500, "damaged": true}],
            "sources": [
                {"id": "sub", "kind": "substation", "node": "n1", "p_max": 1000, "q_max": 1000},
                {"id": "gt", "kind": "gt", "node": "n1", "p_max": 100, "q_max": 50, "frr": 0.5}
            ]
        },
        "crews": {"speed_kmh": 30, "repair": [{"id": "RC1", "depot": [0, 0], "repair_minutes": {"l12": 53}}]},
        "horizon": {"slot_length": 30, "slots": 6}
    }));
    let (cm, report) = solve(&inst);
    let d = FirstStageDecision::from_solution(&inst, &cm, &report.x);
    let finish = 5.0 / 30.0 * 60.0 + 53.0;
    assert_eq!(finish, 63.0);
    let expected: Vec<u8> = (1..=6).map(|t| u8::from((t as f64 - 1.0) * 30.0 >= finish)).collect();
    assert_eq!(expected, vec![0, 0, 0, 1, 1, 1]);
    assert_eq!(d.fault_repaired[0], expected);
    assert_eq!(d.cell_energizable[0], expected);
}

#[test]
fn manual_switch_closes_in_slot_10_after_clearing_at_232() {
    let inst = fixture("spot");
    let (cm, report) = solve(&inst);
    let d = FirstStageDecision::from_solution(&inst, &cm, &report.x);
    let q = inst.switches.iter().position(|&l| inst.network.lines[l].id == "l23").unwrap();
    // crew arrives well before the adjacent cell clears at 232, then operates for 10 min
    let finish = f64::max(11.0, 232.0) + 10.0;
    assert_eq!(first_step(&d.closed_manually[q]), first_slot_after(finish, 30.0, 12));
    assert_eq!(first_step(&d.closed_manually[q]), Some(10));
}

#[test]
fn remote_close_is_gated_by_clearing_plus_operation_time() {
    let inst = fixture("spot");
    let cm = assemble_compact(&inst).unwrap();
    let q = inst.switches.iter().position(|&l| inst.network.lines[l].id == "l25").unwrap();
    let earliest = first_slot_after(182.0 + 2.0, 30.0, 12).unwrap();
    assert_eq!(earliest, 8);
    let forced = |t: usize| {
        let mut cm = cm.clone();
        let v = cm.builder.find_var(&format!("wRCS[{q},{t}]")).unwrap();
        cm.builder.vars[v.0].lb = 1.0;
        solve_master(&cm, &[], &HighsBackend, &SolveParams::default())
    };
    assert!(matches!(forced(earliest - 1), Err(SolveError::Infeasible(_))));
    assert!(forced(earliest).is_ok());
}

#[test]
fn ups_of_300_minutes_covers_slots_1_to_10() {
    let inst = fixture("spot");
    let (cm, report) = solve(&inst);
    let d = FirstStageDecision::from_solution(&inst, &cm, &report.x);
    let c = inst.cyber.routers.iter().position(|r| r.id == "ftu25").unwrap();
    let expected: Vec<u8> = (1..=12).map(|t| u8::from(t as f64 * 30.0 <= 300.0)).collect();
    assert_eq!(d.ups_alive[c], expected);
    assert_eq!(first_step(&d.ups_alive[c]), Some(1));
    assert_eq!(d.ups_alive[c].iter().filter(|&&b| b == 1).count(), 10);
}

#[test]
fn shedding_100_critical_kw_for_one_slot_costs_50000() {
    let inst = load(&json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": [{"id": "n1", "x": 0, "y": 0, "load": 100, "critical": true}]
        },
        "crews": {"speed_kmh": 30},
        "horizon": {"slot_length": 30, "slots": 1}
    }));
    let expected = 100.0 * 0.5 * 1000.0;
    let (cm, report) = solve(&inst);
    approx::assert_relative_eq!(report.objective, expected);
    let master = solve_master(&cm, &[zero_sigma(&inst, &cm)], &HighsBackend, &SolveParams::default()).unwrap();
    assert!(master.mu >= expected - 1e-6);
    let empty = solve_master(&cm, &[], &HighsBackend, &SolveParams::default()).unwrap();
    assert_eq!(empty.mu, 0.0);
}

#[test]
fn voltage_drop_across_a_loaded_two_bus_line() {
    let pf = 2.0 / 5f64.sqrt(); // q = p / 2
    let inst = load(&json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368, "power_factor": pf,
            "initially_energized": ["n1"],
            "nodes": [{"id": "n1", "x": 0, "y": 0}, {"id": "n2", "x": 500, "y": 0, "load": 100}],
            "lines": [{"id": "l12", "from": "n1", "to": "n2", "r": 0.3, "x": 0.4, "p_max": 500, "q_max": 500}],
            "sources": [{"id": "sub", "kind": "substation", "node": "n1", "p_max": 1000, "q_max": 1000}]
        },
        "crews": {"speed_kmh": 30},
        "horizon": {"slot_length": 30, "slots": 1}
    }));
    let (cm, report) = solve(&inst);
    assert_eq!(report.objective, 0.0);
    let sol = recourse(&cm, &report.x, &zero_sigma(&inst, &cm));
    approx::assert_relative_eq!(second_value(&cm, &sol, "PL[0,1]"), 100.0, epsilon = 1e-6);
    approx::assert_relative_eq!(second_value(&cm, &sol, "QL[0,1]"), 50.0, epsilon = 1e-6);
    let drop = second_value(&cm, &sol, "V[0,1]") - second_value(&cm, &sol, "V[1,1]");
    let expected = (0.3 * 100.0e3 + 0.4 * 50.0e3) / 4160.0;
    approx::assert_relative_eq!(drop, expected, epsilon = 1e-6);
    assert!((drop - 12.02).abs() < 0.005);
}

#[test]
fn pickup_per_slot_is_limited_by_der_frequency_response() {
    let gamma = 0.05;
    let mut sources = vec![json!({"id": "sub", "kind": "substation", "node": "n1", "p_max": 5000, "q_max": 5000})];
    let mut res = Vec::new();
    for k in 0..3 {
        res.push(json!({"source": format!("pv{k}"), "forecast": 300, "max_error": 0.0, "budget": 0}));
        sources.push(json!({"id": format!("gt{k}"), "kind": "gt", "node": "n1", "p_max": 200, "q_max": 100, "frr": gamma}));
        sources.push(json!({"id": format!("pv{k}"), "kind": "res", "node": "n1", "p_max": 300, "q_max": 100, "frr": gamma}));
    }
    let inst = load(&json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": [{"id": "n1", "x": 0, "y": 0, "load": 2000}],
            "sources": sources
        },
        "crews": {"speed_kmh": 30},
        "uncertainty": {"res": res},
        "horizon": {"slot_length": 30, "slots": 3}
    }));
    let limit = gamma * (3.0 * 200.0 + 3.0 * 300.0);
    assert_eq!(limit, 75.0);
    let (cm, report) = solve(&inst);
    let sol = recourse(&cm, &report.x, &zero_sigma(&inst, &cm));
    for t in 1..=3 {
        let served = 2000.0 - second_value(&cm, &sol, &format!("Pshed[0,{t}]"));
        approx::assert_relative_eq!(served, limit * t as f64, epsilon = 1e-6);
    }
}

#[test]
fn a_cell_without_ders_picks_up_nothing_beyond_its_initial_load() {
    let mut doc = json!({
        "network": {
            "nominal_voltage": 4160, "v_min": 3952, "v_max": 4368,
            "nodes": [{"id": "n1", "x": 0, "y": 0, "load": 40}],
            "sources": [{"id": "sub", "kind": "substation", "node": "n1", "p_max": 5000, "q_max": 5000}]
        },
        "crews": {"speed_kmh": 30},
        "horizon": {"slot_length": 30, "slots": 2}
    });
    let (_, report) = solve(&load(&doc));
    approx::assert_relative_eq!(report.objective, 2.0 * 40.0 * 0.5 * 14.0);

    doc["network"]["initially_energized"] = json!(["n1"]);
    let (_, report) = solve(&load(&doc));
    assert_eq!(report.objective, 0.0);

    doc["network"]["nodes"][0]["load"] = json!([40, 60]);
    let (_, report) = solve(&load(&doc));
    approx::assert_relative_eq!(report.objective, 20.0 * 0.5 * 14.0);
}

#[test]
fn instance_without_res_has_no_uncertainty_rows() {
    let inst = fixture("spot");
    let cm = assemble_compact(&inst).unwrap();
    let [a, b, c] = cm.family_counts();
    assert!(a > 0 && b > 0);
    assert_eq!(c, 0);
    assert!(cm.sigma.is_empty());
}

#[test]
fn desk_fixture_populates_all_three_families() {
    let inst = fixture("desk");
    let cm = assemble_compact(&inst).unwrap();
    let [a, b, c] = cm.family_counts();
    assert!(a > 0 && b > 0 && c > 0, "{a} {b} {c}");
}
