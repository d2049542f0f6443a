mod common;

use common::*;
use restoration_core::*;
use restoration_harness::report::energized_cells;
use restoration_harness::validate::validate_schedule;

// road distance is twice the straight line
fn minutes(a: [f64; 2], b: [f64; 2], speed_kmh: f64) -> f64 {
    2.0 * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 1000.0 / speed_kmh * 60.0
}

fn site(inst: &Instance, line: usize) -> [f64; 2] {
    let l = &inst.network.lines[line];
    let (a, b) = (inst.network.nodes[l.from].pos, inst.network.nodes[l.to].pos);
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

#[test]
fn cumulative_cost_is_penalty_weighted_shedding() {
    for name in ["desk", "spot", "res-budget"] {
        let inst = fixture(name);
        let r = solve(&inst);
        let op = validate_schedule(&inst, &r.decision, &r.worst, &HighsBackend).unwrap().operation.unwrap();
        let h = inst.horizon.slot_length / 60.0;
        let mut total = 0.0;
        for (t, point) in r.series.iter().enumerate() {
            let slot: f64 = inst.network.nodes.iter().enumerate().map(|(i, n)| h * n.penalty * op.shed[i][t]).sum();
            total += slot;
            assert_eq!(point.slot_cost, slot, "{name} slot {}", t + 1);
            assert_eq!(point.cumulative_cost, total, "{name} slot {}", t + 1);
        }
        assert!(relative_gap(total, r.validated_objective) <= 1e-9);
    }
}

#[test]
fn itinerary_times_follow_the_travel_matrix() {
    for name in ["desk", "spot"] {
        let inst = fixture(name);
        let r = solve(&inst);
        let speed = inst.crews.speed_kmh;
        for it in &r.itineraries {
            let depot = match it.kind.as_str() {
                "repair" => inst.crews.repair.iter().find(|c| c.id == it.crew).unwrap().depot,
                _ => inst.crews.operating.iter().find(|c| c.id == it.crew).unwrap().depot,
            };
            let mut at = depot;
            let mut free = 0.0;
            for stop in &it.stops {
                let here = site(&inst, inst.network.line_index(&stop.site).unwrap());
                let expected = free + minutes(at, here, speed);
                assert!((stop.arrival - expected).abs() <= 1e-9, "{} vs {expected}", stop.arrival);
                assert!(stop.start >= stop.arrival && stop.finish > stop.start);
                at = here;
                free = stop.finish;
            }
        }
    }
}

#[test]
fn milestones_are_ordered_and_match_energized_cells() {
    let inst = fixture("desk");
    let r = solve(&inst);
    assert!(r.milestones.windows(2).all(|w| w[0].slot < w[1].slot));
    let lit = energized_cells(&inst, &r.decision);
    for m in &r.milestones {
        for id in &m.energized {
            let c = inst.cells.cells.iter().position(|c| &c.id == id).unwrap();
            assert!(lit[c][m.slot - 1]);
            assert!(m.slot == 1 || !lit[c][m.slot - 2]);
        }
    }
    let last = inst.slots() - 1;
    let closed: Vec<String> = (0..inst.switches.len())
        .filter(|&q| r.decision.closed[q][last] == 1)
        .map(|q| inst.network.lines[inst.switches[q]].id.clone())
        .collect();
    assert_eq!(r.final_topology, closed);
}

#[test]
fn restored_fractions_stay_in_unit_interval() {
    let inst = fixture("res-budget");
    let r = solve(&inst);
    assert_eq!(r.series.len(), inst.slots());
    for p in &r.series {
        assert!((0.0..=1.0).contains(&p.restored_fraction));
        assert!((0.0..=1.0).contains(&p.restored_critical_fraction));
    }
}

#[test]
fn identical_inputs_give_identical_reports() {
    let inst = fixture("res-budget");
    let a = serde_json::to_string(&solve(&inst)).unwrap();
    let b = serde_json::to_string(&solve(&inst)).unwrap();
    assert_eq!(a, b);
}
