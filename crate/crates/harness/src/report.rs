//! Schedule report: itineraries, milestones, per-slot series and topology.

use serde::{Deserialize, Serialize};

use restoration_core::ccg::{IterationRecord, SolveReport};
use restoration_core::{FirstStageDecision, Instance, ScenarioRealization};

use crate::validate::ValidationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    /// Line id of the fault or switch.
    pub site: String,
    pub arrival: f64,
    pub start: f64,
    pub finish: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub crew: String,
    pub kind: String,
    pub stops: Vec<Stop>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteClose {
    pub switch: String,
    pub router: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Milestone {
    pub slot: usize,
    pub start_minute: f64,
    pub energized: Vec<String>,
    pub de_energized: Vec<String>,
    pub closed_manually: Vec<String>,
    pub closed_remotely: Vec<RemoteClose>,
    pub routers_down: Vec<String>,
    pub routers_up: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotPoint {
    pub slot: usize,
    pub start_minute: f64,
    pub restored_fraction: f64,
    pub restored_critical_fraction: f64,
    pub slot_cost: f64,
    pub cumulative_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    /// Shedding cost of the schedule at the worst scenario as re-simulated.
    pub validated_objective: f64,
    pub itineraries: Vec<Itinerary>,
    pub milestones: Vec<Milestone>,
    pub series: Vec<SlotPoint>,
    /// Line ids of closed switches in the last slot.
    pub final_topology: Vec<String>,
    pub decision: FirstStageDecision,
    pub worst: ScenarioRealization,
    pub trace: Vec<IterationRecord>,
}

fn line_id(inst: &Instance, line: usize) -> String {
    inst.network.lines[line].id.clone()
}

/// Cells that carry power in each slot: energizable and connected through
/// closed switches to an energizable cell holding a source.
pub fn energized_cells(inst: &Instance, d: &FirstStageDecision) -> Vec<Vec<bool>> {
    let n = inst.cells.len();
    let mut out = vec![vec![false; inst.slots()]; n];
    for t in 1..=inst.slots() {
        let live = |c: usize| d.cell_energizable[c][t - 1] == 1;
        let mut lit: Vec<bool> = (0..n)
            .map(|c| live(c) && inst.network.sources.iter().any(|s| inst.cells.cell_of_node[s.node] == c))
            .collect();
        loop {
            let mut changed = false;
            for (q, e) in inst.cells.edges.iter().enumerate() {
                if d.closed[q][t - 1] == 1 && live(e.from) && live(e.to) && lit[e.from] != lit[e.to] {
                    lit[e.from] = true;
                    lit[e.to] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for c in 0..n {
            out[c][t - 1] = lit[c];
        }
    }
    out
}

pub fn build_report(inst: &Instance, solve: &SolveReport, d: &FirstStageDecision, check: &ValidationReport) -> ScheduleReport {
    let ev = &check.events;
    let mut itineraries = Vec::new();
    for (rc, visits) in ev.repair_itineraries.iter().enumerate() {
        itineraries.push(Itinerary {
            crew: inst.crews.repair[rc].id.clone(),
            kind: "repair".into(),
            stops: visits
                .iter()
                .map(|v| Stop { site: line_id(inst, inst.faults[v.task]), arrival: v.arrival, start: v.start, finish: v.finish })
                .collect(),
        });
    }
    for (oc, visits) in ev.operating_itineraries.iter().enumerate() {
        itineraries.push(Itinerary {
            crew: inst.crews.operating[oc].id.clone(),
            kind: "operating".into(),
            stops: visits
                .iter()
                .map(|v| Stop { site: line_id(inst, inst.switches[v.task]), arrival: v.arrival, start: v.start, finish: v.finish })
                .collect(),
        });
    }

    let lit = energized_cells(inst, d);
    let cy = &inst.cyber;
    let mut milestones = Vec::new();
    for t in 1..=inst.slots() {
        let before = |row: &Vec<u8>| if t == 1 { 0 } else { row[t - 2] };
        let mut m = Milestone { slot: t, start_minute: inst.horizon.slot_start(t), ..Default::default() };
        for (c, cell) in inst.cells.cells.iter().enumerate() {
            let was = t > 1 && lit[c][t - 2];
            match (was, lit[c][t - 1]) {
                (false, true) => m.energized.push(cell.id.clone()),
                (true, false) => m.de_energized.push(cell.id.clone()),
                _ => {}
            }
        }
        for q in 0..inst.switches.len() {
            let id = line_id(inst, inst.switches[q]);
            if d.closed_manually[q][t - 1] == 1 && before(&d.closed_manually[q]) == 0 {
                m.closed_manually.push(id.clone());
            }
            if d.closed_remotely[q][t - 1] == 1 && before(&d.closed_remotely[q]) == 0 {
                let router = cy.controller_of(q).map_or_else(String::new, |c| cy.routers[c].id.clone());
                m.closed_remotely.push(RemoteClose { switch: id, router });
            }
        }
        for (c, router) in cy.routers.iter().enumerate() {
            let now = d.router_up[c][t - 1];
            let was = before(&d.router_up[c]);
            if t > 1 && was == 1 && now == 0 {
                m.routers_down.push(router.id.clone());
            }
            if was == 0 && now == 1 && c != cy.centre {
                m.routers_up.push(router.id.clone());
            }
        }
        let quiet = m.energized.is_empty()
            && m.de_energized.is_empty()
            && m.closed_manually.is_empty()
            && m.closed_remotely.is_empty()
            && m.routers_down.is_empty()
            && m.routers_up.is_empty();
        if !quiet {
            milestones.push(m);
        }
    }

    let mut series = Vec::new();
    if let Some(op) = &check.operation {
        let nodes = &inst.network.nodes;
        let mut cumulative = 0.0;
        for t in 1..=inst.slots() {
            let (mut total, mut served, mut crit_total, mut crit_served) = (0.0, 0.0, 0.0, 0.0);
            for (i, node) in nodes.iter().enumerate() {
                let load = node.load[t - 1];
                let got = load - op.shed[i][t - 1];
                total += load;
                served += got;
                if node.critical {
                    crit_total += load;
                    crit_served += got;
                }
            }
            let frac = |a: f64, b: f64| if b > 0.0 { (a / b).clamp(0.0, 1.0) } else { 1.0 };
            cumulative += op.slot_cost[t - 1];
            series.push(SlotPoint {
                slot: t,
                start_minute: inst.horizon.slot_start(t),
                restored_fraction: frac(served, total),
                restored_critical_fraction: frac(crit_served, crit_total),
                slot_cost: op.slot_cost[t - 1],
                cumulative_cost: cumulative,
            });
        }
    }

    let last = inst.slots();
    let final_topology = (0..inst.switches.len())
        .filter(|&q| last > 0 && d.closed[q][last - 1] == 1)
        .map(|q| line_id(inst, inst.switches[q]))
        .collect();
    ScheduleReport {
        converged: solve.converged,
        iterations: solve.iterations,
        objective: solve.objective,
        lower_bound: solve.lower_bound,
        upper_bound: solve.upper_bound,
        gap: solve.gap,
        validated_objective: check.objective().unwrap_or(f64::NAN),
        itineraries,
        milestones,
        series,
        final_topology,
        decision: d.clone(),
        worst: solve.worst.clone(),
        trace: solve.trace.clone(),
    }
}

/// Per-slot series as CSV.
pub fn series_csv(report: &ScheduleReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.series {
        w.serialize(p).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Short human-readable summary.
pub fn summary(report: &ScheduleReport) -> String {
    let mut s = String::new();
    let status = if report.converged { "converged" } else { "not converged" };
    s.push_str(&format!(
        "{status} after {} iterations: objective {:.2} (LB {:.2}, UB {:.2}, gap {:.4}%)\n",
        report.iterations,
        report.objective,
        report.lower_bound,
        report.upper_bound,
        report.gap * 100.0
    ));
    for it in &report.itineraries {
        let stops: Vec<String> = it.stops.iter().map(|v| format!("{} ({:.0}-{:.0})", v.site, v.start, v.finish)).collect();
        s.push_str(&format!("  {} [{}]: {}\n", it.crew, it.kind, if stops.is_empty() { "idle".into() } else { stops.join(" -> ") }));
    }
    for m in &report.milestones {
        let mut parts = Vec::new();
        if !m.energized.is_empty() {
            parts.push(format!("energized {}", m.energized.join(",")));
        }
        if !m.de_energized.is_empty() {
            parts.push(format!("lost {}", m.de_energized.join(",")));
        }
        if !m.closed_manually.is_empty() {
            parts.push(format!("manual {}", m.closed_manually.join(",")));
        }
        for r in &m.closed_remotely {
            parts.push(format!("remote {} via {}", r.switch, r.router));
        }
        if !m.routers_down.is_empty() {
            parts.push(format!("routers down {}", m.routers_down.join(",")));
        }
        if !m.routers_up.is_empty() {
            parts.push(format!("routers up {}", m.routers_up.join(",")));
        }
        s.push_str(&format!("  slot {:>2} ({:>4.0} min): {}\n", m.slot, m.start_minute, parts.join("; ")));
    }
    s
}
