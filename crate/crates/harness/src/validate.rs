//! Discrete-event re-simulation of a schedule.
//!
//! Crew routes are replayed to exact completion minutes, every binary
//! timeline of the decision is recomputed or bounded from those minutes,
//! radiality is checked by graph traversal and the shedding cost comes from
//! the independent operation LP.

use serde::Serialize;

use restoration_core::crew::cluster_tasks;
use restoration_core::{materialize_uncertainty, FirstStageDecision, Instance, ScenarioRealization, SolveError, SolverBackend};

use crate::recourse::{solve_operation, Operation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub family: &'static str,
    pub entity: String,
    pub slot: Option<usize>,
    pub message: String,
}

/// One stop of a crew itinerary, in minutes from dispatch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Visit {
    pub task: usize,
    pub arrival: f64,
    /// Work start (later than arrival when an operating crew waits for clearing).
    pub start: f64,
    pub finish: f64,
}

/// Exact event times implied by the routes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EventTimes {
    pub repair_itineraries: Vec<Vec<Visit>>,
    pub operating_itineraries: Vec<Vec<Visit>>,
    /// Per fault; `None` if no crew repairs it.
    pub repair_end: Vec<Option<f64>>,
    /// Per cell: latest repair completion of its faults (0 without faults).
    pub cell_clear: Vec<Option<f64>>,
    /// Per switch: latest clearing time among its two cells.
    pub switch_clear: Vec<Option<f64>>,
    /// Per switch: manual close completion, if visited.
    pub manual_close: Vec<Option<f64>>,
    /// Per switch: earliest remote close completion (RCS with a controller).
    pub remote_close: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub events: EventTimes,
    /// `None` if the operation LP is infeasible or the schedule is malformed.
    pub operation: Option<Operation>,
}

impl ValidationReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty() && self.operation.is_some()
    }

    pub fn objective(&self) -> Option<f64> {
        self.operation.as_ref().map(|o| o.cost)
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, family: &'static str, entity: impl Into<String>, slot: Option<usize>, message: impl Into<String>) {
        self.0.push(Violation { family, entity: entity.into(), slot, message: message.into() });
    }
}

fn shape_ok(inst: &Instance, d: &FirstStageDecision, out: &mut Collector) -> bool {
    let t = inst.slots();
    let checks: [(&'static str, &Vec<Vec<u8>>, usize); 8] = [
        ("fault_repaired", &d.fault_repaired, inst.faults.len()),
        ("cell_energizable", &d.cell_energizable, inst.cells.len()),
        ("closed_manually", &d.closed_manually, inst.switches.len()),
        ("closed_remotely", &d.closed_remotely, inst.switches.len()),
        ("closed", &d.closed, inst.switches.len()),
        ("router_up", &d.router_up, inst.cyber.routers.len()),
        ("ups_alive", &d.ups_alive, inst.cyber.routers.len()),
        ("root", &d.root, inst.cells.len()),
    ];
    let mut ok = d.repair_routes.len() == inst.crews.repair.len() && d.operating_routes.len() == inst.crews.operating.len();
    if !ok {
        out.push("shape", "routes", None, "route count differs from crew count");
    }
    for (name, m, rows) in checks {
        if m.len() != rows || m.iter().any(|r| r.len() != t || r.iter().any(|&b| b > 1)) {
            out.push("shape", name, None, format!("expected {rows} binary rows of {t} slots"));
            ok = false;
        }
    }
    ok
}

/// Replays crew routes; records coverage, cluster and horizon violations.
pub fn simulate_events(inst: &Instance, d: &FirstStageDecision, out: &mut Vec<Violation>) -> EventTimes {
    let mut c = Collector(std::mem::take(out));
    let ev = simulate(inst, d, &mut c);
    *out = c.0;
    ev
}

fn simulate(inst: &Instance, d: &FirstStageDecision, out: &mut Collector) -> EventTimes {
    let clusters = cluster_tasks(inst);
    let t_max = inst.horizon.t_max;
    let nf = inst.faults.len();
    let ns = inst.switches.len();
    let mut ev = EventTimes { repair_end: vec![None; nf], manual_close: vec![None; ns], ..Default::default() };

    for (rc, route) in d.repair_routes.iter().enumerate() {
        let mut now = 0.0;
        let mut prev: Option<usize> = None;
        let mut visits = Vec::new();
        for &n in route {
            if n >= nf {
                out.push("coverage", format!("RC{rc}"), None, format!("unknown fault index {n}"));
                continue;
            }
            if !clusters.repair[rc].contains(&n) {
                out.push("cluster", inst.network.lines[inst.faults[n]].id.clone(), None, format!("fault outside the cluster of repair crew {rc}"));
            }
            let travel = prev.map_or_else(|| inst.rc_depot_travel(rc, n), |p| inst.rc_travel(p, n));
            let arrival = now + travel;
            if arrival > t_max + 1e-6 {
                out.push("horizon", format!("RC{rc}"), None, format!("arrival {arrival:.2} after dispatch horizon {t_max}"));
            }
            let finish = arrival + inst.crews.repair[rc].repair_minutes[n];
            if ev.repair_end[n].is_some() {
                out.push("coverage", inst.network.lines[inst.faults[n]].id.clone(), None, "fault visited more than once");
            }
            ev.repair_end[n] = Some(finish);
            visits.push(Visit { task: n, arrival, start: arrival, finish });
            now = finish;
            prev = Some(n);
        }
        ev.repair_itineraries.push(visits);
    }
    for n in 0..nf {
        if ev.repair_end[n].is_none() {
            out.push("coverage", inst.network.lines[inst.faults[n]].id.clone(), None, "fault never repaired");
        }
    }

    ev.cell_clear = (0..inst.cells.len())
        .map(|c| {
            inst.cell_faults(c).iter().try_fold(0.0f64, |acc, &n| ev.repair_end[n].map(|e| acc.max(e)))
        })
        .collect();
    ev.switch_clear = (0..ns)
        .map(|q| inst.cells.switch_cells(q).iter().try_fold(0.0f64, |acc, &c| ev.cell_clear[c].map(|e| acc.max(e))))
        .collect();

    for (oc, route) in d.operating_routes.iter().enumerate() {
        let mut now = 0.0;
        let mut prev: Option<usize> = None;
        let mut visits = Vec::new();
        for &q in route {
            if q >= ns {
                out.push("coverage", format!("OC{oc}"), None, format!("unknown switch index {q}"));
                continue;
            }
            let id = inst.network.lines[inst.switches[q]].id.clone();
            if !clusters.operating[oc].contains(&q) {
                out.push("cluster", id.clone(), None, format!("switch outside the cluster of operating crew {oc}"));
            }
            let travel = prev.map_or_else(|| inst.oc_depot_travel(oc, q), |p| inst.oc_travel(p, q));
            let arrival = now + travel;
            if arrival > t_max + 1e-6 {
                out.push("horizon", format!("OC{oc}"), None, format!("arrival {arrival:.2} after dispatch horizon {t_max}"));
            }
            // a switch next to a never-cleared cell can not be operated safely
            let start = arrival.max(ev.switch_clear[q].unwrap_or(f64::INFINITY));
            let finish = start + inst.crews.operating[oc].operate_minutes[q];
            if ev.manual_close[q].is_some() {
                out.push("coverage", id, None, "switch visited more than once");
            }
            ev.manual_close[q] = Some(finish);
            visits.push(Visit { task: q, arrival, start, finish });
            now = finish;
            prev = Some(q);
        }
        ev.operating_itineraries.push(visits);
    }

    ev.remote_close = (0..ns)
        .map(|q| {
            (inst.is_remote(q) && inst.cyber.controller_of(q).is_some())
                .then(|| ev.switch_clear[q].map(|c| c + inst.crews.remote_minutes[q]))
                .flatten()
        })
        .collect();
    ev
}

fn step(inst: &Instance, minutes: Option<f64>, t: usize) -> u8 {
    u8::from(minutes.is_some_and(|m| m.is_finite() && inst.horizon.in_effect(m, t)))
}

fn check_timelines(inst: &Instance, d: &FirstStageDecision, ev: &EventTimes, out: &mut Collector) {
    let slots = inst.slots();
    let cy = &inst.cyber;
    for t in 1..=slots {
        for n in 0..inst.faults.len() {
            let want = step(inst, ev.repair_end[n], t);
            if d.fault_repaired[n][t - 1] != want {
                out.push("fault-status", inst.network.lines[inst.faults[n]].id.clone(), Some(t), format!("expected {want}"));
            }
        }
        for c in 0..inst.cells.len() {
            let cleared = inst.cell_faults(c).iter().all(|&n| step(inst, ev.repair_end[n], t) == 1);
            if d.cell_energizable[c][t - 1] == 1 && !cleared {
                out.push("cell-status", inst.cells.cells[c].id.clone(), Some(t), "cell marked energizable before its faults are repaired");
            }
        }
        for q in 0..inst.switches.len() {
            let id = || inst.network.lines[inst.switches[q]].id.clone();
            let manual = step(inst, ev.manual_close[q], t);
            if d.closed_manually[q][t - 1] != manual {
                out.push("manual-close", id(), Some(t), format!("expected {manual}"));
            }
            let remote = d.closed_remotely[q][t - 1];
            if remote == 1 {
                match (ev.remote_close[q], cy.controller_of(q)) {
                    (Some(done), Some(c)) => {
                        if !inst.horizon.in_effect(done, t) {
                            out.push("remote-close", id(), Some(t), format!("closed remotely before {done:.2} min"));
                        }
                        if d.router_up[c][t - 1] == 0 {
                            out.push("remote-close", id(), Some(t), format!("controller {} unavailable", cy.routers[c].id));
                        }
                    }
                    _ => out.push("remote-close", id(), Some(t), "switch can not be operated remotely"),
                }
            }
            if t > 1 && d.closed_remotely[q][t - 2] > remote {
                out.push("remote-monotone", id(), Some(t), "remote close undone");
            }
            let want = manual.max(remote);
            if d.closed[q][t - 1] != want {
                out.push("merge", id(), Some(t), format!("closed status should be {want}"));
            }
        }
        for (c, router) in cy.routers.iter().enumerate() {
            if c == cy.centre {
                if d.router_up[c][t - 1] != 1 || d.ups_alive[c][t - 1] != 1 {
                    out.push("router", router.id.clone(), Some(t), "control centre must be up");
                }
                continue;
            }
            let alive = u8::from(inst.horizon.ups_alive(router.ups, t));
            if d.ups_alive[c][t - 1] != alive {
                out.push("ups", router.id.clone(), Some(t), format!("expected {alive}"));
            }
            if d.router_up[c][t - 1] == 1 {
                let linked = cy.links[c].iter().any(|path| path.iter().all(|&m| m == cy.centre || d.router_up[m][t - 1] == 1));
                if !linked {
                    out.push("router", router.id.clone(), Some(t), "no link with every router available");
                }
            }
        }
    }
}

fn find(parent: &mut [usize], a: usize) -> usize {
    let mut a = a;
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Per-slot forest check over the cell graph: acyclic, one root per component.
pub fn check_radiality(inst: &Instance, d: &FirstStageDecision) -> Vec<Violation> {
    let mut out = Collector(Vec::new());
    radiality(inst, d, &mut out);
    out.0
}

fn radiality(inst: &Instance, d: &FirstStageDecision, out: &mut Collector) {
    let n = inst.cells.len();
    for t in 1..=inst.slots() {
        let mut parent: Vec<usize> = (0..n).collect();
        for (q, e) in inst.cells.edges.iter().enumerate() {
            if d.closed[q][t - 1] == 1 {
                let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
                if a == b {
                    out.push("radiality", inst.network.lines[inst.switches[q]].id.clone(), Some(t), "closing this switch creates a loop");
                } else {
                    parent[a] = b;
                }
            }
        }
        let mut roots = vec![0usize; n];
        for c in 0..n {
            if d.root[c][t - 1] == 1 {
                let r = find(&mut parent, c);
                roots[r] += 1;
            }
        }
        for c in 0..n {
            if find(&mut parent, c) == c && roots[c] != 1 {
                out.push("radiality", inst.cells.cells[c].id.clone(), Some(t), format!("component has {} roots", roots[c]));
            }
        }
        if t == inst.slots() {
            let components = (0..n).filter(|&c| find(&mut parent, c) == c).count();
            if components != 1 {
                out.push("radiality", "final", Some(t), format!("{components} components remain at the end of the horizon"));
            }
        }
    }
}

/// Validates a schedule at one scenario.
pub fn validate_schedule(
    inst: &Instance,
    d: &FirstStageDecision,
    sigma: &ScenarioRealization,
    backend: &dyn SolverBackend,
) -> Result<ValidationReport, SolveError> {
    let mut out = Collector(Vec::new());
    if !shape_ok(inst, d, &mut out) {
        return Ok(ValidationReport { violations: out.0, events: EventTimes::default(), operation: None });
    }
    let available = materialize_uncertainty(&inst.uncertainty, inst.slots(), sigma)?;
    let events = simulate(inst, d, &mut out);
    check_timelines(inst, d, &events, &mut out);
    radiality(inst, d, &mut out);
    let operation = solve_operation(inst, d, &available, backend)?;
    if operation.is_none() {
        out.push("operation", "grid", None, "no operation meets source, ramping, pickup and router supply limits");
    }
    let mut violations = out.0;
    violations.sort_by(|a, b| a.slot.unwrap_or(0).cmp(&b.slot.unwrap_or(0)).then_with(|| a.entity.cmp(&b.entity)));
    Ok(ValidationReport { violations, events, operation })
}
