//! Repair-crew and operating-crew routing, arrival and completion times, and
//! the slot status timelines they drive.

use std::collections::BTreeMap;

use crate::instance::Instance;
use crate::model::{Family, LinExpr, ModelBuilder, VarId};
use crate::travel::euclidean;

/// Marker for the depot in arc keys.
pub const DEPOT: usize = usize::MAX;

/// Task subsets per crew.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clusters {
    /// Fault indices per repair crew, ascending.
    pub repair: Vec<Vec<usize>>,
    /// Switch task indices per operating crew, ascending.
    pub operating: Vec<Vec<usize>>,
}

/// Greedy balanced assignment of tasks to crews by depot distance.
///
/// Pairs are taken in ascending (distance, task key, crew) order. Every crew
/// receives either floor(n/k) or ceil(n/k) tasks.
pub fn balanced_assignment(depots: &[[f64; 2]], sites: &[[f64; 2]], keys: &[String]) -> Vec<Vec<usize>> {
    let k = depots.len();
    let n = sites.len();
    let mut out = vec![Vec::new(); k];
    if k == 0 {
        return out;
    }
    let base = n / k;
    let extra = n % k;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * k);
    for (task, site) in sites.iter().enumerate() {
        for (crew, depot) in depots.iter().enumerate() {
            pairs.push((euclidean(*depot, *site), task, crew));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| keys[a.1].cmp(&keys[b.1])).then(a.2.cmp(&b.2))
    });
    let mut taken = vec![false; n];
    let mut big = 0;
    for (_, task, crew) in pairs {
        if taken[task] {
            continue;
        }
        let size = out[crew].len();
        let room = size < base || (size == base && big < extra);
        if !room {
            continue;
        }
        if size == base {
            big += 1;
        }
        taken[task] = true;
        out[crew].push(task);
    }
    for c in &mut out {
        c.sort_unstable();
    }
    out
}

pub fn cluster_tasks(inst: &Instance) -> Clusters {
    let nf = inst.faults.len();
    let ns = inst.switches.len();
    if !inst.crews.clustering {
        return Clusters {
            repair: vec![(0..nf).collect(); inst.crews.repair.len()],
            operating: vec![(0..ns).collect(); inst.crews.operating.len()],
        };
    }
    let fault_sites: Vec<_> = (0..nf).map(|f| inst.fault_site(f)).collect();
    let fault_keys: Vec<_> = inst.faults.iter().map(|&l| inst.network.lines[l].id.clone()).collect();
    let switch_sites: Vec<_> = (0..ns).map(|q| inst.switch_site(q)).collect();
    let switch_keys: Vec<_> = inst.switches.iter().map(|&l| inst.network.lines[l].id.clone()).collect();
    let rc_depots: Vec<_> = inst.crews.repair.iter().map(|c| c.depot).collect();
    let oc_depots: Vec<_> = inst.crews.operating.iter().map(|c| c.depot).collect();
    Clusters {
        repair: balanced_assignment(&rc_depots, &fault_sites, &fault_keys),
        operating: balanced_assignment(&oc_depots, &switch_sites, &switch_keys),
    }
}

/// Arc and arrival variables of one crew.
#[derive(Debug, Clone)]
pub struct RouteVars {
    pub crew: usize,
    pub tasks: Vec<usize>,
    /// `(from, to)` with [`DEPOT`] for the depot.
    pub arcs: BTreeMap<(usize, usize), VarId>,
    pub arrival: BTreeMap<usize, VarId>,
    /// Operating crews only: safe-operation start per task.
    pub safe_start: BTreeMap<usize, VarId>,
}

impl RouteVars {
    fn incoming(&self, task: usize) -> LinExpr {
        LinExpr::sum(self.arcs.iter().filter(|(k, _)| k.1 == task).map(|(_, &v)| v))
    }

    fn outgoing(&self, task: usize) -> LinExpr {
        LinExpr::sum(self.arcs.iter().filter(|(k, _)| k.0 == task).map(|(_, &v)| v))
    }
}

#[derive(Debug, Clone)]
pub struct CrewVars {
    pub repair: Vec<RouteVars>,
    pub operating: Vec<RouteVars>,
    /// Per fault: (repair crew, selector).
    pub beta_rc: Vec<Vec<(usize, VarId)>>,
    /// Per switch: (operating crew, selector).
    pub beta_oc: Vec<Vec<(usize, VarId)>>,
    pub repair_end: Vec<VarId>,
    /// Per cell; `None` when the cell holds no fault (clearing time 0).
    pub cell_clear: Vec<Option<VarId>>,
    /// Per switch: latest clearing time among adjacent cells.
    pub switch_clear: Vec<Option<VarId>>,
    /// Per switch: manual operation end; `None` when no crew can visit it.
    pub operation_end: Vec<Option<VarId>>,
    /// `[fault][slot]`
    pub u_line: Vec<Vec<VarId>>,
    /// `[cell][slot]`
    pub u_cell: Vec<Vec<VarId>>,
    /// `[switch][slot]`, `None` when no manual visit is possible.
    pub w_manual: Vec<Option<Vec<VarId>>>,
}

/// Time-valued big-M for status rows: covers any slot start minus any time.
pub fn status_m(inst: &Instance) -> f64 {
    inst.big_m.routing + inst.slots() as f64 * inst.horizon.slot_length + 1.0
}

impl CrewVars {
    pub fn allocate(inst: &Instance, clusters: &Clusters, mb: &mut ModelBuilder) -> CrewVars {
        let time_ub = inst.big_m.routing;
        let t_max = inst.horizon.t_max;
        let slots = inst.slots();

        let route = |mb: &mut ModelBuilder, prefix: &str, crew: usize, tasks: &[usize], safe: bool| {
            let mut arcs = BTreeMap::new();
            let nodes: Vec<usize> = std::iter::once(DEPOT).chain(tasks.iter().copied()).collect();
            if !tasks.is_empty() {
                for &a in &nodes {
                    for &b in &nodes {
                        if a != b {
                            let name = format!("x{prefix}[{},{},{crew}]", site(a), site(b));
                            arcs.insert((a, b), mb.binary(name));
                        }
                    }
                }
            }
            let arrival = tasks
                .iter()
                .map(|&n| (n, mb.first(format!("AT{prefix}[{n},{crew}]"), 0.0, t_max)))
                .collect();
            let safe_start = if safe {
                tasks.iter().map(|&n| (n, mb.first(format!("TS{prefix}[{n},{crew}]"), 0.0, time_ub))).collect()
            } else {
                BTreeMap::new()
            };
            RouteVars { crew, tasks: tasks.to_vec(), arcs, arrival, safe_start }
        };

        let repair: Vec<RouteVars> =
            clusters.repair.iter().enumerate().map(|(rc, t)| route(mb, "RC", rc, t, false)).collect();
        let operating: Vec<RouteVars> =
            clusters.operating.iter().enumerate().map(|(oc, t)| route(mb, "OC", oc, t, true)).collect();

        let nf = inst.faults.len();
        let ns = inst.switches.len();
        let mut beta_rc = vec![Vec::new(); nf];
        for r in &repair {
            for &n in &r.tasks {
                beta_rc[n].push((r.crew, mb.binary(format!("bRC[{n},{}]", r.crew))));
            }
        }
        let mut beta_oc = vec![Vec::new(); ns];
        for r in &operating {
            for &q in &r.tasks {
                beta_oc[q].push((r.crew, mb.binary(format!("bOC[{q},{}]", r.crew))));
            }
        }
        let repair_end = (0..nf).map(|n| mb.first(format!("tRP[{n}]"), 0.0, time_ub)).collect();
        let cell_clear = (0..inst.cells.len())
            .map(|c| (!inst.cell_faults(c).is_empty()).then(|| mb.first(format!("TNCR[{c}]"), 0.0, time_ub)))
            .collect();
        let switch_clear = (0..ns)
            .map(|q| {
                let faulty = inst.cells.switch_cells(q).iter().any(|&c| !inst.cell_faults(c).is_empty());
                faulty.then(|| mb.first(format!("TNCRMS[{q}]"), 0.0, time_ub))
            })
            .collect();
        let operation_end = (0..ns)
            .map(|q| (!beta_oc[q].is_empty()).then(|| mb.first(format!("tMSO[{q}]"), 0.0, time_ub)))
            .collect();
        let u_line = (0..nf).map(|n| (1..=slots).map(|t| mb.binary(format!("uL[{n},{t}]"))).collect()).collect();
        let u_cell =
            (0..inst.cells.len()).map(|c| (1..=slots).map(|t| mb.binary(format!("uNC[{c},{t}]"))).collect()).collect();
        let w_manual = (0..ns)
            .map(|q| {
                (!beta_oc[q].is_empty()).then(|| (1..=slots).map(|t| mb.binary(format!("wMS[{q},{t}]"))).collect())
            })
            .collect();
        CrewVars {
            repair,
            operating,
            beta_rc,
            beta_oc,
            repair_end,
            cell_clear,
            switch_clear,
            operation_end,
            u_line,
            u_cell,
            w_manual,
        }
    }
}

fn site(s: usize) -> String {
    if s == DEPOT {
        "D".into()
    } else {
        s.to_string()
    }
}

/// `target = max(operands)` with one selector binary per operand.
pub(crate) fn exact_max(mb: &mut ModelBuilder, tag: &'static str, name: &str, target: VarId, operands: &[VarId], m: f64) {
    match operands {
        [] => {}
        [only] => mb.eq(tag, format!("{name}:eq"), Family::I, target, *only),
        _ => {
            let mut pick = LinExpr::new();
            for (k, &op) in operands.iter().enumerate() {
                let s = mb.binary(format!("s[{name},{k}]"));
                pick += s;
                mb.ge(tag, format!("{name}:ge{k}"), Family::I, target, op);
                mb.le(tag, format!("{name}:le{k}"), Family::I, target, op - s * m + m);
            }
            mb.eq(tag, format!("{name}:pick"), Family::I, pick, 1.0);
        }
    }
}

/// Depot departure/return, flow continuity, coverage and 2-cycle rows.
pub fn emit_crew_routing(inst: &Instance, vars: &CrewVars, mb: &mut ModelBuilder) {
    let forced = inst.crews.clustering;
    for r in &vars.repair {
        if r.tasks.is_empty() {
            continue;
        }
        let name = format!("rc{}", r.crew);
        if forced {
            mb.eq("depot", format!("{name}:depart"), Family::I, r.outgoing(DEPOT), 1.0);
        } else {
            mb.le("depot", format!("{name}:depart"), Family::I, r.outgoing(DEPOT), 1.0);
        }
        mb.eq("depot", format!("{name}:return"), Family::I, r.incoming(DEPOT), r.outgoing(DEPOT));
        for &n in &r.tasks {
            mb.eq("continuity", format!("{name}:flow{n}"), Family::I, r.incoming(n), r.outgoing(n));
        }
        two_cycles(mb, &name, r);
    }
    for n in 0..inst.faults.len() {
        let mut visits = LinExpr::new();
        for r in &vars.repair {
            if r.tasks.contains(&n) {
                visits += r.incoming(n);
            }
        }
        mb.eq("coverage", format!("fault{n}:once"), Family::I, visits, 1.0);
    }

    for r in &vars.operating {
        if r.tasks.is_empty() {
            continue;
        }
        let name = format!("oc{}", r.crew);
        mb.le("depot", format!("{name}:depart"), Family::I, r.outgoing(DEPOT), 1.0);
        mb.eq("depot", format!("{name}:return"), Family::I, r.incoming(DEPOT), r.outgoing(DEPOT));
        for &q in &r.tasks {
            mb.eq("continuity", format!("{name}:flow{q}"), Family::I, r.incoming(q), r.outgoing(q));
        }
        two_cycles(mb, &name, r);
    }
    for q in 0..inst.switches.len() {
        let mut visits = LinExpr::new();
        for r in &vars.operating {
            if r.tasks.contains(&q) {
                visits += r.incoming(q);
            }
        }
        if !visits.terms.is_empty() {
            mb.le("coverage", format!("switch{q}:atmost"), Family::I, visits, 1.0);
        }
    }
}

fn two_cycles(mb: &mut ModelBuilder, name: &str, r: &RouteVars) {
    for (i, &a) in r.tasks.iter().enumerate() {
        for &b in &r.tasks[i + 1..] {
            let ab = r.arcs[&(a, b)];
            let ba = r.arcs[&(b, a)];
            mb.le("two-cycle", format!("{name}:{a}-{b}"), Family::I, ab + ba, 1.0);
        }
    }
}

/// Arrival-time chains for both crew kinds.
pub fn emit_arrival_times(inst: &Instance, vars: &CrewVars, mb: &mut ModelBuilder) {
    let m = inst.big_m.routing;
    let t_max = inst.horizon.t_max;
    for r in &vars.repair {
        let rc = r.crew;
        for &n in &r.tasks {
            let at = r.arrival[&n];
            let name = format!("rc{rc}:at{n}");
            mb.ge("arrival-unvisited", format!("{name}:unvisited"), Family::I, at, (-r.incoming(n) + 1.0) * t_max);
            let d = inst.rc_depot_travel(rc, n);
            let x = r.arcs[&(DEPOT, n)];
            mb.ge("arrival-depot", format!("{name}:depot-lo"), Family::I, at, x * m + (d - m));
            mb.le("arrival-depot", format!("{name}:depot-hi"), Family::I, at, x * -m + (d + m));
            for &p in &r.tasks {
                if p == n {
                    continue;
                }
                let x = r.arcs[&(p, n)];
                let lead = r.arrival[&p] + (inst.crews.repair[rc].repair_minutes[p] + inst.rc_travel(p, n));
                mb.ge("arrival-chain", format!("{name}:from{p}-lo"), Family::I, at, lead.clone() + x * m - m);
                mb.le("arrival-chain", format!("{name}:from{p}-hi"), Family::I, at, lead - x * m + m);
            }
        }
    }
    for r in &vars.operating {
        let oc = r.crew;
        for &q in &r.tasks {
            let at = r.arrival[&q];
            let name = format!("oc{oc}:at{q}");
            mb.ge("arrival-unvisited", format!("{name}:unvisited"), Family::I, at, (-r.incoming(q) + 1.0) * t_max);
            let d = inst.oc_depot_travel(oc, q);
            let x = r.arcs[&(DEPOT, q)];
            mb.ge("arrival-depot", format!("{name}:depot-lo"), Family::I, at, x * m + (d - m));
            mb.le("arrival-depot", format!("{name}:depot-hi"), Family::I, at, x * -m + (d + m));
            for &p in &r.tasks {
                if p == q {
                    continue;
                }
                let x = r.arcs[&(p, q)];
                let lead = r.safe_start[&p] + (inst.crews.operating[oc].operate_minutes[p] + inst.oc_travel(p, q));
                mb.ge("arrival-chain", format!("{name}:from{p}-lo"), Family::I, at, lead.clone() + x * m - m);
                mb.le("arrival-chain", format!("{name}:from{p}-hi"), Family::I, at, lead - x * m + m);
            }
        }
    }
}

/// Repair completions, cell clearing times, safe-operation starts and
/// manual operation completions.
pub fn emit_completion_times(inst: &Instance, vars: &CrewVars, mb: &mut ModelBuilder) {
    let m = inst.big_m.routing;
    for n in 0..inst.faults.len() {
        let end = vars.repair_end[n];
        let mut pick = LinExpr::new();
        for &(rc, beta) in &vars.beta_rc[n] {
            let r = &vars.repair[rc];
            let done = r.arrival[&n] + inst.crews.repair[rc].repair_minutes[n];
            let name = format!("fault{n}:rc{rc}");
            mb.ge("repair-end", format!("{name}:lo"), Family::I, end, done.clone() + beta * m - m);
            mb.le("repair-end", format!("{name}:hi"), Family::I, end, done - beta * m + m);
            mb.le("selector", format!("{name}:visited"), Family::I, beta, r.incoming(n));
            pick += beta;
        }
        mb.eq("selector", format!("fault{n}:pick"), Family::I, pick, 1.0);
    }

    for c in 0..inst.cells.len() {
        if let Some(target) = vars.cell_clear[c] {
            let ops: Vec<VarId> = inst.cell_faults(c).iter().map(|&n| vars.repair_end[n]).collect();
            exact_max(mb, "cell-clear", &format!("TNCR{c}"), target, &ops, m);
        }
    }
    for q in 0..inst.switches.len() {
        if let Some(target) = vars.switch_clear[q] {
            let ops: Vec<VarId> =
                inst.cells.switch_cells(q).iter().filter_map(|&c| vars.cell_clear[c]).collect();
            exact_max(mb, "switch-clear", &format!("TNCRMS{q}"), target, &ops, m);
        }
    }

    for r in &vars.operating {
        for &q in &r.tasks {
            let safe = r.safe_start[&q];
            let mut ops = vec![r.arrival[&q]];
            ops.extend(vars.switch_clear[q]);
            exact_max(mb, "safe-start", &format!("TOCS{q},{}", r.crew), safe, &ops, m);
        }
    }
    for q in 0..inst.switches.len() {
        let Some(end) = vars.operation_end[q] else { continue };
        let mut pick = LinExpr::new();
        let mut any_visit = LinExpr::new();
        for &(oc, _) in &vars.beta_oc[q] {
            any_visit += vars.operating[oc].incoming(q);
        }
        for &(oc, beta) in &vars.beta_oc[q] {
            let r = &vars.operating[oc];
            let done = r.safe_start[&q] + inst.crews.operating[oc].operate_minutes[q];
            let name = format!("switch{q}:oc{oc}");
            mb.ge("operation-end", format!("{name}:lo"), Family::I, end, done.clone() + beta * m - m);
            mb.le("operation-end", format!("{name}:hi"), Family::I, end, done - beta * m + m);
            // an unvisited switch may take any selector; its end time then exceeds the horizon
            mb.le("selector", format!("{name}:visited"), Family::I, beta, r.incoming(q) - any_visit.clone() + 1.0);
            pick += beta;
        }
        mb.eq("selector", format!("switch{q}:pick"), Family::I, pick, 1.0);
    }
}

/// `u = 1` iff the slot start is at or after `time - eps`.
fn step_rows(mb: &mut ModelBuilder, tag: &'static str, name: &str, u: VarId, time: VarId, start: f64, eps: f64, m: f64) {
    mb.le(tag, format!("{name}:hi"), Family::I, u * m + time, m + start + eps);
    mb.ge(tag, format!("{name}:lo"), Family::I, u * m + time, start + eps);
}

/// Fault, cell and manual-switch status timelines.
pub fn emit_status_timelines(inst: &Instance, vars: &CrewVars, mb: &mut ModelBuilder) {
    let m = status_m(inst);
    let eps = inst.horizon.epsilon;
    for n in 0..inst.faults.len() {
        for t in 1..=inst.slots() {
            let u = vars.u_line[n][t - 1];
            step_rows(mb, "fault-status", &format!("uL{n},{t}"), u, vars.repair_end[n], inst.horizon.slot_start(t), eps, m);
        }
    }
    for c in 0..inst.cells.len() {
        for t in 1..=inst.slots() {
            for &n in inst.cell_faults(c) {
                mb.le("cell-status", format!("uNC{c},{t}:f{n}"), Family::I, vars.u_cell[c][t - 1], vars.u_line[n][t - 1]);
            }
        }
    }
    for q in 0..inst.switches.len() {
        let (Some(w), Some(end)) = (&vars.w_manual[q], vars.operation_end[q]) else { continue };
        for t in 1..=inst.slots() {
            step_rows(mb, "manual-close", &format!("wMS{q},{t}"), w[t - 1], end, inst.horizon.slot_start(t), eps, m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn single_crew_takes_everything() {
        let sites = [[10.0, 0.0], [5.0, 5.0], [100.0, 3.0]];
        let out = balanced_assignment(&[[0.0, 0.0]], &sites, &keys(3));
        assert_eq!(out, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn identical_depots_split_by_task_key() {
        let sites = [[10.0, 0.0]; 4];
        let out = balanced_assignment(&[[0.0, 0.0], [0.0, 0.0]], &sites, &keys(4));
        // every pair ties on distance; keys f0..f3 go in order, crew 0 first
        assert_eq!(out, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn eight_faults_two_crews_four_each() {
        let sites: Vec<[f64; 2]> = (0..8).map(|i| [i as f64 * 100.0, 0.0]).collect();
        let out = balanced_assignment(&[[0.0, 0.0], [50.0, 0.0]], &sites, &keys(8));
        assert_eq!(out[0].len(), 4);
        assert_eq!(out[1].len(), 4);
    }

    #[test]
    fn nearest_depot_wins_when_capacity_allows() {
        let sites = [[0.0, 1.0], [1000.0, 1.0]];
        let out = balanced_assignment(&[[1000.0, 0.0], [0.0, 0.0]], &sites, &keys(2));
        assert_eq!(out, vec![vec![1], vec![0]]);
    }
}
