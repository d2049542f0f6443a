//! Minimal-shedding operation LP for a fixed schedule.
//!
//! Built directly from the instance with every schedule status folded into
//! variable bounds, independently of the solver's row emitters.

use restoration_core::backend::{LinearProgram, SolveParams, SolverBackend, Status};
use restoration_core::instance::SourceKind;
use restoration_core::{FirstStageDecision, Instance, SolveError};

/// Shedding outcome over the horizon.
#[derive(Debug, Clone)]
pub struct Operation {
    pub cost: f64,
    /// `[node][slot - 1]` shed active power (kW).
    pub shed: Vec<Vec<f64>>,
    /// Penalty cost accrued in each slot.
    pub slot_cost: Vec<f64>,
}

struct Cols {
    shed: Vec<Vec<usize>>,
}

fn build(inst: &Instance, d: &FirstStageDecision, available: &[Vec<f64>]) -> (LinearProgram, Cols) {
    let net = &inst.network;
    let slots = inst.slots();
    let h = inst.horizon.slot_hours();
    let scale = 1000.0 / net.nominal_voltage;
    let mut lp = LinearProgram::default();
    let on = |cell: usize, t: usize| d.cell_energizable[cell][t - 1] == 1;
    let node_on = |i: usize, t: usize| on(inst.cells.cell_of_node[i], t);
    let switch_of = |l: usize| inst.switches.iter().position(|&s| s == l);

    let mut shed = vec![Vec::new(); net.nodes.len()];
    let mut gen_p: Vec<Vec<usize>> = vec![Vec::new(); net.sources.len()];
    for t in 1..=slots {
        let mut p_bal: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.nodes.len()];
        let mut q_bal: Vec<Vec<(usize, f64)>> = vec![Vec::new(); net.nodes.len()];
        let volt: Vec<usize> = (0..net.nodes.len()).map(|_| lp.add_col(net.v_min, net.v_max, 0.0, false)).collect();
        for (i, node) in net.nodes.iter().enumerate() {
            let load = node.load[t - 1];
            let lo = if node_on(i, t) { 0.0 } else { load };
            let s = lp.add_col(lo, load, node.penalty * h, false);
            shed[i].push(s);
            p_bal[i].push((s, 1.0));
            q_bal[i].push((s, node.q_ratio()));
        }
        for (k, src) in net.sources.iter().enumerate() {
            let live = node_on(src.node, t);
            let cap = match src.kind {
                SourceKind::Res => inst
                    .uncertainty
                    .res
                    .iter()
                    .position(|r| r.source == k)
                    .map_or(src.p_max[t - 1], |e| available[e][t - 1]),
                _ => src.p_max[t - 1],
            };
            let (p_hi, q_hi) = if live { (cap, src.q_max[t - 1]) } else { (0.0, 0.0) };
            let p = lp.add_col(0.0, p_hi, 0.0, false);
            let q = lp.add_col(-q_hi, q_hi, 0.0, false);
            gen_p[k].push(p);
            p_bal[src.node].push((p, 1.0));
            q_bal[src.node].push((q, 1.0));
        }
        for (l, line) in net.lines.iter().enumerate() {
            let usable = match switch_of(l) {
                Some(q) => d.closed[q][t - 1] == 1,
                None => node_on(line.from, t),
            };
            let (pm, qm) = if usable { (line.p_max, line.q_max) } else { (0.0, 0.0) };
            let p = lp.add_col(-pm, pm, 0.0, false);
            let q = lp.add_col(-qm, qm, 0.0, false);
            p_bal[line.from].push((p, -1.0));
            p_bal[line.to].push((p, 1.0));
            q_bal[line.from].push((q, -1.0));
            q_bal[line.to].push((q, 1.0));
            if usable || switch_of(l).is_none() {
                lp.add_row(
                    0.0,
                    0.0,
                    vec![(volt[line.from], 1.0), (volt[line.to], -1.0), (p, -line.r * scale), (q, -line.x * scale)],
                );
            }
        }
        for (i, node) in net.nodes.iter().enumerate() {
            let load = node.load[t - 1];
            lp.add_row(load, load, std::mem::take(&mut p_bal[i]));
            lp.add_row(load * node.q_ratio(), load * node.q_ratio(), std::mem::take(&mut q_bal[i]));
        }
        // routers running on grid power need their node served
        for (c, router) in inst.cyber.routers.iter().enumerate() {
            if c == inst.cyber.centre || router.power <= 0.0 {
                continue;
            }
            let Some(i) = router.node else { continue };
            if d.router_up[c][t - 1] == 1 && d.ups_alive[c][t - 1] == 0 {
                let load = net.nodes[i].load[t - 1];
                lp.add_row(f64::NEG_INFINITY, load - router.power, vec![(shed[i][t - 1], 1.0)]);
            }
        }
    }

    for (k, src) in net.sources.iter().enumerate() {
        if src.kind != SourceKind::Gt {
            continue;
        }
        let up = src.ramp_up * src.reserve_factor;
        let down = src.ramp_down * src.reserve_factor;
        for t in 1..=slots {
            let mut delta = vec![(gen_p[k][t - 1], 1.0)];
            if t > 1 {
                delta.push((gen_p[k][t - 2], -1.0));
            }
            let lo = if down < src.rated() { -down } else { f64::NEG_INFINITY };
            let hi = if up < src.rated() { up } else { f64::INFINITY };
            if lo.is_finite() || hi.is_finite() {
                lp.add_row(lo, hi, delta);
            }
        }
    }

    // served load may grow per slot by at most the frequency response of live DERs
    let start_cells: Vec<usize> = net.initially_energized.iter().map(|&n| inst.cells.cell_of_node[n]).collect();
    let served_before: f64 = (0..net.nodes.len())
        .filter(|&i| start_cells.contains(&inst.cells.cell_of_node[i]))
        .map(|i| net.nodes[i].load[0])
        .sum();
    for t in 1..=slots {
        let mut budget = 0.0;
        for src in &net.sources {
            if matches!(src.kind, SourceKind::Gt | SourceKind::Res) && src.frr > 0.0 && node_on(src.node, t) {
                budget += src.rated() * src.frr;
            }
        }
        let mut terms = Vec::new();
        let mut rhs = budget + if t == 1 { served_before } else { 0.0 };
        for (i, node) in net.nodes.iter().enumerate() {
            terms.push((shed[i][t - 1], -1.0));
            rhs -= node.load[t - 1];
            if t > 1 {
                terms.push((shed[i][t - 2], 1.0));
                rhs += node.load[t - 2];
            }
        }
        lp.add_row(f64::NEG_INFINITY, rhs, terms);
    }
    (lp, Cols { shed })
}

/// Solves the operation LP. `Ok(None)` means no feasible operation exists.
pub fn solve_operation(
    inst: &Instance,
    d: &FirstStageDecision,
    available: &[Vec<f64>],
    backend: &dyn SolverBackend,
) -> Result<Option<Operation>, SolveError> {
    let (lp, cols) = build(inst, d, available);
    let sol = backend.solve(&lp, &SolveParams::default())?;
    match sol.status {
        Status::Optimal | Status::Feasible => {}
        Status::Infeasible => return Ok(None),
        Status::Unbounded => return Err(SolveError::Backend("operation LP unbounded".into())),
    }
    let h = inst.horizon.slot_hours();
    let shed: Vec<Vec<f64>> =
        cols.shed.iter().map(|row| row.iter().map(|&c| sol.primal[c].max(0.0)).collect()).collect();
    let slot_cost = (0..inst.slots())
        .map(|t| inst.network.nodes.iter().enumerate().map(|(i, n)| n.penalty * h * shed[i][t]).sum())
        .collect();
    Ok(Some(Operation { cost: sol.objective, shed, slot_cost }))
}
