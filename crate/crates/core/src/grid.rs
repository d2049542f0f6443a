//! Physical operation: shedding, source limits, linearized DistFlow,
//! frequency-response pickup limits and radiality of the cell graph.

use crate::crew::CrewVars;
use crate::instance::{Instance, SourceKind};
use crate::model::{Family, LinExpr, ModelBuilder, VarId};
use crate::uncertainty::UncertaintyVars;

#[derive(Debug, Clone)]
pub struct GridVars {
    /// Closed status per switch task per slot.
    pub w: Vec<Vec<VarId>>,
    /// Root flag per cell per slot.
    pub root: Vec<Vec<VarId>>,
    /// Commodity flow per switch edge per slot.
    pub commodity: Vec<Vec<VarId>>,
    pub shed: Vec<Vec<VarId>>,
    pub volt: Vec<Vec<VarId>>,
    pub p_src: Vec<Vec<VarId>>,
    pub q_src: Vec<Vec<VarId>>,
    /// RES output ceiling after status gating, per source (RES only).
    pub alpha: Vec<Option<Vec<VarId>>>,
    pub p_line: Vec<Vec<VarId>>,
    pub q_line: Vec<Vec<VarId>>,
}

impl GridVars {
    pub fn allocate(inst: &Instance, mb: &mut ModelBuilder) -> GridVars {
        let slots = 1..=inst.slots();
        let net = &inst.network;
        let m = inst.big_m.commodity;
        let w = (0..inst.switches.len())
            .map(|q| slots.clone().map(|t| mb.binary(format!("w[{q},{t}]"))).collect())
            .collect();
        let root = (0..inst.cells.len())
            .map(|c| slots.clone().map(|t| mb.binary(format!("xi[{c},{t}]"))).collect())
            .collect();
        let commodity = (0..inst.switches.len())
            .map(|q| slots.clone().map(|t| mb.first(format!("F[{q},{t}]"), -m, m)).collect())
            .collect();
        let shed = net
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| slots.clone().map(|t| mb.second(format!("Pshed[{i},{t}]"), 0.0, n.load[t - 1])).collect())
            .collect();
        let volt = (0..net.nodes.len())
            .map(|i| slots.clone().map(|t| mb.second(format!("V[{i},{t}]"), net.v_min, net.v_max)).collect())
            .collect();
        let mut p_src = Vec::new();
        let mut q_src = Vec::new();
        let mut alpha = Vec::new();
        for (s, src) in net.sources.iter().enumerate() {
            let p_ub = |t: usize| if src.kind == SourceKind::Res { f64::INFINITY } else { src.p_max[t - 1] };
            p_src.push(slots.clone().map(|t| mb.second(format!("P{:?}[{s},{t}]", src.kind), 0.0, p_ub(t))).collect());
            q_src.push(
                slots
                    .clone()
                    .map(|t| mb.second(format!("Q{:?}[{s},{t}]", src.kind), -src.q_max[t - 1], src.q_max[t - 1]))
                    .collect(),
            );
            alpha.push(
                (src.kind == SourceKind::Res)
                    .then(|| slots.clone().map(|t| mb.second(format!("alpha[{s},{t}]"), 0.0, f64::INFINITY)).collect()),
            );
        }
        let p_line = net
            .lines
            .iter()
            .enumerate()
            .map(|(l, ln)| slots.clone().map(|t| mb.second(format!("PL[{l},{t}]"), -ln.p_max, ln.p_max)).collect())
            .collect();
        let q_line = net
            .lines
            .iter()
            .enumerate()
            .map(|(l, ln)| slots.clone().map(|t| mb.second(format!("QL[{l},{t}]"), -ln.q_max, ln.q_max)).collect())
            .collect();
        GridVars { w, root, commodity, shed, volt, p_src, q_src, alpha, p_line, q_line }
    }
}

fn source_cell(inst: &Instance, s: usize) -> usize {
    inst.cells.cell_of_node[inst.network.sources[s].node]
}

/// Load shedding bounds, source gating, RES availability linkage and GT ramping.
pub fn emit_source_and_load_limits(
    inst: &Instance,
    crew: &CrewVars,
    grid: &GridVars,
    unc: &UncertaintyVars,
    mb: &mut ModelBuilder,
) {
    let net = &inst.network;
    for (i, node) in net.nodes.iter().enumerate() {
        let cell = inst.cells.cell_of_node[i];
        for t in 1..=inst.slots() {
            let load = node.load[t - 1];
            if load > 0.0 {
                let u = crew.u_cell[cell][t - 1];
                mb.ge("shed-floor", format!("shed{i},{t}"), Family::II, grid.shed[i][t - 1] + u * load, load);
            }
        }
    }
    let m_res = inst.big_m.res;
    for (s, src) in net.sources.iter().enumerate() {
        let cell = source_cell(inst, s);
        let res = inst.uncertainty.res.iter().position(|r| r.source == s);
        for t in 1..=inst.slots() {
            let u = crew.u_cell[cell][t - 1];
            let p = grid.p_src[s][t - 1];
            let q = grid.q_src[s][t - 1];
            let qm = src.q_max[t - 1];
            let name = format!("src{s},{t}");
            mb.le("source-gate", format!("{name}:q-hi"), Family::II, q, u * qm);
            mb.ge("source-gate", format!("{name}:q-lo"), Family::II, q, u * -qm);
            match (src.kind, res) {
                (SourceKind::Res, Some(k)) => {
                    let alpha = grid.alpha[s].as_ref().expect("RES ceiling")[t - 1];
                    let avail = unc.available[k][t - 1];
                    mb.le("res-ceiling", format!("{name}:p"), Family::II, p, alpha);
                    mb.le("res-ceiling", format!("{name}:gate"), Family::II, alpha, u * m_res);
                    mb.le("res-ceiling", format!("{name}:avail"), Family::II, alpha, avail);
                    mb.ge("res-ceiling", format!("{name}:floor"), Family::II, alpha, avail + u * m_res - m_res);
                }
                _ => {
                    mb.le("source-gate", format!("{name}:p"), Family::II, p, u * src.p_max[t - 1]);
                }
            }
        }
        if src.kind == SourceKind::Gt {
            let up = src.ramp_up * src.reserve_factor;
            let down = src.ramp_down * src.reserve_factor;
            for t in 1..=inst.slots() {
                let now = grid.p_src[s][t - 1];
                let delta = if t == 1 { LinExpr::from(now) } else { now - grid.p_src[s][t - 2] };
                if up < src.rated() {
                    mb.le("ramp", format!("gt{s},{t}:up"), Family::II, delta.clone(), up);
                }
                if down < src.rated() {
                    mb.ge("ramp", format!("gt{s},{t}:down"), Family::II, delta, -down);
                }
            }
        }
    }
}

/// Nodal balance, voltage drop and line capacity.
pub fn emit_power_flow(inst: &Instance, crew: &CrewVars, grid: &GridVars, mb: &mut ModelBuilder) {
    let net = &inst.network;
    let scale = 1000.0 / net.nominal_voltage;
    let switch_of_line: Vec<Option<usize>> = {
        let mut v = vec![None; net.lines.len()];
        for (q, &l) in inst.switches.iter().enumerate() {
            v[l] = Some(q);
        }
        v
    };
    for t in 1..=inst.slots() {
        for (i, node) in net.nodes.iter().enumerate() {
            let mut p = LinExpr::from(grid.shed[i][t - 1]);
            let mut q = LinExpr::term(grid.shed[i][t - 1], node.q_ratio());
            for (l, line) in net.lines.iter().enumerate() {
                if line.to == i {
                    p.add_term(grid.p_line[l][t - 1], 1.0);
                    q.add_term(grid.q_line[l][t - 1], 1.0);
                }
                if line.from == i {
                    p.add_term(grid.p_line[l][t - 1], -1.0);
                    q.add_term(grid.q_line[l][t - 1], -1.0);
                }
            }
            for (s, src) in net.sources.iter().enumerate() {
                if src.node == i {
                    p.add_term(grid.p_src[s][t - 1], 1.0);
                    q.add_term(grid.q_src[s][t - 1], 1.0);
                }
            }
            let load = node.load[t - 1];
            mb.eq("balance", format!("p{i},{t}"), Family::II, p, load);
            mb.eq("balance", format!("q{i},{t}"), Family::II, q, load * node.q_ratio());
        }
        for (l, line) in net.lines.iter().enumerate() {
            let pl = grid.p_line[l][t - 1];
            let ql = grid.q_line[l][t - 1];
            let drop = LinExpr::from(grid.volt[line.from][t - 1]) - grid.volt[line.to][t - 1]
                - pl * (line.r * scale)
                - ql * (line.x * scale);
            let name = format!("line{l},{t}");
            let gate = match switch_of_line[l] {
                Some(q) => grid.w[q][t - 1],
                None => crew.u_cell[inst.cells.cell_of_node[line.from]][t - 1],
            };
            match switch_of_line[l] {
                Some(_) => {
                    let mv = (net.v_max - net.v_min) + (line.r * line.p_max + line.x * line.q_max) * scale;
                    mb.le("voltage-drop", format!("{name}:hi"), Family::II, drop.clone(), gate * -mv + mv);
                    mb.ge("voltage-drop", format!("{name}:lo"), Family::II, drop, gate * mv - mv);
                }
                None => mb.eq("voltage-drop", format!("{name}:eq"), Family::II, drop, 0.0),
            }
            mb.le("capacity", format!("{name}:p-hi"), Family::II, pl, gate * line.p_max);
            mb.ge("capacity", format!("{name}:p-lo"), Family::II, pl, gate * -line.p_max);
            mb.le("capacity", format!("{name}:q-hi"), Family::II, ql, gate * line.q_max);
            mb.ge("capacity", format!("{name}:q-lo"), Family::II, ql, gate * -line.q_max);
        }
    }
}

/// Slot-1 load of the nodes in initially energized cells.
pub fn initial_served_load(inst: &Instance) -> f64 {
    let cells: Vec<usize> = inst.network.initially_energized.iter().map(|&n| inst.cells.cell_of_node[n]).collect();
    inst.network
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| cells.contains(&inst.cells.cell_of_node[*i]))
        .map(|(_, n)| n.load.first().copied().unwrap_or(0.0))
        .sum()
}

/// Per-slot load pickup limited by the frequency response of energized DERs.
pub fn emit_frr(inst: &Instance, crew: &CrewVars, grid: &GridVars, mb: &mut ModelBuilder) {
    let net = &inst.network;
    let initial = initial_served_load(inst);
    for t in 1..=inst.slots() {
        // restored_t - restored_{t-1}; before the first slot only initially energized cells are served
        let mut pickup = LinExpr::new();
        for (i, node) in net.nodes.iter().enumerate() {
            pickup += LinExpr::constant(node.load[t - 1]) - grid.shed[i][t - 1];
            if t > 1 {
                pickup += grid.shed[i][t - 2] - node.load[t - 2];
            }
        }
        if t == 1 {
            pickup += LinExpr::constant(-initial);
        }
        let mut budget = LinExpr::new();
        for (s, src) in net.sources.iter().enumerate() {
            if matches!(src.kind, SourceKind::Gt | SourceKind::Res) && src.frr > 0.0 {
                budget.add_term(crew.u_cell[source_cell(inst, s)][t - 1], src.rated() * src.frr);
            }
        }
        mb.le("frr", format!("frr{t}"), Family::II, pickup, budget);
    }
}

/// Single-commodity radiality over the cell graph.
pub fn emit_radiality(inst: &Instance, grid: &GridVars, mb: &mut ModelBuilder) {
    let m = inst.big_m.commodity;
    let cells = &inst.cells;
    let slots = inst.slots();
    for t in 1..=slots {
        for c in 0..cells.len() {
            let mut net_in = LinExpr::new();
            for (q, e) in cells.edges.iter().enumerate() {
                if e.to == c {
                    net_in.add_term(grid.commodity[q][t - 1], 1.0);
                }
                if e.from == c {
                    net_in.add_term(grid.commodity[q][t - 1], -1.0);
                }
            }
            let xi = grid.root[c][t - 1];
            let name = format!("cell{c},{t}");
            mb.ge("commodity", format!("{name}:lo"), Family::II, net_in.clone(), xi * -m + 1.0);
            mb.le("commodity", format!("{name}:hi"), Family::II, net_in, xi * m + 1.0);
        }
        for q in 0..cells.edges.len() {
            let f = grid.commodity[q][t - 1];
            let w = grid.w[q][t - 1];
            mb.le("commodity-gate", format!("F{q},{t}:hi"), Family::II, f, w * m);
            mb.ge("commodity-gate", format!("F{q},{t}:lo"), Family::II, f, w * -m);
        }
        let count = LinExpr::sum((0..cells.edges.len()).map(|q| grid.w[q][t - 1]))
            + LinExpr::sum((0..cells.len()).map(|c| grid.root[c][t - 1]));
        mb.eq("edge-count", format!("count{t}"), Family::II, count, cells.len() as f64);
    }
    if slots > 0 {
        mb.eq("final-root", "final", Family::II, LinExpr::sum((0..cells.len()).map(|c| grid.root[c][slots - 1])), 1.0);
    }
}

/// Penalty-weighted shed energy.
pub fn emit_objective(inst: &Instance, grid: &GridVars, mb: &mut ModelBuilder) {
    let h = inst.horizon.slot_hours();
    for (i, node) in inst.network.nodes.iter().enumerate() {
        for t in 1..=inst.slots() {
            mb.add_objective(grid.shed[i][t - 1], node.penalty * h);
        }
    }
}
