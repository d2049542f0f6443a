//! First-stage schedule in domain terms, decoded from a solution vector.

use serde::{Deserialize, Serialize};

use crate::assemble::CompactModel;
use crate::crew::{RouteVars, DEPOT};
use crate::instance::Instance;
use crate::model::VarId;

/// Routes and per-slot binary timelines. Timelines are `[entity][slot - 1]`
/// with entries 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FirstStageDecision {
    /// Fault indices per repair crew in visit order.
    pub repair_routes: Vec<Vec<usize>>,
    /// Switch task indices per operating crew in visit order.
    pub operating_routes: Vec<Vec<usize>>,
    pub fault_repaired: Vec<Vec<u8>>,
    pub cell_energizable: Vec<Vec<u8>>,
    pub closed_manually: Vec<Vec<u8>>,
    pub closed_remotely: Vec<Vec<u8>>,
    pub closed: Vec<Vec<u8>>,
    /// Router availability; the control centre is always 1.
    pub router_up: Vec<Vec<u8>>,
    pub ups_alive: Vec<Vec<u8>>,
    pub root: Vec<Vec<u8>>,
}

fn bit(x: &[f64], v: VarId) -> u8 {
    u8::from(x[v.0] > 0.5)
}

fn timeline(x: &[f64], vars: &[VarId]) -> Vec<u8> {
    vars.iter().map(|&v| bit(x, v)).collect()
}

fn follow(route: &RouteVars, x: &[f64]) -> Vec<usize> {
    let mut order = Vec::new();
    let mut at = DEPOT;
    loop {
        let next = route.arcs.iter().find(|(k, &v)| k.0 == at && x[v.0] > 0.5).map(|(k, _)| k.1);
        match next {
            Some(DEPOT) | None => break,
            Some(n) if order.contains(&n) => break,
            Some(n) => {
                order.push(n);
                at = n;
            }
        }
    }
    order
}

impl FirstStageDecision {
    /// Decodes a full variable vector (as in a solve report).
    pub fn from_solution(inst: &Instance, cm: &CompactModel, x: &[f64]) -> FirstStageDecision {
        let l = &cm.layout;
        let slots = inst.slots();
        let zeros = vec![0u8; slots];
        let ones = vec![1u8; slots];
        let optional = |v: &Option<Vec<VarId>>, fill: &Vec<u8>| v.as_ref().map_or_else(|| fill.clone(), |v| timeline(x, v));
        FirstStageDecision {
            repair_routes: l.crew.repair.iter().map(|r| follow(r, x)).collect(),
            operating_routes: l.crew.operating.iter().map(|r| follow(r, x)).collect(),
            fault_repaired: l.crew.u_line.iter().map(|v| timeline(x, v)).collect(),
            cell_energizable: l.crew.u_cell.iter().map(|v| timeline(x, v)).collect(),
            closed_manually: l.crew.w_manual.iter().map(|v| optional(v, &zeros)).collect(),
            closed_remotely: l.cyber.w_remote.iter().map(|v| optional(v, &zeros)).collect(),
            closed: l.grid.w.iter().map(|v| timeline(x, v)).collect(),
            router_up: l.cyber.avail.iter().map(|v| optional(v, &ones)).collect(),
            ups_alive: l.cyber.ups.iter().map(|v| optional(v, &ones)).collect(),
            root: l.grid.root.iter().map(|v| timeline(x, v)).collect(),
        }
    }
}
