//! D2D cyber network: link derivation, router availability, power
//! dependency and remote switching.

use crate::crew::{status_m, CrewVars};
use crate::error::InstanceError;
use crate::grid::GridVars;
use crate::instance::{CyberNetwork, Instance};
use crate::model::{Family, LinExpr, ModelBuilder, Stage, VarId, VarKind};
use crate::travel::euclidean;

/// Enumerates, per router, the simple paths to the control centre of at
/// most `hop_limit` hops whose consecutive routers lie within the radius.
/// Paths are ordered by hop count, then total length.
pub fn derive_cyber_links(net: &CyberNetwork) -> Result<Vec<Vec<Vec<usize>>>, InstanceError> {
    let n = net.routers.len();
    if net.centre >= n {
        return Err(InstanceError::Cyber("control centre missing".into()));
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| b != a && euclidean(net.routers[a].pos, net.routers[b].pos) <= net.radius + 1e-9)
                .collect()
        })
        .collect();
    let length = |p: &[usize]| -> f64 {
        p.windows(2).map(|w| euclidean(net.routers[w[0]].pos, net.routers[w[1]].pos)).sum()
    };
    let mut links = vec![Vec::new(); n];
    for (start, out) in links.iter_mut().enumerate() {
        if start == net.centre {
            continue;
        }
        let mut found = Vec::new();
        let mut path = vec![start];
        walk(&adj, net.centre, net.hop_limit, &mut path, &mut found);
        let mut keyed: Vec<(usize, f64, Vec<usize>)> =
            found.into_iter().map(|p| (p.len() - 1, length(&p), p)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(&b.2)));
        *out = keyed.into_iter().map(|k| k.2).collect();
    }
    Ok(links)
}

fn walk(adj: &[Vec<usize>], centre: usize, hops: usize, path: &mut Vec<usize>, found: &mut Vec<Vec<usize>>) {
    let last = *path.last().unwrap();
    if last == centre {
        found.push(path.clone());
        return;
    }
    if path.len() > hops {
        return;
    }
    for &next in &adj[last] {
        if !path.contains(&next) {
            path.push(next);
            walk(adj, centre, hops, path, found);
            path.pop();
        }
    }
}

#[derive(Debug, Clone)]
pub struct CyberVars {
    /// Router availability per slot; `None` for the control centre (always 1).
    pub avail: Vec<Option<Vec<VarId>>>,
    /// `[router][link][slot]`
    pub link: Vec<Vec<Vec<VarId>>>,
    /// UPS status per router per slot; `None` for the control centre.
    pub ups: Vec<Option<Vec<VarId>>>,
    /// Remote close status per switch; `None` unless an RCS with a controller.
    pub w_remote: Vec<Option<Vec<VarId>>>,
    /// Latest adjacent-cell clearing time for remote operation.
    pub remote_clear: Vec<Option<VarId>>,
}

impl CyberVars {
    pub fn allocate(inst: &Instance, crew: &CrewVars, mb: &mut ModelBuilder) -> CyberVars {
        let cy = &inst.cyber;
        let slots = 1..=inst.slots();
        let mut avail = Vec::new();
        let mut link = Vec::new();
        let mut ups = Vec::new();
        for (c, _) in cy.routers.iter().enumerate() {
            if c == cy.centre {
                avail.push(None);
                link.push(Vec::new());
                ups.push(None);
                continue;
            }
            let reachable = !cy.links[c].is_empty();
            let ub = if reachable { 1.0 } else { 0.0 };
            avail.push(Some(
                slots.clone().map(|t| mb.add_var(format!("uC[{c},{t}]"), VarKind::Binary, 0.0, ub, Stage::First)).collect(),
            ));
            link.push(
                (0..cy.links[c].len())
                    .map(|k| slots.clone().map(|t| mb.binary(format!("uLink[{c},{k},{t}]"))).collect())
                    .collect(),
            );
            ups.push(Some(slots.clone().map(|t| mb.binary(format!("uUPS[{c},{t}]"))).collect()));
        }
        let mut w_remote = Vec::new();
        let mut remote_clear = Vec::new();
        for q in 0..inst.switches.len() {
            let controlled = inst.is_remote(q) && cy.controller_of(q).is_some();
            w_remote.push(controlled.then(|| slots.clone().map(|t| mb.binary(format!("wRCS[{q},{t}]"))).collect()));
            let faulty = inst.cells.switch_cells(q).iter().any(|&c| crew.cell_clear[c].is_some());
            remote_clear.push(
                (controlled && faulty).then(|| mb.first(format!("TNCRRCS[{q}]"), 0.0, inst.big_m.routing)),
            );
        }
        CyberVars { avail, link, ups, w_remote, remote_clear }
    }

    fn avail_expr(&self, c: usize, t: usize) -> LinExpr {
        match &self.avail[c] {
            Some(v) => LinExpr::from(v[t - 1]),
            None => LinExpr::constant(1.0),
        }
    }
}

/// Link and router availability rows.
pub fn emit_cyber_availability(inst: &Instance, vars: &CyberVars, mb: &mut ModelBuilder) {
    let cy = &inst.cyber;
    for (c, links) in cy.links.iter().enumerate() {
        let Some(avail) = &vars.avail[c] else { continue };
        for t in 1..=inst.slots() {
            let mut any = LinExpr::new();
            for (k, members) in links.iter().enumerate() {
                let ul = vars.link[c][k][t - 1];
                let mut up = LinExpr::new();
                for &m in members {
                    up += vars.avail_expr(m, t);
                }
                mb.le("link-avail", format!("link{c},{k},{t}"), Family::I, ul * members.len() as f64, up);
                any += ul;
            }
            if !links.is_empty() {
                mb.le("router-avail", format!("router{c},{t}"), Family::I, avail[t - 1], any);
            }
        }
    }
}

/// UPS step timelines and the served-power requirement of routers.
pub fn emit_cyber_power_dependency(inst: &Instance, cyber: &CyberVars, grid: &GridVars, mb: &mut ModelBuilder) {
    let cy = &inst.cyber;
    let m = status_m(inst);
    let eps = inst.horizon.epsilon;
    for (c, router) in cy.routers.iter().enumerate() {
        let (Some(avail), Some(ups)) = (&cyber.avail[c], &cyber.ups[c]) else { continue };
        for t in 1..=inst.slots() {
            let u = ups[t - 1];
            let slack = router.ups - t as f64 * inst.horizon.slot_length + eps;
            mb.ge("ups", format!("ups{c},{t}:lo"), Family::II, u, slack / m);
            mb.le("ups", format!("ups{c},{t}:hi"), Family::II, u, 1.0 + slack / m);
            if let Some(i) = router.node {
                if router.power > 0.0 {
                    let load = inst.network.nodes[i].load[t - 1];
                    // router up only if its UPS is alive or its node is served at least its draw
                    let served = (LinExpr::constant(load) - grid.shed[i][t - 1]) * (1.0 / router.power);
                    mb.le("router-power", format!("power{c},{t}"), Family::II, avail[t - 1], served + u);
                }
            }
        }
    }
}

/// Remote-close gating, monotone remote status and the manual/remote merge.
pub fn emit_remote_switching(inst: &Instance, crew: &CrewVars, cyber: &CyberVars, grid: &GridVars, mb: &mut ModelBuilder) {
    let m = status_m(inst);
    let eps = inst.horizon.epsilon;
    for q in 0..inst.switches.len() {
        if let Some(target) = cyber.remote_clear[q] {
            for &c in &inst.cells.switch_cells(q) {
                if let Some(clear) = crew.cell_clear[c] {
                    mb.ge("remote-clear", format!("TNCRRCS{q}:c{c}"), Family::II, target, clear);
                }
            }
        }
        if let Some(wr) = &cyber.w_remote[q] {
            let controller = inst.cyber.controller_of(q).expect("controlled switch");
            let op = inst.crews.remote_minutes[q];
            for t in 1..=inst.slots() {
                let name = format!("wRCS{q},{t}");
                mb.le("remote-gate", format!("{name}:router"), Family::II, wr[t - 1], cyber.avail_expr(controller, t));
                let start = inst.horizon.slot_start(t);
                let clear = match cyber.remote_clear[q] {
                    Some(v) => LinExpr::from(v),
                    None => LinExpr::new(),
                };
                mb.le("remote-gate", format!("{name}:time"), Family::II, wr[t - 1] * m + clear, m + start - op + eps);
                if t > 1 {
                    mb.le("remote-monotone", name.clone(), Family::II, wr[t - 2], wr[t - 1]);
                }
            }
        }
        for t in 1..=inst.slots() {
            let mut either = LinExpr::new();
            if let Some(wm) = &crew.w_manual[q] {
                either += wm[t - 1];
            }
            if let Some(wr) = &cyber.w_remote[q] {
                either += wr[t - 1];
            }
            let w = grid.w[q][t - 1];
            let name = format!("merge{q},{t}");
            mb.le("merge", format!("{name}:lo"), Family::II, either.clone() * 0.5, w);
            mb.le("merge", format!("{name}:hi"), Family::II, w, either);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Router, RouterRole};

    fn router(id: &str, role: RouterRole, x: f64) -> Router {
        Router { id: id.into(), role, pos: [x, 0.0], node: None, switch: None, power: 0.075, ups: 0.0 }
    }

    fn net(routers: Vec<Router>) -> CyberNetwork {
        CyberNetwork { routers, centre: 0, radius: 1000.0, hop_limit: 4, links: Vec::new() }
    }

    #[test]
    fn close_router_has_one_direct_link() {
        let n = net(vec![router("cc", RouterRole::ControlCentre, 0.0), router("r", RouterRole::Gt, 900.0)]);
        let links = derive_cyber_links(&n).unwrap();
        assert_eq!(links[1], vec![vec![1, 0]]);
        assert!(links[0].is_empty());
    }

    #[test]
    fn far_router_goes_through_midpoint_relay() {
        let n = net(vec![
            router("cc", RouterRole::ControlCentre, 0.0),
            router("r", RouterRole::RcsFtu, 1500.0),
            router("relay", RouterRole::Relay, 750.0),
        ]);
        let links = derive_cyber_links(&n).unwrap();
        assert_eq!(links[1], vec![vec![1, 2, 0]]);
        assert_eq!(links[2], vec![vec![2, 0]]);
    }

    #[test]
    fn isolated_router_has_no_links() {
        let n = net(vec![router("cc", RouterRole::ControlCentre, 0.0), router("r", RouterRole::Res, 5000.0)]);
        assert!(derive_cyber_links(&n).unwrap()[1].is_empty());
    }

    #[test]
    fn hop_limit_prunes_long_paths() {
        let mut routers = vec![router("cc", RouterRole::ControlCentre, 0.0)];
        for k in 1..=5 {
            routers.push(router(&format!("r{k}"), RouterRole::Relay, 900.0 * k as f64));
        }
        let mut n = net(routers);
        n.hop_limit = 3;
        let links = derive_cyber_links(&n).unwrap();
        assert_eq!(links[3], vec![vec![3, 2, 1, 0]]);
        assert!(links[4].is_empty());
    }

    #[test]
    fn missing_centre_is_an_error() {
        let mut n = net(vec![router("r", RouterRole::Relay, 0.0)]);
        n.centre = usize::MAX;
        assert!(derive_cyber_links(&n).is_err());
    }
}
