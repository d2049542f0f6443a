//! Exhaustive min-max oracle for desk-scale instances.
//!
//! Every route permutation, operating-crew visit subset and order, and
//! remote closing slot is enumerated. Remaining schedule choices are fixed
//! at their dominant values: cells energizable as soon as they are cleared,
//! and only the routers that a remote close needs are kept available. The
//! inner maximum runs over the saturated 0/1 vertices of each budget
//! polytope. The operation cost is convex in the deviation vector and
//! nonincreasing in available RES output, so the worst case sits at such a
//! vertex with upward deviations at zero.

use itertools::Itertools;
use thiserror::Error;

use restoration_core::crew::cluster_tasks;
use restoration_core::{materialize_uncertainty, FirstStageDecision, Instance, ScenarioRealization, SolveError, SolverBackend};

use crate::recourse::solve_operation;
use crate::validate::{check_radiality, simulate_events, EventTimes};

pub const MAX_FAULTS: usize = 3;
pub const MAX_CREWS_PER_KIND: usize = 2;
pub const MAX_SWITCHES: usize = 3;
pub const MAX_SLOTS: usize = 8;
pub const MAX_SCENARIOS: usize = 64;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds oracle caps: {0}")]
    Caps(String),
    #[error("no schedule is feasible under every scenario")]
    Infeasible,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub decision: FirstStageDecision,
    pub worst: ScenarioRealization,
    /// Schedules evaluated (after route and radiality filtering).
    pub schedules: usize,
}

fn check_caps(inst: &Instance) -> Result<(), OracleError> {
    let fail = |m: String| Err(OracleError::Caps(m));
    if inst.faults.len() > MAX_FAULTS {
        return fail(format!("{} faults > {MAX_FAULTS}", inst.faults.len()));
    }
    if inst.crews.repair.len() > MAX_CREWS_PER_KIND || inst.crews.operating.len() > MAX_CREWS_PER_KIND {
        return fail(format!("more than {MAX_CREWS_PER_KIND} crews of a kind"));
    }
    if inst.switches.len() > MAX_SWITCHES {
        return fail(format!("{} switch tasks > {MAX_SWITCHES}", inst.switches.len()));
    }
    if inst.slots() > MAX_SLOTS {
        return fail(format!("{} slots > {MAX_SLOTS}", inst.slots()));
    }
    if let Some(r) = inst.cyber.links.iter().position(|l| l.len() > 1) {
        return fail(format!("router {} has several candidate links", inst.cyber.routers[r].id));
    }
    for r in &inst.uncertainty.res {
        if r.budget.fract() != 0.0 {
            return fail("fractional uncertainty budget".into());
        }
    }
    Ok(())
}

/// Saturated 0/1 downward-deviation vertices of the uncertainty set.
pub fn scenario_vertices(inst: &Instance) -> Result<Vec<ScenarioRealization>, OracleError> {
    let slots = inst.slots();
    let per_res: Vec<Vec<Vec<f64>>> = inst
        .uncertainty
        .res
        .iter()
        .map(|r| {
            if r.max_error == 0.0 {
                return vec![vec![0.0; slots]];
            }
            let k = (r.budget as usize).min(slots);
            (0..slots)
                .combinations(k)
                .map(|pick| {
                    let mut v = vec![0.0; slots];
                    pick.into_iter().for_each(|t| v[t] = 1.0);
                    v
                })
                .collect()
        })
        .collect();
    let total: usize = per_res.iter().map(Vec::len).product();
    if total > MAX_SCENARIOS {
        return Err(OracleError::Caps(format!("{total} scenario vertices > {MAX_SCENARIOS}")));
    }
    let zero = vec![vec![0.0; slots]; per_res.len()];
    if per_res.is_empty() {
        return Ok(vec![ScenarioRealization { up: Vec::new(), down: Vec::new() }]);
    }
    Ok(per_res
        .into_iter()
        .multi_cartesian_product()
        .map(|down| ScenarioRealization { up: zero.clone(), down })
        .collect())
}

/// All ways to split `tasks` among `crews` as ordered routes.
fn route_sets(tasks: &[usize], crews: usize, every: bool) -> Vec<Vec<Vec<usize>>> {
    // each task goes to a crew, or nowhere when visits are optional
    let choices = if every { crews } else { crews + 1 };
    let mut out = Vec::new();
    for assign in std::iter::repeat_n(0..choices, tasks.len()).multi_cartesian_product() {
        let groups: Vec<Vec<usize>> =
            (0..crews).map(|c| tasks.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(&t, _)| t).collect()).collect();
        let orders: Vec<Vec<Vec<usize>>> =
            groups.iter().map(|g| g.iter().copied().permutations(g.len()).collect()).collect();
        for combo in orders.into_iter().multi_cartesian_product() {
            out.push(combo);
        }
    }
    if out.is_empty() {
        out.push(vec![Vec::new(); crews]);
    }
    out
}

/// Restricts route sets to each crew's cluster.
fn clustered_routes(clusters: &[Vec<usize>], every: bool) -> Vec<Vec<Vec<usize>>> {
    let per_crew: Vec<Vec<Vec<usize>>> = clusters
        .iter()
        .map(|tasks| route_sets(tasks, 1, every).into_iter().map(|mut r| r.remove(0)).collect())
        .collect();
    if per_crew.is_empty() {
        return vec![Vec::new()];
    }
    per_crew.into_iter().multi_cartesian_product().collect()
}

fn step(inst: &Instance, minutes: Option<f64>, t: usize) -> u8 {
    u8::from(minutes.is_some_and(|m| m.is_finite() && inst.horizon.in_effect(m, t)))
}

/// Builds the dominant decision for given routes and remote closing slots.
fn decision(inst: &Instance, repair: &[Vec<usize>], operating: &[Vec<usize>], ev: &EventTimes, remote_from: &[Option<usize>]) -> Option<FirstStageDecision> {
    let slots = inst.slots();
    let cy = &inst.cyber;
    let nr = cy.routers.len();
    let fault_repaired: Vec<Vec<u8>> =
        (0..inst.faults.len()).map(|n| (1..=slots).map(|t| step(inst, ev.repair_end[n], t)).collect()).collect();
    let cell_energizable = (0..inst.cells.len())
        .map(|c| (1..=slots).map(|t| u8::from(inst.cell_faults(c).iter().all(|&n| fault_repaired[n][t - 1] == 1))).collect())
        .collect();
    let closed_manually: Vec<Vec<u8>> =
        (0..inst.switches.len()).map(|q| (1..=slots).map(|t| step(inst, ev.manual_close[q], t)).collect()).collect();
    let closed_remotely: Vec<Vec<u8>> = remote_from
        .iter()
        .map(|from| (1..=slots).map(|t| u8::from(from.is_some_and(|k| t >= k))).collect())
        .collect();
    let closed = closed_manually
        .iter()
        .zip(&closed_remotely)
        .map(|(m, r)| m.iter().zip(r).map(|(a, b)| a.max(b)).copied().collect())
        .collect();
    let mut router_up = vec![vec![0u8; slots]; nr];
    if cy.centre < nr {
        router_up[cy.centre] = vec![1; slots];
    }
    for (q, from) in remote_from.iter().enumerate() {
        let Some(k) = from else { continue };
        let c = cy.controller_of(q)?;
        let path = cy.links[c].first()?;
        for &m in path {
            for t in *k..=slots {
                router_up[m][t - 1] = 1;
            }
        }
    }
    let ups_alive = (0..nr)
        .map(|c| {
            (1..=slots)
                .map(|t| u8::from(c == cy.centre || inst.horizon.ups_alive(cy.routers[c].ups, t)))
                .collect()
        })
        .collect();
    let mut d = FirstStageDecision {
        repair_routes: repair.to_vec(),
        operating_routes: operating.to_vec(),
        fault_repaired,
        cell_energizable,
        closed_manually,
        closed_remotely,
        closed,
        router_up,
        ups_alive,
        root: vec![vec![0; slots]; inst.cells.len()],
    };
    // one root per component: its smallest cell
    for t in 1..=slots {
        let mut label: Vec<usize> = (0..inst.cells.len()).collect();
        loop {
            let mut changed = false;
            for (q, e) in inst.cells.edges.iter().enumerate() {
                if d.closed[q][t - 1] == 1 {
                    let m = label[e.from].min(label[e.to]);
                    if label[e.from] != m || label[e.to] != m {
                        label[e.from] = m;
                        label[e.to] = m;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for c in 0..inst.cells.len() {
            if label[c] == c {
                d.root[c][t - 1] = 1;
            }
        }
    }
    Some(d)
}

/// Min over enumerated schedules of the max over scenario vertices.
pub fn enumerate_oracle(inst: &Instance, backend: &dyn SolverBackend) -> Result<OracleResult, OracleError> {
    check_caps(inst)?;
    let scenarios = scenario_vertices(inst)?;
    let available: Vec<Vec<Vec<f64>>> = scenarios
        .iter()
        .map(|s| materialize_uncertainty(&inst.uncertainty, inst.slots(), s))
        .collect::<Result<_, _>>()?;
    let clusters = cluster_tasks(inst);
    let nr = inst.crews.repair.len();
    let no = inst.crews.operating.len();
    let faults: Vec<usize> = (0..inst.faults.len()).collect();
    let switches: Vec<usize> = (0..inst.switches.len()).collect();
    let (repair_sets, operating_sets) = if inst.crews.clustering {
        (clustered_routes(&clusters.repair, true), clustered_routes(&clusters.operating, false))
    } else {
        (route_sets(&faults, nr, true), route_sets(&switches, no, false))
    };

    let mut best: Option<(f64, FirstStageDecision, usize)> = None;
    let mut schedules = 0;
    let mut hint = 0usize;
    for repair in &repair_sets {
        for operating in &operating_sets {
            let d0 = FirstStageDecision {
                repair_routes: repair.clone(),
                operating_routes: operating.clone(),
                fault_repaired: Vec::new(),
                cell_energizable: Vec::new(),
                closed_manually: Vec::new(),
                closed_remotely: Vec::new(),
                closed: Vec::new(),
                router_up: Vec::new(),
                ups_alive: Vec::new(),
                root: Vec::new(),
            };
            let mut issues = Vec::new();
            let ev = simulate_events(inst, &d0, &mut issues);
            if !issues.is_empty() {
                continue;
            }
            let remote_options: Vec<Vec<Option<usize>>> = (0..inst.switches.len())
                .map(|q| {
                    let mut opts = vec![None];
                    if let Some(first) = ev.remote_close[q].and_then(|m| inst.horizon.first_slot(m)) {
                        opts.extend((first..=inst.slots()).map(Some));
                    }
                    opts
                })
                .collect();
            let combos: Vec<Vec<Option<usize>>> = if remote_options.is_empty() {
                vec![Vec::new()]
            } else {
                remote_options.into_iter().multi_cartesian_product().collect()
            };
            for remote_from in combos {
                let Some(d) = decision(inst, repair, operating, &ev, &remote_from) else { continue };
                if !check_radiality(inst, &d).is_empty() {
                    continue;
                }
                schedules += 1;
                let bound = best.as_ref().map_or(f64::INFINITY, |b| b.0);
                if let Some((value, worst)) = worst_case(inst, &d, &available, bound, hint, backend)? {
                    hint = worst;
                    if value < bound - 1e-9 {
                        best = Some((value, d, worst));
                    }
                }
            }
        }
    }
    let (objective, decision, worst) = best.ok_or(OracleError::Infeasible)?;
    Ok(OracleResult { objective, decision, worst: scenarios[worst].clone(), schedules })
}

/// Max over vertices, abandoning once the running max reaches `bound`.
/// `None` when some vertex admits no feasible operation.
fn worst_case(
    inst: &Instance,
    d: &FirstStageDecision,
    available: &[Vec<Vec<f64>>],
    bound: f64,
    hint: usize,
    backend: &dyn SolverBackend,
) -> Result<Option<(f64, usize)>, OracleError> {
    let order = std::iter::once(hint).chain((0..available.len()).filter(|&k| k != hint));
    let mut worst: Option<(f64, usize)> = None;
    for k in order {
        let Some(op) = solve_operation(inst, d, &available[k], backend)? else { return Ok(None) };
        if worst.is_none_or(|w| op.cost > w.0) {
            worst = Some((op.cost, k));
        }
        if op.cost >= bound {
            break;
        }
    }
    Ok(worst)
}
