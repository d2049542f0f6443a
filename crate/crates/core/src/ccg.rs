//! Column-and-constraint generation over the compact model.
//!
//! The master problem carries the schedule rows plus one recourse copy per
//! pooled scenario. The subproblem is the dual of the recourse LP maximized
//! over the uncertainty set, with every deviation written as a scaled binary
//! expansion so that deviation-dual products become exact McCormick rows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assemble::{CompactModel, SplitRow};
use crate::backend::{LinearProgram, SolveParams, SolverBackend, Status};
use crate::error::{SolveError, SolveResult};
use crate::instance::Instance;
use crate::model::{Sense, VarKind};
use crate::uncertainty::ScenarioRealization;

#[derive(Debug, Clone, Copy)]
pub struct CcgParams {
    /// Relative convergence tolerance on `1 - LB/UB`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Binary-expansion bits per deviation; `None` takes the instance value.
    pub bits: Option<u32>,
    pub seed: u64,
    pub mip_gap: f64,
    pub time_limit: Option<f64>,
}

impl Default for CcgParams {
    fn default() -> Self {
        CcgParams { tolerance: 1e-3, max_iterations: 50, bits: None, seed: 0, mip_gap: 1e-6, time_limit: None }
    }
}

impl CcgParams {
    fn solve_params(&self) -> SolveParams {
        SolveParams { mip_rel_gap: self.mip_gap, time_limit: self.time_limit, seed: self.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Optimality,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub kind: CutKind,
    pub lower_bound: f64,
    /// `None` while no finite upper bound is known.
    pub upper_bound: Option<f64>,
    /// Recourse cost of the master's schedule at the scenario found, or the
    /// infeasibility measure for feasibility iterations.
    pub scenario_value: f64,
    pub scenario: ScenarioRealization,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    /// Worst-case recourse cost of the returned schedule.
    pub objective: f64,
    /// Full variable vector with the first-stage values of the returned
    /// schedule (other entries zero).
    pub x: Vec<f64>,
    pub worst: ScenarioRealization,
    /// Relative gap between the dual subproblem value and the primal
    /// recourse LP at the returned schedule and worst scenario.
    pub duality_gap: f64,
    pub trace: Vec<IterationRecord>,
}

/// Cached index maps of a compact model.
struct Index {
    sigma_col: Vec<usize>,
}

impl Index {
    fn new(cm: &CompactModel) -> Self {
        let mut sigma_col = vec![usize::MAX; cm.builder.vars.len()];
        for (k, v) in cm.sigma.iter().enumerate() {
            sigma_col[v.0] = k;
        }
        Index { sigma_col }
    }
}

/// Deviation vector (indexed like `cm.sigma`) of a scenario.
pub fn scenario_vector(cm: &CompactModel, s: &ScenarioRealization) -> Vec<f64> {
    let idx = Index::new(cm);
    let mut out = vec![0.0; cm.sigma.len()];
    let u = &cm.layout.uncertainty;
    for i in 0..u.up.len() {
        for t in 0..u.up[i].len() {
            out[idx.sigma_col[u.up[i][t].0]] = s.up[i][t];
            out[idx.sigma_col[u.down[i][t].0]] = s.down[i][t];
        }
    }
    out
}

pub fn scenario_from_vector(cm: &CompactModel, v: &[f64]) -> ScenarioRealization {
    let idx = Index::new(cm);
    let u = &cm.layout.uncertainty;
    ScenarioRealization {
        up: u.up.iter().map(|row| row.iter().map(|id| v[idx.sigma_col[id.0]]).collect()).collect(),
        down: u.down.iter().map(|row| row.iter().map(|id| v[idx.sigma_col[id.0]]).collect()).collect(),
    }
}

fn row_bounds(sense: Sense, rhs: f64) -> (f64, f64) {
    match sense {
        Sense::Le => (f64::NEG_INFINITY, rhs),
        Sense::Ge => (rhs, f64::INFINITY),
        Sense::Eq => (rhs, rhs),
    }
}

fn shifted_rhs(row: &SplitRow, x: Option<&[f64]>, sigma: &[f64]) -> f64 {
    let mut rhs = row.rhs;
    if let Some(x) = x {
        rhs -= row.x.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>();
    }
    rhs - row.sigma.iter().map(|&(i, c)| c * sigma[i]).sum::<f64>()
}

/// Second-stage LP at a fixed schedule and scenario.
pub fn recourse_lp(cm: &CompactModel, x: &[f64], sigma: &[f64]) -> LinearProgram {
    let mut lp = LinearProgram::default();
    for (j, v) in cm.y.iter().enumerate() {
        let var = &cm.builder.vars[v.0];
        lp.add_col(var.lb, var.ub, cm.cost[j], false);
    }
    for row in &cm.recourse {
        let (lb, ub) = row_bounds(row.sense, shifted_rhs(row, Some(x), sigma));
        lp.add_row(lb, ub, row.y.clone());
    }
    lp
}

/// Optimal recourse cost, or `None` when the recourse LP is infeasible.
pub fn recourse_value(cm: &CompactModel, x: &[f64], sigma: &[f64], backend: &dyn SolverBackend, params: &SolveParams) -> SolveResult<Option<f64>> {
    let sol = backend.solve(&recourse_lp(cm, x, sigma), params)?;
    match sol.status {
        Status::Optimal | Status::Feasible => Ok(Some(sol.objective)),
        Status::Infeasible => Ok(None),
        Status::Unbounded => Err(SolveError::Assembly("recourse LP is unbounded".into())),
    }
}

pub struct MasterOutcome {
    pub x: Vec<f64>,
    pub mu: f64,
    pub bound: f64,
}

/// Master problem over the schedule rows and one recourse copy per pooled scenario.
pub fn solve_master(cm: &CompactModel, pool: &[Vec<f64>], backend: &dyn SolverBackend, params: &SolveParams) -> SolveResult<MasterOutcome> {
    let mut lp = LinearProgram::default();
    let mut col_of = vec![usize::MAX; cm.builder.vars.len()];
    for v in &cm.x {
        let var = &cm.builder.vars[v.0];
        col_of[v.0] = lp.add_col(var.lb, var.ub, 0.0, var.kind == VarKind::Binary);
    }
    let mu = lp.add_col(0.0, f64::INFINITY, 1.0, false);
    for &r in &cm.first_rows {
        let row = &cm.builder.rows[r];
        let (lb, ub) = row_bounds(row.sense, row.rhs);
        lp.add_row(lb, ub, row.terms.iter().map(|&(v, c)| (col_of[v.0], c)).collect());
    }
    for sigma in pool {
        let base = lp.cols.len();
        for v in &cm.y {
            let var = &cm.builder.vars[v.0];
            lp.add_col(var.lb, var.ub, 0.0, false);
        }
        for row in &cm.recourse {
            let (lb, ub) = row_bounds(row.sense, shifted_rhs(row, None, sigma));
            let mut terms: Vec<(usize, f64)> = row.y.iter().map(|&(j, c)| (base + j, c)).collect();
            terms.extend(row.x.iter().map(|&(v, c)| (col_of[v.0], c)));
            lp.add_row(lb, ub, terms);
        }
        let mut cut = vec![(mu, 1.0)];
        cut.extend(cm.cost.iter().enumerate().filter(|c| *c.1 != 0.0).map(|(j, &c)| (base + j, -c)));
        lp.add_row(0.0, f64::INFINITY, cut);
    }
    let sol = backend.solve(&lp, params)?;
    match sol.status {
        Status::Optimal | Status::Feasible => {}
        Status::Infeasible => {
            return Err(SolveError::Infeasible(if pool.is_empty() {
                "no schedule satisfies the routing, timing, cyber and radiality rows".into()
            } else {
                "no schedule admits a feasible operation under every pooled scenario".into()
            }))
        }
        Status::Unbounded => return Err(SolveError::Assembly("master problem is unbounded".into())),
    }
    let mut x = vec![0.0; cm.builder.vars.len()];
    for v in &cm.x {
        let val = sol.primal[col_of[v.0]];
        x[v.0] = if cm.builder.vars[v.0].kind == VarKind::Binary { val.round() } else { val };
    }
    Ok(MasterOutcome { x, mu: sol.primal[mu], bound: sol.bound.max(0.0) })
}

/// Place values of the `bits + 1` binary digits that encode a deviation in [0, 1].
pub fn expansion_weights(bits: u32) -> Vec<f64> {
    let eta = 1.0 / ((1u64 << (bits + 1)) - 1) as f64;
    (0..=bits).map(|b| eta * (1u64 << b) as f64).collect()
}

#[derive(Debug, Clone, Copy)]
enum DualMode {
    /// Recourse cost dual with the given bound on deviation-row duals.
    Cost(f64),
    /// Dual of the elastic recourse LP that minimizes total row violation.
    Violation,
}

struct DualOutcome {
    value: f64,
    sigma: Vec<f64>,
    at_bound: bool,
}

/// Deviation columns that appear in some recourse row.
fn active_sigma(cm: &CompactModel) -> Vec<bool> {
    let mut active = vec![false; cm.sigma.len()];
    for row in &cm.recourse {
        for &(i, _) in &row.sigma {
            active[i] = true;
        }
    }
    active
}

fn dual_subproblem(
    cm: &CompactModel,
    x: &[f64],
    mode: DualMode,
    bits: u32,
    backend: &dyn SolverBackend,
    params: &SolveParams,
) -> SolveResult<DualOutcome> {
    let mut lp = LinearProgram::default();
    let ny = cm.y.len();
    let mut dual_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ny];
    let mut pi = Vec::with_capacity(cm.recourse.len());
    let mut pi_bounds = Vec::with_capacity(cm.recourse.len());

    for row in &cm.recourse {
        let s = if row.sense == Sense::Le { -1.0 } else { 1.0 };
        let touched = !row.sigma.is_empty();
        let (lo, hi) = match (mode, row.sense) {
            (DualMode::Violation, Sense::Eq) => (-1.0, 1.0),
            (DualMode::Violation, _) => (0.0, 1.0),
            (DualMode::Cost(m), Sense::Eq) if touched => (-m, m),
            (DualMode::Cost(m), _) if touched => (0.0, m),
            (DualMode::Cost(_), Sense::Eq) => (f64::NEG_INFINITY, f64::INFINITY),
            (DualMode::Cost(_), _) => (0.0, f64::INFINITY),
        };
        let r0 = s * shifted_rhs(row, Some(x), &vec![0.0; cm.sigma.len()]);
        let k = lp.add_col(lo, hi, -r0, false);
        for &(j, a) in &row.y {
            dual_rows[j].push((k, s * a));
        }
        pi.push(k);
        pi_bounds.push((lo, hi));
    }
    for (j, v) in cm.y.iter().enumerate() {
        let var = &cm.builder.vars[v.0];
        if var.lb.is_finite() {
            let k = lp.add_col(0.0, f64::INFINITY, -var.lb, false);
            dual_rows[j].push((k, 1.0));
        }
        if var.ub.is_finite() {
            let k = lp.add_col(0.0, f64::INFINITY, var.ub, false);
            dual_rows[j].push((k, -1.0));
        }
    }
    for (j, terms) in dual_rows.into_iter().enumerate() {
        let b = match mode {
            DualMode::Cost(_) => cm.cost[j],
            DualMode::Violation => 0.0,
        };
        lp.add_row(b, b, terms);
    }

    // deviation bits
    let active = active_sigma(cm);
    let weights = expansion_weights(bits);
    let mut zeta: Vec<Vec<usize>> = vec![Vec::new(); cm.sigma.len()];
    for (i, on) in active.iter().enumerate() {
        if *on {
            zeta[i] = (0..=bits).map(|_| lp.add_col(0.0, 1.0, 0.0, true)).collect();
        }
    }
    for row in &cm.uncertainty_rows {
        let mut terms = Vec::new();
        for &(i, c) in &row.sigma {
            for (b, &z) in zeta[i].iter().enumerate() {
                terms.push((z, c * weights[b]));
            }
        }
        if !terms.is_empty() {
            let (lb, ub) = row_bounds(row.sense, row.rhs);
            lp.add_row(lb, ub, terms);
        }
    }
    // products of bits and deviation-row duals
    for (k, row) in cm.recourse.iter().enumerate() {
        if row.sigma.is_empty() {
            continue;
        }
        let s = if row.sense == Sense::Le { -1.0 } else { 1.0 };
        let (lo, hi) = pi_bounds[k];
        for &(i, g) in &row.sigma {
            let coef = -s * g;
            for (b, &z) in zeta[i].iter().enumerate() {
                let nu = lp.add_col(lo.min(0.0), hi.max(0.0), -coef * weights[b], false);
                lp.add_row(f64::NEG_INFINITY, 0.0, vec![(nu, 1.0), (z, -hi)]);
                lp.add_row(0.0, f64::INFINITY, vec![(nu, 1.0), (z, -lo)]);
                lp.add_row(f64::NEG_INFINITY, -lo, vec![(nu, 1.0), (pi[k], -1.0), (z, -lo)]);
                lp.add_row(-hi, f64::INFINITY, vec![(nu, 1.0), (pi[k], -1.0), (z, -hi)]);
            }
        }
    }

    let sol = backend.solve(&lp, params)?;
    match sol.status {
        Status::Optimal | Status::Feasible => {}
        Status::Infeasible => return Err(SolveError::Assembly("dual subproblem is infeasible".into())),
        Status::Unbounded => {
            return Err(SolveError::Assembly(
                "dual subproblem is unbounded although the recourse has shedding slack".into(),
            ))
        }
    }
    let mut sigma = vec![0.0; cm.sigma.len()];
    for (i, bitcols) in zeta.iter().enumerate() {
        sigma[i] = bitcols.iter().enumerate().map(|(b, &z)| weights[b] * sol.primal[z].round()).sum::<f64>().min(1.0);
    }
    let at_bound = match mode {
        DualMode::Cost(m) => cm
            .recourse
            .iter()
            .enumerate()
            .any(|(k, row)| !row.sigma.is_empty() && sol.primal[pi[k]].abs() >= 0.999 * m),
        DualMode::Violation => false,
    };
    Ok(DualOutcome { value: -sol.objective, sigma, at_bound })
}

pub struct SubproblemOutcome {
    pub sigma: Vec<f64>,
    /// Worst recourse cost, or `None` when the schedule has an infeasible scenario.
    pub value: Option<f64>,
    /// Violation measure when infeasible.
    pub violation: f64,
    /// Relative difference between the dual value and the primal recourse cost.
    pub duality_gap: f64,
}

fn violation_tolerance(inst: &Instance) -> f64 {
    1e-6 * (1.0 + inst.network.total_peak_load())
}

/// Worst-case scenario search for a fixed schedule.
pub fn solve_subproblem(
    inst: &Instance,
    cm: &CompactModel,
    x: &[f64],
    bits: u32,
    backend: &dyn SolverBackend,
    params: &SolveParams,
) -> SolveResult<SubproblemOutcome> {
    let infeasibility = dual_subproblem(cm, x, DualMode::Violation, bits, backend, params)?;
    if infeasibility.value > violation_tolerance(inst) {
        return Ok(SubproblemOutcome {
            sigma: infeasibility.sigma,
            value: None,
            violation: infeasibility.value,
            duality_gap: 0.0,
        });
    }
    let max_penalty = inst.network.nodes.iter().map(|n| n.penalty).fold(0.0, f64::max);
    let mut m = (2.0 * max_penalty * inst.horizon.slot_hours() * inst.slots() as f64).max(1.0);
    for _ in 0..40 {
        let out = dual_subproblem(cm, x, DualMode::Cost(m), bits, backend, params)?;
        let primal = recourse_value(cm, x, &out.sigma, backend, params)?.ok_or_else(|| {
            SolveError::Assembly("recourse infeasible at a scenario the violation search accepted".into())
        })?;
        let gap = (primal - out.value) / primal.abs().max(1.0);
        if out.at_bound || gap > 1e-4 {
            log::debug!("dual bound {m} active (gap {gap:.3e}); doubling");
            m *= 2.0;
            continue;
        }
        if gap < -1e-4 {
            return Err(SolveError::Assembly(format!(
                "dual subproblem value {} exceeds primal recourse cost {primal}",
                out.value
            )));
        }
        return Ok(SubproblemOutcome { sigma: out.sigma, value: Some(primal), violation: 0.0, duality_gap: gap.abs() });
    }
    Err(SolveError::Backend("dual bound for the deviation products did not stabilize".into()))
}

/// Column-and-constraint generation.
pub fn ccg_solve(inst: &Instance, cm: &CompactModel, params: &CcgParams, backend: &dyn SolverBackend) -> SolveResult<SolveReport> {
    if params.tolerance <= 0.0 {
        return Err(SolveError::Parameter("tolerance must be positive".into()));
    }
    let bits = params.bits.unwrap_or(inst.uncertainty.bits);
    let sp = params.solve_params();
    let start = Instant::now();
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut lb: f64 = 0.0;
    let mut ub = f64::INFINITY;
    let mut incumbent: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut converged = false;

    for iteration in 1..=params.max_iterations {
        let master = solve_master(cm, &pool, backend, &sp)?;
        lb = lb.max(master.bound);
        let sub = solve_subproblem(inst, cm, &master.x, bits, backend, &sp)?;
        let kind = if sub.value.is_some() { CutKind::Optimality } else { CutKind::Feasibility };
        if let Some(v) = sub.value {
            if v < ub {
                ub = v;
                incumbent = Some((master.x.clone(), sub.sigma.clone(), sub.duality_gap));
            }
        }
        trace.push(IterationRecord {
            iteration,
            kind,
            lower_bound: lb,
            upper_bound: ub.is_finite().then_some(ub),
            scenario_value: sub.value.unwrap_or(sub.violation),
            scenario: scenario_from_vector(cm, &sub.sigma),
            elapsed_ms: start.elapsed().as_millis(),
        });
        log::info!("iteration {iteration}: LB {lb:.6} UB {ub:.6} ({kind:?})");

        if ub.is_finite() && (ub <= 1e-9 || 1.0 - lb / ub < params.tolerance) {
            converged = true;
            break;
        }
        let duplicate = pool.iter().any(|p| p.iter().zip(&sub.sigma).all(|(a, b)| (a - b).abs() <= 1e-6));
        if duplicate {
            if kind == CutKind::Feasibility {
                return Err(SolveError::Assembly("feasibility cut failed to exclude the schedule".into()));
            }
            log::info!("worst scenario already pooled; stopping with the incumbent");
            break;
        }
        pool.push(sub.sigma);
    }

    let Some((x, sigma, duality_gap)) = incumbent else {
        return Err(SolveError::Infeasible("no schedule with feasible operation found within the iteration cap".into()));
    };
    let gap = if ub <= 1e-9 { 0.0 } else { (1.0 - lb / ub).max(0.0) };
    Ok(SolveReport {
        converged,
        iterations: trace.len(),
        lower_bound: lb,
        upper_bound: ub,
        gap,
        objective: ub,
        x,
        worst: scenario_from_vector(cm, &sigma),
        duality_gap,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(weights: &[f64], digits: &[u8]) -> f64 {
        weights.iter().zip(digits).map(|(w, &d)| w * f64::from(d)).sum()
    }

    #[test]
    fn two_bits_step_is_one_seventh() {
        let w = expansion_weights(2);
        assert_eq!(w.len(), 3);
        approx::assert_relative_eq!(w[0], 1.0 / 7.0);
        approx::assert_relative_eq!(decode(&w, &[1, 1, 1]), 1.0);
        approx::assert_relative_eq!(decode(&w, &[1, 0, 0]), 1.0 / 7.0);
    }

    #[test]
    fn every_grid_point_is_reachable() {
        let w = expansion_weights(3);
        let step = w[0];
        for k in 0..16u32 {
            let digits: Vec<u8> = (0..4).map(|b| ((k >> b) & 1) as u8).collect();
            approx::assert_relative_eq!(decode(&w, &digits), f64::from(k) * step, epsilon = 1e-12);
        }
    }
}
