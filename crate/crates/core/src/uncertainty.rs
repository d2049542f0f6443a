//! Budgeted RES output uncertainty.

use serde::{Deserialize, Serialize};

use crate::error::{SolveError, SolveResult};
use crate::instance::{Instance, UncertaintySpec};
use crate::model::{Family, LinExpr, ModelBuilder, Stage, VarId, VarKind};

/// Upward and downward deviations per RES entry per slot, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRealization {
    pub up: Vec<Vec<f64>>,
    pub down: Vec<Vec<f64>>,
}

impl ScenarioRealization {
    pub fn zero(res: usize, slots: usize) -> Self {
        ScenarioRealization { up: vec![vec![0.0; slots]; res], down: vec![vec![0.0; slots]; res] }
    }

    pub fn for_instance(inst: &Instance) -> Self {
        ScenarioRealization::zero(inst.uncertainty.res.len(), inst.slots())
    }

    /// Largest componentwise difference.
    pub fn distance(&self, other: &ScenarioRealization) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.up.iter().flatten().zip(other.up.iter().flatten()) {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.down.iter().flatten().zip(other.down.iter().flatten()) {
            d = d.max((a - b).abs());
        }
        d
    }

    /// Total deviation spent by RES entry `i`.
    pub fn spent(&self, i: usize) -> f64 {
        self.up[i].iter().sum::<f64>() + self.down[i].iter().sum::<f64>()
    }
}

/// Available RES output per entry per slot for a scenario.
pub fn materialize_uncertainty(spec: &UncertaintySpec, slots: usize, sigma: &ScenarioRealization) -> SolveResult<Vec<Vec<f64>>> {
    if sigma.up.len() != spec.res.len() || sigma.down.len() != spec.res.len() {
        return Err(SolveError::InvalidScenario(format!(
            "scenario covers {} RES, instance has {}",
            sigma.up.len(),
            spec.res.len()
        )));
    }
    let tol = 1e-9;
    let mut out = Vec::with_capacity(spec.res.len());
    for (i, r) in spec.res.iter().enumerate() {
        if sigma.up[i].len() != slots || sigma.down[i].len() != slots {
            return Err(SolveError::InvalidScenario(format!("RES entry {i} needs {slots} slots")));
        }
        for &s in sigma.up[i].iter().chain(&sigma.down[i]) {
            if !(-tol..=1.0 + tol).contains(&s) {
                return Err(SolveError::InvalidScenario(format!("deviation {s} outside [0, 1] for RES entry {i}")));
            }
        }
        let spent = sigma.spent(i);
        if spent > r.budget + 1e-7 {
            return Err(SolveError::InvalidScenario(format!(
                "RES entry {i} spends {spent} deviations, budget is {}",
                r.budget
            )));
        }
        out.push(
            (0..slots)
                .map(|t| {
                    let f = r.forecast[t];
                    f + (sigma.up[i][t] - sigma.down[i][t]) * r.max_error * f
                })
                .collect(),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct UncertaintyVars {
    /// `[res entry][slot]`
    pub up: Vec<Vec<VarId>>,
    pub down: Vec<Vec<VarId>>,
    /// Available output, a second-stage variable tied to the deviations.
    pub available: Vec<Vec<VarId>>,
}

impl UncertaintyVars {
    pub fn allocate(inst: &Instance, mb: &mut ModelBuilder) -> UncertaintyVars {
        let slots = inst.slots();
        let mut up = Vec::new();
        let mut down = Vec::new();
        let mut available = Vec::new();
        for (i, r) in inst.uncertainty.res.iter().enumerate() {
            let cap = r.forecast.iter().map(|f| f * (1.0 + r.max_error)).fold(0.0, f64::max);
            up.push((1..=slots).map(|t| mb.add_var(format!("sp[{i},{t}]"), VarKind::Continuous, 0.0, 1.0, Stage::Uncertainty)).collect());
            down.push((1..=slots).map(|t| mb.add_var(format!("sm[{i},{t}]"), VarKind::Continuous, 0.0, 1.0, Stage::Uncertainty)).collect());
            available.push((1..=slots).map(|t| mb.second(format!("Pbar[{i},{t}]"), 0.0, cap)).collect());
        }
        UncertaintyVars { up, down, available }
    }
}

/// Available-output definition and per-RES budget rows.
pub fn emit_uncertainty_set(inst: &Instance, vars: &UncertaintyVars, mb: &mut ModelBuilder) {
    for (i, r) in inst.uncertainty.res.iter().enumerate() {
        let mut spent = LinExpr::new();
        for t in 0..inst.slots() {
            let f = r.forecast[t];
            let k = r.max_error * f;
            let rhs = vars.up[i][t] * k - vars.down[i][t] * k + f;
            mb.eq("res-available", format!("Pbar{i},{}", t + 1), Family::III, vars.available[i][t], rhs);
            spent += vars.up[i][t];
            spent += vars.down[i][t];
        }
        mb.le("budget", format!("budget{i}"), Family::III, spent, r.budget);
    }
}
