//! Solver abstraction and the HiGHS implementation.

use std::num::NonZeroU32;

use highs::{HighsModelStatus, RowProblem, Sense};

use crate::error::{SolveError, SolveResult};

#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub lb: f64,
    pub ub: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub lb: f64,
    pub ub: f64,
    pub terms: Vec<(usize, f64)>,
}

/// Plain matrix form handed to a backend. Always minimized.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub cols: Vec<Column>,
    pub rows: Vec<LpRow>,
    pub offset: f64,
}

impl LinearProgram {
    pub fn add_col(&mut self, lb: f64, ub: f64, cost: f64, integer: bool) -> usize {
        self.cols.push(Column { lb, ub, cost, integer });
        self.cols.len() - 1
    }

    pub fn add_row(&mut self, lb: f64, ub: f64, terms: Vec<(usize, f64)>) -> usize {
        self.rows.push(LpRow { lb, ub, terms });
        self.rows.len() - 1
    }

    pub fn is_mip(&self) -> bool {
        self.cols.iter().any(|c| c.integer)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    pub mip_rel_gap: f64,
    pub time_limit: Option<f64>,
    pub seed: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { mip_rel_gap: 1e-6, time_limit: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped on a limit with an incumbent available.
    Feasible,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// Row duals for LPs (empty for MIPs). In a minimization, the dual of a
    /// row is the objective change per unit increase of its active bound.
    pub row_duals: Vec<f64>,
    /// Best proven bound on the objective (equals `objective` for LPs).
    pub bound: f64,
}

pub trait SolverBackend {
    fn name(&self) -> &'static str;
    fn solve(&self, lp: &LinearProgram, params: &SolveParams) -> SolveResult<Solution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl HighsBackend {
    fn run(&self, lp: &LinearProgram, params: &SolveParams, presolve: bool) -> SolveResult<(HighsModelStatus, Option<Solution>)> {
        let mut pb = RowProblem::default();
        let cols: Vec<_> = lp
            .cols
            .iter()
            .map(|c| {
                if c.integer {
                    pb.add_integer_column(c.cost, c.lb..=c.ub)
                } else {
                    pb.add_column(c.cost, c.lb..=c.ub)
                }
            })
            .collect();
        for r in &lp.rows {
            let terms = r.terms.iter().map(|&(j, a)| (cols[j], a));
            pb.add_row(r.lb..=r.ub, terms);
        }
        let mut model = pb.try_optimise(Sense::Minimise).map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        model.make_quiet();
        model.set_threads(NonZeroU32::new(1).unwrap());
        model.set_option("random_seed", (params.seed % i32::MAX as u64) as i32);
        model.set_option("mip_rel_gap", params.mip_rel_gap);
        if let Some(t) = params.time_limit {
            model.set_option("time_limit", t);
        }
        if !presolve {
            model.set_option("presolve", "off");
        }
        let solved = model.try_solve().map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        let status = solved.status();
        let status_kind = match status {
            HighsModelStatus::Optimal | HighsModelStatus::ModelEmpty => Some(Status::Optimal),
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt => {
                if solved.primal_solution_status() == highs::HighsSolutionStatus::Feasible {
                    Some(Status::Feasible)
                } else {
                    return Err(SolveError::Backend(format!("stopped on {status:?} without incumbent")));
                }
            }
            HighsModelStatus::Infeasible => {
                return Ok((status, Some(empty(Status::Infeasible))));
            }
            HighsModelStatus::Unbounded => {
                return Ok((status, Some(empty(Status::Unbounded))));
            }
            HighsModelStatus::UnboundedOrInfeasible => return Ok((status, None)),
            other => return Err(SolveError::Backend(format!("HiGHS returned {other:?}"))),
        };
        let sol = solved.get_solution();
        let primal = sol.columns().to_vec();
        let objective = lp.offset + lp.cols.iter().zip(&primal).map(|(c, x)| c.cost * x).sum::<f64>();
        let (row_duals, bound) = if lp.is_mip() {
            let b = solved.double_info_value(c"mip_dual_bound").unwrap_or(f64::NAN);
            let b = if b.is_finite() { (b + lp.offset).min(objective) } else { objective };
            (Vec::new(), b)
        } else {
            (sol.dual_rows().to_vec(), objective)
        };
        Ok((status, Some(Solution { status: status_kind.unwrap(), objective, primal, row_duals, bound })))
    }
}

fn empty(status: Status) -> Solution {
    Solution { status, objective: f64::NAN, primal: Vec::new(), row_duals: Vec::new(), bound: f64::NAN }
}

impl SolverBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, lp: &LinearProgram, params: &SolveParams) -> SolveResult<Solution> {
        if let Some(sol) = self.run(lp, params, true)?.1 {
            return Ok(sol);
        }
        // presolve could not tell infeasible from unbounded
        match self.run(lp, params, false)? {
            (_, Some(sol)) => Ok(sol),
            (_, None) => {
                // an LP with all costs zeroed is bounded, so this settles feasibility
                let mut probe = lp.clone();
                probe.cols.iter_mut().for_each(|c| c.cost = 0.0);
                match self.run(&probe, params, false)? {
                    (_, Some(s)) if s.status == Status::Infeasible => Ok(empty(Status::Infeasible)),
                    _ => Ok(empty(Status::Unbounded)),
                }
            }
        }
    }
}

/// Looks up a backend by its CLI name.
pub fn backend_by_name(name: &str) -> Option<Box<dyn SolverBackend + Send + Sync>> {
    match name {
        "highs" => Some(Box::new(HighsBackend)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_single_bounded_variable() {
        let mut lp = LinearProgram::default();
        let x = lp.add_col(0.0, f64::INFINITY, 1.0, false);
        lp.add_row(3.0, f64::INFINITY, vec![(x, 1.0)]);
        let s = HighsBackend.solve(&lp, &SolveParams::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        // raising the bound by one raises the cost by one
        assert!((s.row_duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reports_infeasible() {
        let mut lp = LinearProgram::default();
        let x = lp.add_col(0.0, 1.0, 1.0, true);
        lp.add_row(2.0, f64::INFINITY, vec![(x, 1.0)]);
        let s = HighsBackend.solve(&lp, &SolveParams::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);

        let mut lp = LinearProgram::default();
        let x = lp.add_col(0.0, f64::INFINITY, -1.0, false);
        let y = lp.add_col(0.0, f64::INFINITY, 0.0, false);
        lp.add_row(f64::NEG_INFINITY, -1.0, vec![(x, 1.0), (y, -1.0)]);
        lp.add_row(f64::NEG_INFINITY, -1.0, vec![(x, -1.0), (y, 1.0)]);
        let s = HighsBackend.solve(&lp, &SolveParams::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn le_row_dual_is_nonpositive_in_minimization() {
        // min -x st x <= 4
        let mut lp = LinearProgram::default();
        let x = lp.add_col(0.0, f64::INFINITY, -1.0, false);
        lp.add_row(f64::NEG_INFINITY, 4.0, vec![(x, 1.0)]);
        let s = HighsBackend.solve(&lp, &SolveParams::default()).unwrap();
        assert!((s.objective + 4.0).abs() < 1e-9);
        assert!((s.row_duals[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn mip_knapsack() {
        // max 5a + 4b + 3c st 2a + 3b + c <= 5
        let mut lp = LinearProgram::default();
        let v: Vec<_> = [5.0, 4.0, 3.0].iter().map(|&c| lp.add_col(0.0, 1.0, -c, true)).collect();
        lp.add_row(f64::NEG_INFINITY, 5.0, vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)]);
        let s = HighsBackend.solve(&lp, &SolveParams::default()).unwrap();
        assert!((s.objective + 9.0).abs() < 1e-9);
    }
}
