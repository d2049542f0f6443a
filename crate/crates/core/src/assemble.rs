//! Compact two-stage model: all emitters writing into one builder, with
//! rows classified into schedule rows, recourse rows and uncertainty-set rows.

use crate::crew::{self, cluster_tasks, Clusters, CrewVars};
use crate::cyber::{self, CyberVars};
use crate::error::{SolveError, SolveResult};
use crate::grid::{self, GridVars};
use crate::instance::Instance;
use crate::model::{Family, ModelBuilder, Sense, Stage, VarId};
use crate::uncertainty::{emit_uncertainty_set, UncertaintyVars};

#[derive(Debug, Clone)]
pub struct Layout {
    pub clusters: Clusters,
    pub crew: CrewVars,
    pub grid: GridVars,
    pub cyber: CyberVars,
    pub uncertainty: UncertaintyVars,
}

/// One recourse row split by stage: `a·y + d·x + g·σ (sense) rhs`.
#[derive(Debug, Clone)]
pub struct SplitRow {
    pub row: usize,
    pub y: Vec<(usize, f64)>,
    pub x: Vec<(VarId, f64)>,
    pub sigma: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct CompactModel {
    pub builder: ModelBuilder,
    pub layout: Layout,
    /// First-stage variables.
    pub x: Vec<VarId>,
    /// Second-stage variables; `y[j]` is the model variable of column `j`.
    pub y: Vec<VarId>,
    /// Uncertainty variables.
    pub sigma: Vec<VarId>,
    /// Recourse cost per second-stage column.
    pub cost: Vec<f64>,
    pub first_rows: Vec<usize>,
    pub recourse: Vec<SplitRow>,
    /// Rows over uncertainty variables only (budget), split like recourse rows.
    pub uncertainty_rows: Vec<SplitRow>,
}

impl CompactModel {
    pub fn family_counts(&self) -> [usize; 3] {
        [Family::I, Family::II, Family::III].map(|f| self.builder.family_count(f))
    }
}

/// Builds the full model for an instance.
pub fn assemble_compact(inst: &Instance) -> SolveResult<CompactModel> {
    let clusters = cluster_tasks(inst);
    let mut mb = ModelBuilder::new();
    let crew_vars = CrewVars::allocate(inst, &clusters, &mut mb);
    let grid_vars = GridVars::allocate(inst, &mut mb);
    let cyber_vars = CyberVars::allocate(inst, &crew_vars, &mut mb);
    let unc_vars = UncertaintyVars::allocate(inst, &mut mb);

    crew::emit_crew_routing(inst, &crew_vars, &mut mb);
    crew::emit_arrival_times(inst, &crew_vars, &mut mb);
    crew::emit_completion_times(inst, &crew_vars, &mut mb);
    crew::emit_status_timelines(inst, &crew_vars, &mut mb);
    grid::emit_source_and_load_limits(inst, &crew_vars, &grid_vars, &unc_vars, &mut mb);
    grid::emit_power_flow(inst, &crew_vars, &grid_vars, &mut mb);
    grid::emit_frr(inst, &crew_vars, &grid_vars, &mut mb);
    grid::emit_radiality(inst, &grid_vars, &mut mb);
    cyber::emit_cyber_availability(inst, &cyber_vars, &mut mb);
    cyber::emit_cyber_power_dependency(inst, &cyber_vars, &grid_vars, &mut mb);
    cyber::emit_remote_switching(inst, &crew_vars, &cyber_vars, &grid_vars, &mut mb);
    emit_uncertainty_set(inst, &unc_vars, &mut mb);
    grid::emit_objective(inst, &grid_vars, &mut mb);

    let layout = Layout { clusters, crew: crew_vars, grid: grid_vars, cyber: cyber_vars, uncertainty: unc_vars };
    classify(mb, layout)
}

/// Splits variables by stage and rows by content. Rows over first-stage
/// variables only become family I, rows touching σ become family III. A
/// family I row that touches second-stage or uncertainty variables is a
/// stage contradiction.
pub fn classify(mut builder: ModelBuilder, layout: Layout) -> SolveResult<CompactModel> {
    let n = builder.vars.len();
    let mut col = vec![usize::MAX; n];
    let (mut x, mut y, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    for (i, v) in builder.vars.iter().enumerate() {
        match v.stage {
            Stage::First => x.push(VarId(i)),
            Stage::Second => {
                col[i] = y.len();
                y.push(VarId(i));
            }
            Stage::Uncertainty => {
                col[i] = sigma.len();
                sigma.push(VarId(i));
            }
        }
    }
    let mut cost = vec![0.0; y.len()];
    for &(v, c) in &builder.objective {
        if builder.vars[v.0].stage != Stage::Second {
            return Err(SolveError::Assembly(format!("objective term on non-recourse variable `{}`", builder.vars[v.0].name)));
        }
        cost[col[v.0]] += c;
    }

    let mut first_rows = Vec::new();
    let mut recourse = Vec::new();
    let mut uncertainty_rows = Vec::new();
    let mut used = vec![false; n];
    for (r, row) in builder.rows.iter_mut().enumerate() {
        let mut split = SplitRow { row: r, y: Vec::new(), x: Vec::new(), sigma: Vec::new(), sense: row.sense, rhs: row.rhs };
        for &(v, c) in &row.terms {
            match builder.vars[v.0].stage {
                Stage::First => split.x.push((v, c)),
                Stage::Second => split.y.push((col[v.0], c)),
                Stage::Uncertainty => split.sigma.push((col[v.0], c)),
            }
        }
        let has_y = !split.y.is_empty();
        let has_sigma = !split.sigma.is_empty();
        if row.family == Family::I && (has_y || has_sigma) {
            return Err(SolveError::Assembly(format!(
                "stage contradiction: schedule row `{}` ({}) references operation or uncertainty variables",
                row.name, row.tag
            )));
        }
        if !has_y && !has_sigma {
            row.family = Family::I;
            first_rows.push(r);
            continue;
        }
        if has_sigma {
            row.family = Family::III;
        } else if row.family == Family::III {
            row.family = Family::II;
        }
        for &(v, _) in &row.terms {
            used[v.0] = true;
        }
        if has_y {
            recourse.push(split);
        } else {
            uncertainty_rows.push(split);
        }
    }
    // e.g. the voltage of an isolated bus; harmless within its bounds
    for &v in &y {
        if !used[v.0] && cost[col[v.0]] == 0.0 {
            log::debug!("operation variable `{}` appears in no recourse row", builder.vars[v.0].name);
        }
    }
    Ok(CompactModel { builder, layout, x, y, sigma, cost, first_rows, recourse, uncertainty_rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_layout() -> Layout {
        Layout {
            clusters: Clusters { repair: vec![], operating: vec![] },
            crew: CrewVars {
                repair: vec![],
                operating: vec![],
                beta_rc: vec![],
                beta_oc: vec![],
                repair_end: vec![],
                cell_clear: vec![],
                switch_clear: vec![],
                operation_end: vec![],
                u_line: vec![],
                u_cell: vec![],
                w_manual: vec![],
            },
            grid: GridVars {
                w: vec![],
                root: vec![],
                commodity: vec![],
                shed: vec![],
                volt: vec![],
                p_src: vec![],
                q_src: vec![],
                alpha: vec![],
                p_line: vec![],
                q_line: vec![],
            },
            cyber: CyberVars { avail: vec![], link: vec![], ups: vec![], w_remote: vec![], remote_clear: vec![] },
            uncertainty: UncertaintyVars { up: vec![], down: vec![], available: vec![] },
        }
    }

    #[test]
    fn promotes_schedule_only_rows_and_rejects_contradictions() {
        let mut mb = ModelBuilder::new();
        let x = mb.binary("x");
        let y = mb.second("y", 0.0, 1.0);
        mb.le("t", "only-x", Family::II, x, 1.0);
        mb.le("t", "mixed", Family::II, y, x);
        mb.add_objective(y, 1.0);
        let cm = classify(mb.clone(), empty_layout()).unwrap();
        assert_eq!(cm.first_rows, vec![0]);
        assert_eq!(cm.builder.rows[0].family, Family::I);
        assert_eq!(cm.recourse.len(), 1);

        mb.le("t", "bad", Family::I, y, 1.0);
        assert!(matches!(classify(mb, empty_layout()), Err(SolveError::Assembly(_))));
    }
}
