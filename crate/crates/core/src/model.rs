//! Stage-tagged linear model builder.
//!
//! Every emitter writes into a [`ModelBuilder`]. Variables carry a stage
//! (first-stage schedule, second-stage operation, uncertainty) and rows carry
//! a family tag: I for schedule-only rows, II for rows coupling the schedule
//! with operation, III for rows touched by the uncertainty.

use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    First,
    Second,
    Uncertainty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    I,
    II,
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    /// Constraint family label, e.g. `arrival-chain`.
    pub tag: &'static str,
    pub family: Family,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Signed violation of the row at `values` (positive means violated).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => a - self.rhs,
            Sense::Ge => self.rhs - a,
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Affine expression over model variables.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        LinExpr { terms: vec![(v, c)], constant: 0.0 }
    }

    pub fn add_term(&mut self, v: VarId, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn sum(vars: impl IntoIterator<Item = VarId>) -> Self {
        LinExpr { terms: vars.into_iter().map(|v| (v, 1.0)).collect(), constant: 0.0 }
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        self + (-rhs.into())
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}

impl Mul<f64> for VarId {
    type Output = LinExpr;
    fn mul(self, k: f64) -> LinExpr {
        LinExpr::term(self, k)
    }
}

impl<T: Into<LinExpr>> Add<T> for VarId {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for VarId {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelBuilder {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Minimization objective over second-stage variables.
    pub objective: Vec<(VarId, f64)>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        ModelBuilder::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, stage: Stage) -> VarId {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            VarKind::Continuous => (lb, ub),
        };
        self.vars.push(Variable { name: name.into(), kind, lb, ub, stage });
        VarId(self.vars.len() - 1)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, Stage::First)
    }

    pub fn first(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, Stage::First)
    }

    pub fn second(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, Stage::Second)
    }

    /// Adds `lhs (sense) rhs`, moving all variables left and constants right.
    pub fn add_row(
        &mut self,
        tag: &'static str,
        name: impl Into<String>,
        family: Family,
        lhs: impl Into<LinExpr>,
        sense: Sense,
        rhs: impl Into<LinExpr>,
    ) {
        let expr = (lhs.into() - rhs.into()).compact();
        self.rows.push(Row { name: name.into(), tag, family, terms: expr.terms, sense, rhs: -expr.constant });
    }

    pub fn le(&mut self, tag: &'static str, name: impl Into<String>, family: Family, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        self.add_row(tag, name, family, lhs, Sense::Le, rhs);
    }

    pub fn ge(&mut self, tag: &'static str, name: impl Into<String>, family: Family, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        self.add_row(tag, name, family, lhs, Sense::Ge, rhs);
    }

    pub fn eq(&mut self, tag: &'static str, name: impl Into<String>, family: Family, lhs: impl Into<LinExpr>, rhs: impl Into<LinExpr>) {
        self.add_row(tag, name, family, lhs, Sense::Eq, rhs);
    }

    pub fn add_objective(&mut self, v: VarId, c: f64) {
        self.objective.push((v, c));
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Renders the full model (all stages, uncertainty as variables) in CPLEX
    /// LP text format.
    pub fn to_lp_format(&self) -> String {
        let name = |v: VarId| sanitize(&self.vars[v.0].name);
        let mut out = String::new();
        out.push_str("\\ stage-tagged restoration model\nMinimize\n obj:");
        write_terms(&mut out, &self.objective, &name);
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " r{}_{}_{}:", i, family_label(row.family), sanitize(&row.name));
            write_terms(&mut out, &row.terms, &name);
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", fmt_num(row.rhs));
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let n = name(VarId(i));
            let lb = if v.lb.is_finite() { fmt_num(v.lb) } else { "-inf".into() };
            let ub = if v.ub.is_finite() { fmt_num(v.ub) } else { "+inf".into() };
            let _ = writeln!(out, " {lb} <= {n} <= {ub}");
        }
        let bins: Vec<String> = (0..self.vars.len())
            .filter(|&i| self.vars[i].kind == VarKind::Binary)
            .map(|i| name(VarId(i)))
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for chunk in bins.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn family_label(f: Family) -> &'static str {
    match f {
        Family::I => "I",
        Family::II => "II",
        Family::III => "III",
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.12}")
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' }).collect()
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)], name: &dyn Fn(VarId) -> String) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for &(v, c) in terms {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), name(v));
    }
}
