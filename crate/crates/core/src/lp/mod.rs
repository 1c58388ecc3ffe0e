//! Sparse linear programs, an exact bounded-variable simplex solver, and MPS
//! interchange.

mod lu;
mod mps;
mod simplex;

pub use mps::{apply_name_table, read_mps, write_mps, MpsDocument, MpsError};
pub use simplex::SimplexSolver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute primal feasibility tolerance, applied on scaled rows.
pub const FEAS_TOL: f64 = 1.0e-7;
/// Reduced-cost optimality tolerance, applied on the scaled objective.
pub const OPT_TOL: f64 = 1.0e-7;
/// Integrality tolerance for branch-and-bound.
pub const INT_TOL: f64 = 1.0e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
    pub integer: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub terms: Vec<(VarId, f64)>,
}

/// A linear program over bounded variables, stored row-wise.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpProblem {
    pub name: String,
    pub maximize: bool,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("iteration cap of {cap} exceeded after {iterations} pivots; pivoting stalled")]
    IterationLimit { cap: usize, iterations: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
}

impl LpProblem {
    pub fn new(name: impl Into<String>, maximize: bool) -> Self {
        LpProblem {
            name: name.into(),
            maximize,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
        obj: f64,
        integer: bool,
    ) -> VarId {
        assert!(lb <= ub, "variable bounds must satisfy lb <= ub");
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name: name.into(),
            lb,
            ub,
            obj,
            integer,
        });
        id
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        terms: Vec<(VarId, f64)>,
    ) -> RowId {
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            assert!(v.0 < self.vars.len(), "constraint references unknown variable");
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, acc)) => *acc += a,
                None => merged.push((v, a)),
            }
        }
        let terms = merged;
        let id = RowId(self.rows.len());
        self.rows.push(Constraint {
            name: name.into(),
            sense,
            rhs,
            terms,
        });
        id
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn row(&self, id: RowId) -> &Constraint {
        &self.rows[id.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn set_bounds(&mut self, id: VarId, lb: f64, ub: f64) {
        assert!(lb <= ub, "variable bounds must satisfy lb <= ub");
        self.vars[id.0].lb = lb;
        self.vars[id.0].ub = ub;
    }

    pub fn set_objective(&mut self, id: VarId, obj: f64) {
        self.vars[id.0].obj = obj;
    }

    pub fn rename_var(&mut self, id: VarId, name: impl Into<String>) {
        self.vars[id.0].name = name.into();
    }

    pub fn rename_row(&mut self, id: RowId, name: impl Into<String>) {
        self.rows[id.0].name = name.into();
    }

    pub fn integer_vars(&self) -> Vec<VarId> {
        (0..self.vars.len())
            .filter(|&i| self.vars[i].integer)
            .map(VarId)
            .collect()
    }

    /// Objective value of an arbitrary assignment, in the problem's own sense.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .map(|(v, &x)| v.obj * x)
            .sum()
    }

    /// Left-hand-side value of one row under an assignment.
    pub fn row_activity(&self, row: RowId, values: &[f64]) -> f64 {
        self.rows[row.0]
            .terms
            .iter()
            .map(|&(v, a)| a * values[v.0])
            .sum()
    }

    /// Largest bound or row violation of an assignment, for cheap feasibility
    /// screening of candidate solutions.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0f64;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
        }
        for (idx, row) in self.rows.iter().enumerate() {
            let lhs = self.row_activity(RowId(idx), values);
            let gap = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
                Sense::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let mut names = std::collections::BTreeSet::new();
        for v in &self.vars {
            if !names.insert(&v.name) {
                return Err(LpError::Invalid(format!("duplicate variable name {}", v.name)));
            }
            if v.lb > v.ub || v.lb.is_nan() || v.ub.is_nan() {
                return Err(LpError::Invalid(format!("bad bounds on {}", v.name)));
            }
        }
        let mut rnames = std::collections::BTreeSet::new();
        for r in &self.rows {
            if !rnames.insert(&r.name) {
                return Err(LpError::Invalid(format!("duplicate row name {}", r.name)));
            }
            if !r.rhs.is_finite() {
                return Err(LpError::Invalid(format!("non-finite rhs on {}", r.name)));
            }
        }
        Ok(())
    }

    /// Human-readable dump, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let sense = if self.maximize { "maximize" } else { "minimize" };
        out.push_str(&format!("{} {}:", self.name, sense));
        for v in &self.vars {
            if v.obj != 0.0 {
                out.push_str(&format!(" {:+}*{}", v.obj, v.name));
            }
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("  {}:", r.name));
            for &(v, a) in &r.terms {
                out.push_str(&format!(" {:+}*{}", a, self.vars[v.0].name));
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            out.push_str(&format!(" {} {}\n", op, r.rhs));
        }
        for v in &self.vars {
            out.push_str(&format!(
                "  {} in [{}, {}]{}\n",
                v.name,
                v.lb,
                v.ub,
                if v.integer { " integer" } else { "" }
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    /// One dual multiplier per row, in the problem's own objective sense.
    pub duals: Vec<f64>,
    /// Reduced cost of each variable at the final basis.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solves the continuous relaxation of `p` (integrality flags are ignored).
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut solver = SimplexSolver::new(p);
    solver.solve()?;
    Ok(solver.extract_solution())
}
