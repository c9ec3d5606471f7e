use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VarId = usize;
pub type RowId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse row; each variable appears at most once.
    pub coefficients: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program over bounded variables with sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub name: String,
    pub sense: Sense,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        LinearProgram {
            name: name.into(),
            sense,
            variables: Vec::new(),
            constraints: Vec::new(),
        }
    }

    /// Adds a variable with bounds `lower <= x <= upper` (either may be infinite).
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            objective,
        });
        self.variables.len() - 1
    }

    /// Adds a row; repeated variables in `coefficients` are summed and zeros dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coefficients: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        let mut coeffs: Vec<(VarId, f64)> = coefficients.into_iter().collect();
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some((k, b)) if *k == j => *b += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            coefficients: merged,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.variables[var].lower = lower;
        self.variables[var].upper = upper;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.constraints[row].rhs = rhs;
    }

    /// Checks bounds, indices and finiteness of every coefficient.
    pub fn validate(&self) -> Result<()> {
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan()
                || v.upper.is_nan()
                || v.lower > v.upper
                || v.lower == f64::INFINITY
                || v.upper == f64::NEG_INFINITY
            {
                return Err(Error::Usage(format!(
                    "variable {j} ({}) has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if !v.objective.is_finite() {
                return Err(Error::Usage(format!(
                    "variable {j} ({}) has objective {}",
                    v.name, v.objective
                )));
            }
        }
        let n = self.variables.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::Usage(format!(
                    "row {i} ({}) has right-hand side {}",
                    c.name, c.rhs
                )));
            }
            for &(j, a) in &c.coefficients {
                if j >= n {
                    return Err(Error::Usage(format!(
                        "row {i} ({}) references variable {j} of {n}",
                        c.name
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::Usage(format!(
                        "row {i} ({}) has coefficient {a}",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(x)
            .map(|(v, &xj)| v.objective * xj)
            .sum()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.constraints[row]
            .coefficients
            .iter()
            .map(|&(j, a)| a * x[j])
            .sum()
    }

    /// Largest bound or row violation of `x`, evaluated from scratch.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xj) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xj).max(xj - v.upper);
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let act = self.row_activity(i, x);
            let viol = match c.relation {
                Relation::LessEq => act - c.rhs,
                Relation::GreaterEq => c.rhs - act,
                Relation::Equal => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Relative gap between the primal objective of `solution` and the dual
    /// bound implied by its row duals. Infinite when the duals are not dual
    /// feasible within `tol`.
    pub fn duality_gap(&self, solution: &LpSolution, tol: f64) -> f64 {
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let y: Vec<f64> = solution.duals.iter().map(|v| sign * v).collect();
        if y.len() != self.constraints.len() || solution.x.len() != self.variables.len() {
            return f64::INFINITY;
        }
        let mut d: Vec<f64> = self.variables.iter().map(|v| sign * v.objective).collect();
        let mut dual = 0.0;
        for (c, &yi) in self.constraints.iter().zip(&y) {
            let ok = match c.relation {
                Relation::LessEq => yi <= tol,
                Relation::GreaterEq => yi >= -tol,
                Relation::Equal => true,
            };
            if !ok {
                return f64::INFINITY;
            }
            dual += c.rhs * yi;
            for &(j, a) in &c.coefficients {
                d[j] -= a * yi;
            }
        }
        for (v, &dj) in self.variables.iter().zip(&d) {
            if dj > tol {
                if v.lower == f64::NEG_INFINITY {
                    return f64::INFINITY;
                }
                dual += dj * v.lower;
            } else if dj < -tol {
                if v.upper == f64::INFINITY {
                    return f64::INFINITY;
                }
                dual += dj * v.upper;
            } else {
                // near-zero reduced cost: use the bound the primal sits on
                let bound = if v.lower.is_finite() {
                    v.lower
                } else if v.upper.is_finite() {
                    v.upper
                } else {
                    0.0
                };
                dual += dj * bound;
            }
        }
        let primal = sign * self.objective_value(&solution.x);
        (primal - dual).abs() / primal.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub phase1_iterations: usize,
    pub phase2_iterations: usize,
    pub bound_flips: usize,
    pub degenerate_pivots: usize,
    pub bland_pivots: usize,
    pub refactorizations: usize,
    pub singular_repairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the program's own sense.
    pub objective_value: f64,
    pub x: Vec<f64>,
    /// Row duals in the program's own sense.
    pub duals: Vec<f64>,
    pub stats: LpStats,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Zero means `10 * (rows + columns) + 1000`.
    pub max_iterations: usize,
    /// Basis updates between refactorizations.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            max_iterations: 0,
            refactor_interval: 64,
            bland_after: 50,
        }
    }
}
