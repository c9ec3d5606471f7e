//! Sparse linear programs, a bounded revised simplex solver, and MPS export.

mod lu;
pub mod model;
pub mod mps;
mod simplex;

pub use model::{
    Constraint, LinearProgram, LpOptions, LpSolution, LpStats, LpStatus, Relation, RowId, Sense,
    VarId, Variable,
};
pub use mps::{export_lp, read_mps};
pub use simplex::{solve_lp, solve_lp_with};
