//! Compliant-agent analysis for system-optimal routing in congested networks.
//!
//! Given a network with flow-dependent link latencies and an
//! origin-destination demand table, this crate computes
//!
//! * the user-equilibrium and system-optimum flows ([`assignment`]),
//! * the links self-interested agents would accept inside a system-optimal
//!   flow ([`reduced_cost`]),
//! * the largest share of self-interested demand under which the system
//!   optimum is still reachable, whether a given compliant demand suffices,
//!   and path prescriptions for the compliant agents ([`compliance`]).
//!
//! Linear programs are solved by the bundled bounded revised simplex in
//! [`lp`], which can also export MPS files for external solvers. [`oracle`]
//! holds brute-force reference computations for small instances.

pub mod assignment;
pub mod cli;
pub mod compliance;
pub mod error;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod paths;
pub mod reduced_cost;
pub mod report;
pub mod tntp;

pub use assignment::{
    solve_equilibrium, AssignmentOptions, CostMetric, EquilibriumSolution, Objective,
};
pub use compliance::{
    assign_compliant_flow, build_ue_lp, check_sufficiency, decompose_flow, max_ue_share,
    run_pipeline, ComplianceResult, PipelineOptions, PipelineResult, ShareFormulation, Sufficiency,
};
pub use error::{Error, Result};
pub use network::{
    LatencyFunction, LinkFlow, LinkId, NetworkBuilder, NetworkModel, NodeId, PathFlow, PathFlowSet,
};
pub use reduced_cost::{
    compute_threshold, zero_reduced_cost_links, ReducedCostMode, ReducedCostSets,
};
