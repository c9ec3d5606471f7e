//! How much demand can route selfishly while the network still reaches its
//! system optimum, and how the rest has to be routed.
//!
//! The selfish share is the optimum of a multi-commodity linear program with
//! one commodity per origin `s`:
//!
//! ```text
//! max   sum r[s,t]
//! s.t.  0 <= r[s,t] <= R(s,t)
//!       sum_{e in out(s)} x[s,e] = sum_t r[s,t]
//!       sum_{e in in(v)} x[s,e] - sum_{e in out(v)} x[s,e] = r[s,v]   (v != s)
//!       sum_s x[s,e] <= fbar[e]
//!       x[s,e] >= 0, only for zero-reduced-cost links of s
//! ```
//!
//! where `fbar[e]` is the largest flow on `e` with unchanged system-optimal
//! latency.
//!
//! On its own this program can overstate the selfish share: on links with
//! flat latency `fbar` is unbounded, so selfish flow may take capacity the
//! compliant remainder needs elsewhere (Braess' network is an example: the
//! program admits 0.5 selfish units on the shortcut, after which the other
//! 0.5 units cannot reach the sink). [`ShareFormulation::Joint`], the
//! default, therefore adds compliant commodities `y[s,e]` on all links that
//! route `R(s,t) - r[s,t]` and share the capacity rows. Its optimum is the
//! largest selfish demand for which a compliant completion exists.
//!
//! The compliant demand is finally routed by a separate least-latency
//! program inside the leftover capacity, and both link flows are decomposed
//! into per-pair path prescriptions.

use std::collections::BTreeMap;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::assignment::{
    compute_f_bar, solve_equilibrium, AssignmentOptions, EquilibriumSolution, Objective,
};
use crate::error::{Error, Result};
use crate::lp::{
    solve_lp_with, LinearProgram, LpOptions, LpStats, LpStatus, Relation, RowId, Sense, VarId,
};
use crate::network::{LinkFlow, LinkId, NetworkModel, NodeId, PathFlow, PathFlowSet};
use crate::reduced_cost::{ReducedCostMode, ReducedCostSets};

/// Tolerance for flow conservation checks, relative to an origin's demand.
pub const CONSERVATION_TOL: f64 = 1e-7;

/// Which selfish-share program to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShareFormulation {
    /// Selfish and compliant commodities share the capacities.
    #[default]
    Joint,
    /// Selfish commodities only; the compliant routing may then be infeasible.
    SelfishOnly,
}

impl std::str::FromStr for ShareFormulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(ShareFormulation::Joint),
            "selfish-only" => Ok(ShareFormulation::SelfishOnly),
            other => Err(Error::Usage(format!(
                "unknown formulation {other:?} (expected joint or selfish-only)"
            ))),
        }
    }
}

impl std::fmt::Display for ShareFormulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShareFormulation::Joint => "joint",
            ShareFormulation::SelfishOnly => "selfish-only",
        })
    }
}

/// The selfish-share program together with its variable maps.
#[derive(Debug, Clone)]
pub struct UeLpInstance {
    pub formulation: ShareFormulation,
    pub lp: LinearProgram,
    /// Demand-share variable of each pair with demand.
    pub r_vars: BTreeMap<(NodeId, NodeId), VarId>,
    /// Commodity link variables per origin, sorted by link.
    pub x_vars: BTreeMap<NodeId, Vec<(LinkId, VarId)>>,
    /// Compliant commodity variables per origin; empty for
    /// [`ShareFormulation::SelfishOnly`].
    pub y_vars: BTreeMap<NodeId, Vec<(LinkId, VarId)>>,
    /// Shared capacity rows, one per link with finite `fbar`.
    pub capacity_rows: Vec<(LinkId, RowId)>,
    pub f_bar: Vec<f64>,
}

impl UeLpInstance {
    /// Per-origin link flows read from an LP solution vector.
    pub fn origin_flows(&self, num_links: usize, x: &[f64]) -> BTreeMap<NodeId, LinkFlow> {
        self.x_vars
            .iter()
            .map(|(&s, vars)| {
                let mut f = vec![0.0; num_links];
                for &(e, j) in vars {
                    f[e] = x[j];
                }
                (s, LinkFlow::from_clamped(f))
            })
            .collect()
    }

    /// Pins every demand-share variable to `r[s,t]` (missing pairs to zero).
    pub fn fix_shares(&mut self, shares: &BTreeMap<(NodeId, NodeId), f64>) {
        for (pair, &j) in &self.r_vars {
            let v = shares.get(pair).copied().unwrap_or(0.0);
            self.lp.set_bounds(j, v, v);
        }
    }
}

fn check_inputs(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
) -> Result<()> {
    let fp = model.fingerprint();
    if so.objective != Objective::SystemOptimum {
        return Err(Error::Usage("a system-optimum solution is required".into()));
    }
    if so.model_fingerprint != fp || rc.model_fingerprint != fp {
        return Err(Error::Usage(
            "solution or reduced-cost sets belong to a different network".into(),
        ));
    }
    Ok(())
}

fn node_name(model: &NetworkModel, v: NodeId) -> u64 {
    model.node_label(v)
}

/// Links commodity `s` may use: none entering `s`, none leaving a node that
/// cannot be passed through.
fn commodity_links(model: &NetworkModel, s: NodeId) -> impl Iterator<Item = LinkId> + '_ {
    (0..model.num_links()).filter(move |&e| {
        let l = model.link(e);
        l.head != s && (l.tail == s || model.allows_through(l.tail))
    })
}

/// Builds the selfish-only program for `so` and `rc`.
pub fn build_ue_lp(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
) -> Result<UeLpInstance> {
    build_share_lp(model, so, rc, ShareFormulation::SelfishOnly)
}

/// Builds the selfish-share program in the requested formulation.
pub fn build_share_lp(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
    formulation: ShareFormulation,
) -> Result<UeLpInstance> {
    check_inputs(model, so, rc)?;
    let f_bar = so
        .f_bar
        .clone()
        .unwrap_or_else(|| compute_f_bar(model, &so.link_flow));
    let name = match formulation {
        ShareFormulation::Joint => "joint_share",
        ShareFormulation::SelfishOnly => "selfish_share",
    };
    let mut lp = LinearProgram::new(name, Sense::Maximize);
    let mut r_vars = BTreeMap::new();
    let mut x_vars = BTreeMap::new();
    let mut y_vars = BTreeMap::new();
    let mut per_link: Vec<Vec<VarId>> = vec![Vec::new(); model.num_links()];

    for s in model.origins() {
        let ls = node_name(model, s);
        let mut r_of: BTreeMap<NodeId, VarId> = BTreeMap::new();
        for (t, d) in model.destinations(s) {
            let j = lp.add_variable(format!("r[{ls},{}]", node_name(model, t)), 0.0, d, 1.0);
            r_vars.insert((s, t), j);
            r_of.insert(t, j);
        }
        let mut xs = Vec::new();
        for &e in rc.links(s) {
            if model.link(e).head == s {
                continue;
            }
            let j = lp.add_variable(format!("x[{ls},{}]", e + 1), 0.0, f64::INFINITY, 0.0);
            xs.push((e, j));
            per_link[e].push(j);
        }

        let mut inflow: BTreeMap<NodeId, Vec<(VarId, f64)>> = BTreeMap::new();
        for &(e, j) in &xs {
            let l = model.link(e);
            inflow.entry(l.head).or_default().push((j, 1.0));
            inflow.entry(l.tail).or_default().push((j, -1.0));
        }
        for (&t, &j) in &r_of {
            inflow.entry(t).or_default().push((j, -1.0));
        }
        // origin row: outflow equals the routed shares
        let mut source: Vec<(VarId, f64)> = inflow
            .remove(&s)
            .unwrap_or_default()
            .into_iter()
            .map(|(j, a)| (j, -a))
            .collect();
        for &j in r_of.values() {
            source.push((j, -1.0));
        }
        lp.add_constraint(format!("source[{ls}]"), source, Relation::Equal, 0.0);
        for (v, coeffs) in inflow {
            lp.add_constraint(
                format!("balance[{ls},{}]", node_name(model, v)),
                coeffs,
                Relation::Equal,
                0.0,
            );
        }
        x_vars.insert(s, xs);

        if formulation == ShareFormulation::Joint {
            // compliant commodity: in - out + r[s,v] = R(s,v), origin row by symmetry
            let mut ys = Vec::new();
            let mut rows: BTreeMap<NodeId, Vec<(VarId, f64)>> = BTreeMap::new();
            let mut rhs: BTreeMap<NodeId, f64> = BTreeMap::new();
            for e in commodity_links(model, s) {
                let j = lp.add_variable(format!("y[{ls},{}]", e + 1), 0.0, f64::INFINITY, 0.0);
                ys.push((e, j));
                per_link[e].push(j);
                let l = model.link(e);
                rows.entry(l.head).or_default().push((j, 1.0));
                rows.entry(l.tail).or_default().push((j, -1.0));
            }
            let mut supply = 0.0;
            for (&t, &j) in &r_of {
                let d = model.demand_between(s, t);
                rows.entry(t).or_default().push((j, 1.0));
                *rhs.entry(t).or_default() += d;
                rows.entry(s).or_default().push((j, -1.0));
                supply += d;
            }
            *rhs.entry(s).or_default() -= supply;
            for (v, coeffs) in rows {
                let b = rhs.get(&v).copied().unwrap_or(0.0);
                lp.add_constraint(
                    format!("cbalance[{ls},{}]", node_name(model, v)),
                    coeffs,
                    Relation::Equal,
                    b,
                );
            }
            y_vars.insert(s, ys);
        }
    }

    let mut capacity_rows = Vec::new();
    for (e, vars) in per_link.iter().enumerate() {
        if vars.is_empty() || !f_bar[e].is_finite() {
            continue;
        }
        let row = lp.add_constraint(
            format!("cap[{}]", e + 1),
            vars.iter().map(|&j| (j, 1.0)),
            Relation::LessEq,
            f_bar[e],
        );
        capacity_rows.push((e, row));
    }
    Ok(UeLpInstance {
        formulation,
        lp,
        r_vars,
        x_vars,
        y_vars,
        capacity_rows,
        f_bar,
    })
}

/// Selfish and compliant routing that together reproduce the system optimum.
///
/// With [`ShareFormulation::SelfishOnly`] the compliant remainder may have no
/// routing at all; `compliant_routed` is then false and the compliant flow,
/// per-origin flows and paths are empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComplianceResult {
    pub formulation: ShareFormulation,
    /// Selfish demand per pair.
    pub r_ue: BTreeMap<(NodeId, NodeId), f64>,
    /// Compliant demand per pair, `R(s,t) - r_ue(s,t)`.
    pub r_compliant: BTreeMap<(NodeId, NodeId), f64>,
    pub r_ue_total: f64,
    pub total_demand: f64,
    /// `1 - r_ue_total / total_demand`, in [0, 1].
    pub compliant_fraction: f64,
    pub compliant_routed: bool,
    pub ue_subflow: LinkFlow,
    pub ue_per_origin: BTreeMap<NodeId, LinkFlow>,
    pub compliant_flow: LinkFlow,
    pub compliant_per_origin: BTreeMap<NodeId, LinkFlow>,
    pub ue_paths: PathFlowSet,
    pub compliant_paths: PathFlowSet,
    /// Cycles removed while decomposing either flow.
    pub canceled_cycles: Vec<CanceledCycle>,
    pub ue_lp_stats: LpStats,
    pub compliant_lp_stats: LpStats,
}

impl ComplianceResult {
    /// Selfish plus compliant link flow.
    pub fn combined_flow(&self) -> LinkFlow {
        self.ue_subflow.plus(&self.compliant_flow)
    }
}

fn aggregate(num_links: usize, flows: &BTreeMap<NodeId, LinkFlow>) -> LinkFlow {
    let mut v = vec![0.0; num_links];
    for f in flows.values() {
        for (e, &x) in f.values().iter().enumerate() {
            v[e] += x;
        }
    }
    LinkFlow::from_clamped(v)
}

fn finish(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    inst: &UeLpInstance,
    x: &[f64],
    ue_lp_stats: LpStats,
    lp_opts: &LpOptions,
) -> Result<ComplianceResult> {
    let mut r_ue = BTreeMap::new();
    let mut r_compliant = BTreeMap::new();
    for (&(s, t), &j) in &inst.r_vars {
        let d = model.demand_between(s, t);
        let r = x[j].clamp(0.0, d);
        r_ue.insert((s, t), r);
        r_compliant.insert((s, t), d - r);
    }
    let ue_per_origin = inst.origin_flows(model.num_links(), x);
    let ue_subflow = aggregate(model.num_links(), &ue_per_origin);
    let routed = route_compliant(model, so, &ue_per_origin, &r_compliant, lp_opts)
        .map_err(|e| e.in_stage("compliant-lp"))?;
    let compliant_routed = routed.is_some();
    let assignment = match routed {
        Some(a) => a,
        None if inst.formulation == ShareFormulation::SelfishOnly => {
            warn!("no compliant routing completes the selfish-only share; the share is an upper bound");
            CompliantAssignment {
                flow: LinkFlow::zeros(model.num_links()),
                per_origin: BTreeMap::new(),
                lp_stats: LpStats::default(),
            }
        }
        None => return Err(Error::Internal(INFEASIBLE_ROUTING.into()).in_stage("compliant-lp")),
    };
    let ue_dec =
        decompose_flow(model, &ue_per_origin, &r_ue).map_err(|e| e.in_stage("decomposition"))?;
    let c_dec = if compliant_routed {
        decompose_flow(model, &assignment.per_origin, &r_compliant)
            .map_err(|e| e.in_stage("decomposition"))?
    } else {
        Decomposition::default()
    };

    let r_ue_total: f64 = r_ue.values().sum();
    let total_demand = model.total_demand();
    let compliant_fraction = if total_demand > 0.0 {
        (1.0 - r_ue_total / total_demand).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut canceled_cycles = ue_dec.cycles;
    canceled_cycles.extend(c_dec.cycles);
    Ok(ComplianceResult {
        formulation: inst.formulation,
        r_ue,
        r_compliant,
        r_ue_total,
        total_demand,
        compliant_fraction,
        compliant_routed,
        ue_subflow,
        ue_per_origin,
        compliant_flow: assignment.flow,
        compliant_per_origin: assignment.per_origin,
        ue_paths: ue_dec.paths,
        compliant_paths: c_dec.paths,
        canceled_cycles,
        ue_lp_stats,
        compliant_lp_stats: assignment.lp_stats,
    })
}

/// Largest selfish demand compatible with the system optimum, with the
/// matching compliant routing.
pub fn max_ue_share(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
) -> Result<ComplianceResult> {
    max_ue_share_with(
        model,
        so,
        rc,
        ShareFormulation::Joint,
        &LpOptions::default(),
    )
}

pub fn max_ue_share_with(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
    formulation: ShareFormulation,
    lp_opts: &LpOptions,
) -> Result<ComplianceResult> {
    let inst = build_share_lp(model, so, rc, formulation).map_err(|e| e.in_stage("ue-lp"))?;
    let sol = solve_lp_with(&inst.lp, lp_opts).map_err(|e| e.in_stage("ue-lp"))?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::Internal(
                "selfish-share program is infeasible although zero is feasible".into(),
            )
            .in_stage("ue-lp"));
        }
        other => {
            return Err(Error::Internal(format!(
                "selfish-share program ended with status {other:?}"
            ))
            .in_stage("ue-lp"))
        }
    }
    info!(
        "{formulation} share program: {} variables, {} rows, {} iterations, optimum {}",
        inst.lp.num_variables(),
        inst.lp.num_constraints(),
        sol.stats.phase1_iterations + sol.stats.phase2_iterations,
        sol.objective_value
    );
    finish(model, so, &inst, &sol.x, sol.stats.clone(), lp_opts)
}

/// Verdict of [`check_sufficiency`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Sufficiency {
    /// The compliant demand suffices; carries a witness routing.
    Sufficient(Box<ComplianceResult>),
    Insufficient,
}

impl Sufficiency {
    pub fn is_sufficient(&self) -> bool {
        matches!(self, Sufficiency::Sufficient(_))
    }
}

/// Whether routing `compliant_demand` centrally (the rest selfishly) can
/// reproduce the system optimum. Pairs missing from the map have no
/// compliant demand.
pub fn check_sufficiency(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
    compliant_demand: &BTreeMap<(NodeId, NodeId), f64>,
) -> Result<Sufficiency> {
    check_sufficiency_with(
        model,
        so,
        rc,
        compliant_demand,
        ShareFormulation::Joint,
        &LpOptions::default(),
    )
}

pub fn check_sufficiency_with(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
    compliant_demand: &BTreeMap<(NodeId, NodeId), f64>,
    formulation: ShareFormulation,
    lp_opts: &LpOptions,
) -> Result<Sufficiency> {
    for (&(s, t), &c) in compliant_demand {
        let d = model.demand_between(s, t);
        if !(c >= 0.0) || c > d * (1.0 + 1e-12) {
            return Err(Error::Usage(format!(
                "compliant demand {c} for ({s}, {t}) is outside [0, {d}]"
            )));
        }
    }
    let mut inst = build_share_lp(model, so, rc, formulation).map_err(|e| e.in_stage("ue-lp"))?;
    let shares: BTreeMap<(NodeId, NodeId), f64> = model
        .demand()
        .iter()
        .map(|(&pair, &d)| {
            (
                pair,
                (d - compliant_demand.get(&pair).copied().unwrap_or(0.0).min(d)).max(0.0),
            )
        })
        .collect();
    inst.fix_shares(&shares);
    let sol = solve_lp_with(&inst.lp, lp_opts).map_err(|e| e.in_stage("ue-lp"))?;
    match sol.status {
        LpStatus::Optimal => Ok(Sufficiency::Sufficient(Box::new(finish(
            model,
            so,
            &inst,
            &sol.x,
            sol.stats.clone(),
            lp_opts,
        )?))),
        LpStatus::Infeasible => Ok(Sufficiency::Insufficient),
        other => Err(
            Error::Internal(format!("sufficiency program ended with status {other:?}"))
                .in_stage("ue-lp"),
        ),
    }
}

/// Compliant routing inside the capacity left by the selfish flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompliantAssignment {
    pub flow: LinkFlow,
    pub per_origin: BTreeMap<NodeId, LinkFlow>,
    pub lp_stats: LpStats,
}

/// Routes `compliant_demand` with per-origin commodities so that the total
/// compliant flow on each link stays within `fbar - selfish flow`. Among
/// feasible routings, the one with least system-optimal latency is chosen.
pub fn assign_compliant_flow(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    ue_per_origin: &BTreeMap<NodeId, LinkFlow>,
    compliant_demand: &BTreeMap<(NodeId, NodeId), f64>,
) -> Result<CompliantAssignment> {
    assign_compliant_flow_with(
        model,
        so,
        ue_per_origin,
        compliant_demand,
        &LpOptions::default(),
    )
}

/// Latency weight added per link so that zero-latency cycles are never optimal.
const CYCLE_PENALTY: f64 = 1e-6;

const INFEASIBLE_ROUTING: &str =
    "compliant demand cannot be routed in the capacity left by the selfish flow";

pub fn assign_compliant_flow_with(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    ue_per_origin: &BTreeMap<NodeId, LinkFlow>,
    compliant_demand: &BTreeMap<(NodeId, NodeId), f64>,
    lp_opts: &LpOptions,
) -> Result<CompliantAssignment> {
    route_compliant(model, so, ue_per_origin, compliant_demand, lp_opts)?
        .ok_or_else(|| Error::Internal(INFEASIBLE_ROUTING.into()))
}

fn route_compliant(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    ue_per_origin: &BTreeMap<NodeId, LinkFlow>,
    compliant_demand: &BTreeMap<(NodeId, NodeId), f64>,
    lp_opts: &LpOptions,
) -> Result<Option<CompliantAssignment>> {
    let m = model.num_links();
    let f_bar = so
        .f_bar
        .clone()
        .unwrap_or_else(|| compute_f_bar(model, &so.link_flow));
    let ue = aggregate(m, ue_per_origin);
    let mut by_origin: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
    for (&(s, t), &d) in compliant_demand {
        if d > 0.0 {
            by_origin.entry(s).or_default().push((t, d));
        }
    }
    let mut lp = LinearProgram::new("compliant_routing", Sense::Minimize);
    let mut vars: BTreeMap<NodeId, Vec<(LinkId, VarId)>> = BTreeMap::new();
    let mut per_link: Vec<Vec<VarId>> = vec![Vec::new(); m];
    for (&s, dests) in &by_origin {
        let ls = node_name(model, s);
        let mut mine = Vec::new();
        for e in commodity_links(model, s) {
            let cost = so.link_latency[e] + CYCLE_PENALTY;
            let j = lp.add_variable(format!("y[{ls},{}]", e + 1), 0.0, f64::INFINITY, cost);
            mine.push((e, j));
            per_link[e].push(j);
        }
        let mut balance: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); model.num_nodes()];
        for &(e, j) in &mine {
            let l = model.link(e);
            balance[l.head].push((j, 1.0));
            balance[l.tail].push((j, -1.0));
        }
        let mut rhs = vec![0.0; model.num_nodes()];
        for &(t, d) in dests {
            rhs[t] += d;
            rhs[s] -= d;
        }
        for (v, coeffs) in balance.into_iter().enumerate() {
            if coeffs.is_empty() && rhs[v] == 0.0 {
                continue;
            }
            lp.add_constraint(
                format!("balance[{ls},{}]", node_name(model, v)),
                coeffs,
                Relation::Equal,
                rhs[v],
            );
        }
        vars.insert(s, mine);
    }
    for (e, js) in per_link.iter().enumerate() {
        if js.is_empty() || !f_bar[e].is_finite() {
            continue;
        }
        let cap = (f_bar[e] - ue.get(e)).max(0.0);
        lp.add_constraint(
            format!("cap[{}]", e + 1),
            js.iter().map(|&j| (j, 1.0)),
            Relation::LessEq,
            cap,
        );
    }
    let sol = solve_lp_with(&lp, lp_opts)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        other => {
            return Err(Error::Internal(format!(
                "compliant routing program ended with status {other:?}"
            )))
        }
    }
    let per_origin: BTreeMap<NodeId, LinkFlow> = vars
        .iter()
        .map(|(&s, mine)| {
            let mut f = vec![0.0; m];
            for &(e, j) in mine {
                f[e] = sol.x[j];
            }
            (s, LinkFlow::from_clamped(f))
        })
        .collect();
    Ok(Some(CompliantAssignment {
        flow: aggregate(m, &per_origin),
        per_origin,
        lp_stats: sol.stats,
    }))
}

/// A circulation removed from an origin's flow during decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanceledCycle {
    pub origin: NodeId,
    pub links: Vec<LinkId>,
    pub flow: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub paths: PathFlowSet,
    pub cycles: Vec<CanceledCycle>,
}

/// Splits per-origin link flows into origin-destination path flows.
///
/// Each origin's flow must be conservative for its demands in `demands`.
/// Cycles are canceled first and reported; the remaining acyclic flow is
/// peeled off destination by destination along the heaviest incoming links.
pub fn decompose_flow(
    model: &NetworkModel,
    per_origin: &BTreeMap<NodeId, LinkFlow>,
    demands: &BTreeMap<(NodeId, NodeId), f64>,
) -> Result<Decomposition> {
    let mut out = Decomposition::default();
    let n = model.num_nodes();
    for (&s, flow) in per_origin {
        if flow.len() != model.num_links() {
            return Err(Error::Usage(format!(
                "flow of origin {s} has {} entries for {} links",
                flow.len(),
                model.num_links()
            )));
        }
        let dests: Vec<(NodeId, f64)> = demands
            .range((s, 0)..=(s, usize::MAX))
            .map(|(&(_, t), &d)| (t, d))
            .filter(|&(_, d)| d > 0.0)
            .collect();
        let supply: f64 = dests.iter().map(|&(_, d)| d).sum();
        let tol = CONSERVATION_TOL * supply.max(1.0);

        let mut net = vec![0.0; n];
        for (e, &x) in flow.values().iter().enumerate() {
            let l = model.link(e);
            net[l.head] += x;
            net[l.tail] -= x;
        }
        net[s] += supply;
        for &(t, d) in &dests {
            net[t] -= d;
        }
        if let Some((v, &gap)) = net
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        {
            if gap.abs() > tol {
                return Err(Error::Usage(format!(
                    "flow of origin {s} violates conservation at node {v} by {gap}"
                )));
            }
        }

        let mut f: Vec<f64> = flow.values().to_vec();
        let eps = 1e-12 * supply.max(1.0);
        for x in &mut f {
            if *x <= eps {
                *x = 0.0;
            }
        }
        out.cycles.extend(cancel_cycles(model, s, &mut f));

        for &(t, d) in &dests {
            let mut remaining = d;
            while remaining > eps {
                let Some(path) = heaviest_path_back(model, s, t, &f) else {
                    if remaining > tol {
                        return Err(Error::Usage(format!(
                            "flow of origin {s} cannot deliver {remaining} to {t}"
                        )));
                    }
                    break;
                };
                let bottleneck = path.iter().map(|&e| f[e]).fold(remaining, f64::min);
                for &e in &path {
                    f[e] -= bottleneck;
                    if f[e] <= eps {
                        f[e] = 0.0;
                    }
                }
                remaining -= bottleneck;
                out.paths.entries.push(PathFlow {
                    origin: s,
                    destination: t,
                    links: path,
                    flow: bottleneck,
                });
            }
        }
    }
    Ok(out)
}

/// Walks from `t` back to `s` along the heaviest positive incoming link.
fn heaviest_path_back(
    model: &NetworkModel,
    s: NodeId,
    t: NodeId,
    f: &[f64],
) -> Option<Vec<LinkId>> {
    let mut links = Vec::new();
    let mut v = t;
    let mut steps = 0;
    while v != s {
        let e = model
            .in_links(v)
            .iter()
            .copied()
            .filter(|&e| f[e] > 0.0)
            .max_by(|&a, &b| f[a].total_cmp(&f[b]).then(b.cmp(&a)))?;
        links.push(e);
        v = model.link(e).tail;
        steps += 1;
        if steps > model.num_nodes() {
            return None;
        }
    }
    links.reverse();
    Some(links)
}

/// Removes every directed cycle from the positive-flow subgraph.
fn cancel_cycles(model: &NetworkModel, s: NodeId, f: &mut [f64]) -> Vec<CanceledCycle> {
    let n = model.num_nodes();
    let mut found = Vec::new();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut color = vec![0u8; n];
    let mut via: Vec<Option<LinkId>> = vec![None; n];
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
        color[root] = 1;
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            let outs = model.out_links(u);
            if *next >= outs.len() {
                color[u] = 2;
                stack.pop();
                continue;
            }
            let e = outs[*next];
            *next += 1;
            if f[e] <= 0.0 {
                continue;
            }
            let v = model.link(e).head;
            match color[v] {
                0 => {
                    color[v] = 1;
                    via[v] = Some(e);
                    stack.push((v, 0));
                }
                1 => {
                    // cycle v -> ... -> u -> v
                    let mut cyc = vec![e];
                    let mut w = u;
                    while w != v {
                        let back = via[w].expect("stack node has an entry link");
                        cyc.push(back);
                        w = model.link(back).tail;
                    }
                    cyc.reverse();
                    let amount = cyc.iter().map(|&c| f[c]).fold(f64::INFINITY, f64::min);
                    for &c in &cyc {
                        f[c] -= amount;
                        if f[c] <= 0.0 {
                            f[c] = 0.0;
                        }
                    }
                    warn!(
                        "canceled a cycle of {} links carrying {amount} for origin {s}",
                        cyc.len()
                    );
                    found.push(CanceledCycle {
                        origin: s,
                        links: cyc,
                        flow: amount,
                    });
                    // unwind to v and rescan from there
                    while let Some(&(w, _)) = stack.last() {
                        if w == v {
                            break;
                        }
                        color[w] = 0;
                        stack.pop();
                    }
                    if let Some(top) = stack.last_mut() {
                        top.1 = 0;
                    }
                }
                _ => {}
            }
        }
    }
    found
}

fn selfish_only_fraction(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    rc: &ReducedCostSets,
    lp_opts: &LpOptions,
) -> Result<f64> {
    let inst = build_ue_lp(model, so, rc).map_err(|e| e.in_stage("ue-lp"))?;
    let sol = solve_lp_with(&inst.lp, lp_opts).map_err(|e| e.in_stage("ue-lp"))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "selfish-only program ended with status {:?}",
            sol.status
        ))
        .in_stage("ue-lp"));
    }
    let total = model.total_demand();
    Ok(if total > 0.0 {
        (1.0 - sol.objective_value / total).clamp(0.0, 1.0)
    } else {
        0.0
    })
}

/// Configuration of [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub assignment: AssignmentOptions,
    pub rc_mode: ReducedCostMode,
    /// Defaults per mode when `None`; see [`ReducedCostSets::compute`].
    pub rc_tolerance: Option<f64>,
    pub formulation: ShareFormulation,
    pub lp: LpOptions,
    /// Also solve the user equilibrium for the travel-time comparison.
    pub solve_ue: bool,
    /// Keep the selfish-share program for export.
    pub keep_lp: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            assignment: AssignmentOptions::default(),
            rc_mode: ReducedCostMode::Exact,
            rc_tolerance: None,
            formulation: ShareFormulation::Joint,
            lp: LpOptions::default(),
            solve_ue: true,
            keep_lp: false,
        }
    }
}

/// Headline numbers of a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ue_total_travel_time: Option<f64>,
    pub so_total_travel_time: f64,
    /// Relative TTT saving of the system optimum, in percent.
    pub improvement_pct: Option<f64>,
    pub threshold: f64,
    /// Compliant share of the chosen formulation, in percent.
    pub compliant_pct: f64,
    /// Compliant share implied by the selfish-only program, in percent. It
    /// never exceeds `compliant_pct` and is not always achievable.
    pub selfish_only_compliant_pct: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub ue: Option<EquilibriumSolution>,
    pub so: EquilibriumSolution,
    pub reduced_costs: ReducedCostSets,
    pub compliance: ComplianceResult,
    pub ue_lp: Option<LinearProgram>,
    pub summary: Summary,
}

/// System optimum, reduced costs, selfish share, compliant routing and path
/// decomposition in one call. Errors carry the name of the failing stage.
pub fn run_pipeline(model: &NetworkModel, options: &PipelineOptions) -> Result<PipelineResult> {
    let ue = if options.solve_ue {
        let sol = solve_equilibrium(model, Objective::UserEquilibrium, &options.assignment)
            .map_err(|e| e.in_stage("ue-assignment"))?;
        if !sol.converged {
            warn!(
                "user equilibrium stopped at AEC {} above target {}",
                sol.aec, sol.aec_target
            );
        }
        Some(sol)
    } else {
        None
    };
    let so = solve_equilibrium(model, Objective::SystemOptimum, &options.assignment)
        .map_err(|e| e.in_stage("so-assignment"))?;
    if !so.converged {
        warn!(
            "system optimum stopped at AEC {} above target {}",
            so.aec, so.aec_target
        );
    }
    let rc = ReducedCostSets::compute(model, &so, options.rc_mode, options.rc_tolerance)
        .map_err(|e| e.in_stage("reduced-cost"))?;
    let compliance = max_ue_share_with(model, &so, &rc, options.formulation, &options.lp)?;
    let ue_lp = if options.keep_lp {
        Some(
            build_share_lp(model, &so, &rc, options.formulation)
                .map_err(|e| e.in_stage("ue-lp"))?
                .lp,
        )
    } else {
        None
    };
    let selfish_only_compliant_pct = match options.formulation {
        ShareFormulation::SelfishOnly => 100.0 * compliance.compliant_fraction,
        ShareFormulation::Joint => 100.0 * selfish_only_fraction(model, &so, &rc, &options.lp)?,
    };

    let ue_ttt = ue.as_ref().map(|u| u.total_travel_time);
    let summary = Summary {
        ue_total_travel_time: ue_ttt,
        so_total_travel_time: so.total_travel_time,
        improvement_pct: ue_ttt
            .filter(|&t| t > 0.0)
            .map(|t| 100.0 * (t - so.total_travel_time) / t),
        threshold: rc.threshold,
        compliant_pct: 100.0 * compliance.compliant_fraction,
        selfish_only_compliant_pct,
    };
    Ok(PipelineResult {
        ue,
        so,
        reduced_costs: rc,
        compliance,
        ue_lp,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LatencyFunction, NetworkBuilder};

    fn pigou() -> NetworkModel {
        NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(0, 1, LatencyFunction::affine(0.0, 1.0))
            .demand(0, 1, 1.0)
            .build()
            .unwrap()
    }

    fn braess() -> NetworkModel {
        NetworkBuilder::new(4)
            .link(0, 1, LatencyFunction::affine(0.0, 1.0))
            .link(1, 3, LatencyFunction::constant(1.0))
            .link(0, 2, LatencyFunction::constant(1.0))
            .link(2, 3, LatencyFunction::affine(0.0, 1.0))
            .link(1, 2, LatencyFunction::constant(0.0))
            .demand(0, 3, 1.0)
            .build()
            .unwrap()
    }

    fn prepared(model: &NetworkModel, tol: f64) -> (EquilibriumSolution, ReducedCostSets) {
        let opts = AssignmentOptions {
            aec_target: 1e-12,
            ..Default::default()
        };
        let so = solve_equilibrium(model, Objective::SystemOptimum, &opts).unwrap();
        let rc = ReducedCostSets::compute(model, &so, ReducedCostMode::Exact, Some(tol)).unwrap();
        (so, rc)
    }

    #[test]
    fn pigou_lp_shape() {
        let m = pigou();
        let (so, rc) = prepared(&m, 1e-9);
        let inst = build_ue_lp(&m, &so, &rc).unwrap();
        assert!(inst.y_vars.is_empty());
        assert_eq!(inst.r_vars.len(), 1);
        assert_eq!(inst.x_vars[&0], vec![(1, 1)]);
        assert_eq!(inst.capacity_rows.len(), 1);
        let cap = &inst.lp.constraints()[inst.capacity_rows[0].1];
        assert!((cap.rhs - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pigou_half_must_comply() {
        let m = pigou();
        let (so, rc) = prepared(&m, 1e-9);
        let res = max_ue_share(&m, &so, &rc).unwrap();
        assert!((res.r_ue_total - 0.5).abs() < 1e-9);
        assert!((res.compliant_fraction - 0.5).abs() < 1e-9);
        assert!((res.compliant_flow.get(0) - 0.5).abs() < 1e-9);
        assert!(res.compliant_flow.get(1).abs() < 1e-9);
        assert_eq!(res.ue_paths.entries.len(), 1);
        assert_eq!(res.compliant_paths.entries[0].links, vec![0]);
    }

    #[test]
    fn braess_admits_no_selfish_demand() {
        let m = braess();
        let (so, rc) = prepared(&m, 1e-7);
        let res = max_ue_share(&m, &so, &rc).unwrap();
        assert!(res.r_ue_total.abs() < 1e-7, "{}", res.r_ue_total);
        let outer: f64 = res.compliant_paths.entries.iter().map(|p| p.flow).sum();
        assert!((outer - 1.0).abs() < 1e-7);
        for p in &res.compliant_paths.entries {
            assert!(
                p.links == vec![0, 1] || p.links == vec![2, 3],
                "{:?}",
                p.links
            );
        }
    }

    #[test]
    fn selfish_only_program_overstates_braess() {
        let m = braess();
        let (so, rc) = prepared(&m, 1e-7);
        let inst = build_ue_lp(&m, &so, &rc).unwrap();
        let sol = crate::lp::solve_lp(&inst.lp).unwrap();
        assert!((sol.objective_value - 0.5).abs() < 1e-7);
        let res = max_ue_share_with(
            &m,
            &so,
            &rc,
            ShareFormulation::SelfishOnly,
            &LpOptions::default(),
        )
        .unwrap();
        assert!((res.r_ue_total - 0.5).abs() < 1e-7);
        assert!(!res.compliant_routed);
        assert!(res.compliant_paths.entries.is_empty());
        let err = assign_compliant_flow(&m, &so, &res.ue_per_origin, &res.r_compliant).unwrap_err();
        assert!(matches!(err, Error::Internal(_)), "{err}");
    }

    #[test]
    fn pigou_sufficiency() {
        let m = pigou();
        let (so, rc) = prepared(&m, 1e-9);
        let check = |c: f64| {
            check_sufficiency(&m, &so, &rc, &BTreeMap::from([((0, 1), c)]))
                .unwrap()
                .is_sufficient()
        };
        assert!(check(0.5));
        assert!(!check(0.3));
        assert!(check(1.0));
        assert!(matches!(
            check_sufficiency(&m, &so, &rc, &BTreeMap::from([((0, 1), 1.5)])),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn decomposition_basics() {
        // chain 0 -> 1 -> 2 -> 3
        let chain = NetworkBuilder::new(4)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(1, 2, LatencyFunction::constant(1.0))
            .link(2, 3, LatencyFunction::constant(1.0))
            .demand(0, 3, 5.0)
            .build()
            .unwrap();
        let flows = BTreeMap::from([(0, LinkFlow::new(vec![5.0; 3]).unwrap())]);
        let d = decompose_flow(&chain, &flows, chain.demand()).unwrap();
        assert_eq!(d.paths.entries.len(), 1);
        assert_eq!(d.paths.entries[0].flow, 5.0);

        let par = NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(0, 1, LatencyFunction::constant(1.0))
            .demand(0, 1, 2.0)
            .build()
            .unwrap();
        let flows = BTreeMap::from([(0, LinkFlow::new(vec![1.0, 1.0]).unwrap())]);
        let d = decompose_flow(&par, &flows, par.demand()).unwrap();
        assert_eq!(d.paths.entries.len(), 2);

        let bad = BTreeMap::from([(0, LinkFlow::new(vec![1.0, 0.5]).unwrap())]);
        assert!(matches!(
            decompose_flow(&par, &bad, par.demand()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn decomposition_cancels_cycles() {
        // 0 -> 1 -> 2, plus 1 -> 3 -> 1 circulation
        let m = NetworkBuilder::new(4)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(1, 2, LatencyFunction::constant(1.0))
            .link(1, 3, LatencyFunction::constant(1.0))
            .link(3, 1, LatencyFunction::constant(1.0))
            .demand(0, 2, 1.0)
            .build()
            .unwrap();
        let flows = BTreeMap::from([(0, LinkFlow::new(vec![1.0, 1.0, 0.25, 0.25]).unwrap())]);
        let d = decompose_flow(&m, &flows, m.demand()).unwrap();
        assert_eq!(d.cycles.len(), 1);
        assert_eq!(d.cycles[0].flow, 0.25);
        assert_eq!(d.paths.entries[0].links, vec![0, 1]);
    }

    #[test]
    fn pipeline_tags_stages() {
        let m = pigou();
        let opts = PipelineOptions {
            assignment: AssignmentOptions {
                aec_target: -1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        match run_pipeline(&m, &opts) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "ue-assignment"),
            other => panic!("unexpected {other:?}"),
        }
        let res = run_pipeline(&m, &PipelineOptions::default()).unwrap();
        assert!((res.summary.compliant_pct - 50.0).abs() < 1e-6);
    }
}
