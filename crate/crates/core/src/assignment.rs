//! User-equilibrium and system-optimum assignment.
//!
//! Both are solved as an equilibrium problem with a path-based gradient
//! projection method: each origin-destination pair keeps a set of active
//! paths, and flow is shifted from costlier paths to the current cheapest one
//! in proportion to the cost gap over the summed cost derivatives. The system
//! optimum is the equilibrium under marginal costs `c'_e = l_e + f_e l'_e`.
//! New paths are generated each iteration from one-to-all searches per origin.

use std::collections::BTreeMap;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LinkFlow, LinkId, NetworkModel, NodeId, PathFlow, PathFlowSet};
use crate::paths::one_to_all;

/// Which equilibrium to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Every used path has minimal latency.
    UserEquilibrium,
    /// Every used path has minimal marginal cost; minimizes total travel time.
    SystemOptimum,
}

impl Objective {
    pub fn metric(self) -> CostMetric {
        match self {
            Objective::UserEquilibrium => CostMetric::Latency,
            Objective::SystemOptimum => CostMetric::MarginalCost,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Objective::UserEquilibrium => "UE",
            Objective::SystemOptimum => "SO",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMetric {
    Latency,
    MarginalCost,
}

impl CostMetric {
    #[inline]
    fn cost(self, model: &NetworkModel, e: LinkId, x: f64) -> f64 {
        let f = &model.link(e).latency;
        match self {
            CostMetric::Latency => f.eval(x),
            CostMetric::MarginalCost => f.eval_marginal(x),
        }
    }

    #[inline]
    fn slope(self, model: &NetworkModel, e: LinkId, x: f64) -> f64 {
        let f = &model.link(e).latency;
        match self {
            CostMetric::Latency => f.eval_derivative(x),
            CostMetric::MarginalCost => f.eval_marginal_derivative(x),
        }
    }

    /// Cost of every link at `flow`.
    pub fn link_costs(self, model: &NetworkModel, flow: &[f64]) -> Vec<f64> {
        (0..model.num_links())
            .map(|e| self.cost(model, e, flow[e]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AssignmentOptions {
    /// Stop once the average excess cost drops to this value (minutes).
    pub aec_target: f64,
    pub max_iterations: usize,
    /// Flow-shift passes per OD pair within one outer iteration.
    pub inner_passes: usize,
    /// Randomizes the initial all-or-nothing loading when set.
    pub seed: Option<u64>,
}

impl Default for AssignmentOptions {
    fn default() -> Self {
        AssignmentOptions {
            aec_target: 1e-8,
            max_iterations: 5_000,
            inner_passes: 8,
            seed: None,
        }
    }
}

/// A converged (or best-effort) equilibrium flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub objective: Objective,
    pub link_flow: LinkFlow,
    pub path_flows: PathFlowSet,
    /// Link flow of the commodity originating at each origin.
    pub per_origin_link_flow: BTreeMap<NodeId, LinkFlow>,
    pub link_latency: Vec<f64>,
    pub link_marginal_cost: Vec<f64>,
    pub aec: f64,
    pub aec_target: f64,
    pub total_travel_time: f64,
    /// Per-link upper bound with unchanged latency; system optimum only.
    pub f_bar: Option<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub model_fingerprint: u64,
}

#[derive(Debug, Clone)]
struct ActivePath {
    links: Vec<LinkId>,
    flow: f64,
}

#[derive(Debug, Clone)]
struct OdState {
    destination: NodeId,
    demand: f64,
    paths: Vec<ActivePath>,
}

#[derive(Debug, Clone)]
struct OriginBlock {
    origin: NodeId,
    ods: Vec<OdState>,
}

/// Computes a UE or SO flow to the requested average-excess-cost precision.
///
/// Non-convergence within `max_iterations` is reported through
/// [`EquilibriumSolution::converged`], not as an error.
pub fn solve_equilibrium(
    model: &NetworkModel,
    objective: Objective,
    options: &AssignmentOptions,
) -> Result<EquilibriumSolution> {
    if !(options.aec_target > 0.0) {
        return Err(Error::Usage("aec target must be positive".into()));
    }
    let unreachable = model.unreachable_pairs();
    if !unreachable.is_empty() {
        return Err(Error::Unroutable { pairs: unreachable });
    }
    let metric = objective.metric();
    let mut blocks = initial_loading(model, metric, options.seed);
    let mut flow = aggregate(model, &blocks);
    let mut marks = Marks::new(model.num_links());

    let mut aec = average_excess_cost(model, &blocks, &flow, metric);
    let mut iterations = 0;
    while aec > options.aec_target && iterations < options.max_iterations {
        iterations += 1;
        for block in &mut blocks {
            let weights = metric.link_costs(model, &flow);
            let tree = one_to_all(model, block.origin, &weights);
            for od in &mut block.ods {
                let sp = tree
                    .path_to(model, od.destination)
                    .expect("reachability checked at build");
                if !od.paths.iter().any(|p| p.links == sp) {
                    od.paths.push(ActivePath {
                        links: sp,
                        flow: 0.0,
                    });
                }
                equilibrate_pair(model, metric, od, &mut flow, options, &mut marks);
            }
        }
        // re-aggregate to drop accumulated round-off in the link flows
        flow = aggregate(model, &blocks);
        aec = average_excess_cost(model, &blocks, &flow, metric);
        if iterations % 50 == 0 {
            debug!(
                "{} iteration {iterations}: aec {aec:.3e}",
                objective.short_name()
            );
        }
    }
    let converged = aec <= options.aec_target;
    info!(
        "{} assignment {} after {iterations} iterations, aec {aec:.3e}",
        objective.short_name(),
        if converged { "converged" } else { "stopped" }
    );
    Ok(build_solution(
        model,
        objective,
        blocks,
        flow,
        aec,
        options.aec_target,
        converged,
        iterations,
    ))
}

fn initial_loading(
    model: &NetworkModel,
    metric: CostMetric,
    seed: Option<u64>,
) -> Vec<OriginBlock> {
    let zero = vec![0.0; model.num_links()];
    let mut weights = metric.link_costs(model, &zero);
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut weights {
            *w *= rng.gen_range(0.25..4.0);
        }
    }
    model
        .origins()
        .into_iter()
        .map(|origin| {
            let tree = one_to_all(model, origin, &weights);
            let ods = model
                .destinations(origin)
                .map(|(destination, demand)| {
                    let links = tree
                        .path_to(model, destination)
                        .expect("reachability checked at build");
                    OdState {
                        destination,
                        demand,
                        paths: vec![ActivePath {
                            links,
                            flow: demand,
                        }],
                    }
                })
                .collect();
            OriginBlock { origin, ods }
        })
        .collect()
}

fn aggregate(model: &NetworkModel, blocks: &[OriginBlock]) -> Vec<f64> {
    let mut flow = vec![0.0; model.num_links()];
    for b in blocks {
        for od in &b.ods {
            for p in &od.paths {
                for &e in &p.links {
                    flow[e] += p.flow;
                }
            }
        }
    }
    flow
}

#[inline]
fn path_cost(model: &NetworkModel, metric: CostMetric, links: &[LinkId], flow: &[f64]) -> f64 {
    links.iter().map(|&e| metric.cost(model, e, flow[e])).sum()
}

/// Per-link stamps marking membership in the current best path and the path
/// being shifted; avoids clearing between shifts.
struct Marks {
    best: Vec<u64>,
    other: Vec<u64>,
    stamp: u64,
}

impl Marks {
    fn new(num_links: usize) -> Self {
        Marks {
            best: vec![0; num_links],
            other: vec![0; num_links],
            stamp: 0,
        }
    }

    fn next(&mut self) -> u64 {
        self.stamp += 1;
        self.stamp
    }
}

fn equilibrate_pair(
    model: &NetworkModel,
    metric: CostMetric,
    od: &mut OdState,
    flow: &mut [f64],
    options: &AssignmentOptions,
    marks: &mut Marks,
) {
    if od.paths.len() < 2 {
        return;
    }
    for _ in 0..options.inner_passes {
        let costs: Vec<f64> = od
            .paths
            .iter()
            .map(|p| path_cost(model, metric, &p.links, flow))
            .collect();
        let best = argmin(&costs);
        let max_gap = od
            .paths
            .iter()
            .zip(&costs)
            .filter(|(p, _)| p.flow > 0.0)
            .map(|(_, c)| c - costs[best])
            .fold(0.0, f64::max);
        if max_gap <= options.aec_target * 1e-3 {
            break;
        }
        let best_stamp = marks.next();
        for &e in &od.paths[best].links {
            marks.best[e] = best_stamp;
        }
        for i in 0..od.paths.len() {
            if i == best || od.paths[i].flow <= 0.0 {
                continue;
            }
            let c_best = path_cost(model, metric, &od.paths[best].links, flow);
            let c_i = path_cost(model, metric, &od.paths[i].links, flow);
            let gap = c_i - c_best;
            if gap <= 0.0 {
                continue;
            }
            let other_stamp = marks.next();
            // curvature over the links the two paths do not share
            let mut h = 0.0;
            for &e in &od.paths[i].links {
                marks.other[e] = other_stamp;
                if marks.best[e] != best_stamp {
                    h += metric.slope(model, e, flow[e]);
                }
            }
            for &e in &od.paths[best].links {
                if marks.other[e] != other_stamp {
                    h += metric.slope(model, e, flow[e]);
                }
            }
            let f_i = od.paths[i].flow;
            let delta = if h > 0.0 && h.is_finite() {
                (gap / h).min(f_i)
            } else {
                f_i
            };
            if !(delta > 0.0) {
                continue;
            }
            for &e in &od.paths[i].links {
                if marks.best[e] != best_stamp {
                    flow[e] -= delta;
                }
            }
            for &e in &od.paths[best].links {
                if marks.other[e] != other_stamp {
                    flow[e] += delta;
                }
            }
            od.paths[i].flow = if delta >= f_i { 0.0 } else { f_i - delta };
            od.paths[best].flow += delta;
        }
        let mut idx = 0;
        od.paths.retain(|p| {
            let keep = p.flow > 0.0 || idx == best;
            idx += 1;
            keep
        });
        if od.paths.len() < 2 {
            break;
        }
    }
    // keep the OD total exact
    let total: f64 = od.paths.iter().map(|p| p.flow).sum();
    if total != od.demand {
        let fix = od.demand - total;
        if let Some(p) = od.paths.iter_mut().max_by(|a, b| a.flow.total_cmp(&b.flow)) {
            p.flow = (p.flow + fix).max(0.0);
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &c) in v.iter().enumerate() {
        if c < v[best] {
            best = i;
        }
    }
    best
}

fn average_excess_cost(
    model: &NetworkModel,
    blocks: &[OriginBlock],
    flow: &[f64],
    metric: CostMetric,
) -> f64 {
    let weights = metric.link_costs(model, flow);
    let total_demand: f64 = blocks
        .iter()
        .flat_map(|b| b.ods.iter().map(|od| od.demand))
        .sum();
    if total_demand <= 0.0 {
        return 0.0;
    }
    let excess: Vec<f64> = blocks
        .par_iter()
        .map(|b| {
            let tree = one_to_all(model, b.origin, &weights);
            let mut sum = 0.0;
            for od in &b.ods {
                let shortest = tree.dist[od.destination];
                for p in &od.paths {
                    if p.flow > 0.0 {
                        let c: f64 = p.links.iter().map(|&e| weights[e]).sum();
                        sum += p.flow * (c - shortest).max(0.0);
                    }
                }
            }
            sum
        })
        .collect();
    excess.iter().sum::<f64>() / total_demand
}

#[allow(clippy::too_many_arguments)]
fn build_solution(
    model: &NetworkModel,
    objective: Objective,
    blocks: Vec<OriginBlock>,
    flow: Vec<f64>,
    aec: f64,
    aec_target: f64,
    converged: bool,
    iterations: usize,
) -> EquilibriumSolution {
    let m = model.num_links();
    let mut entries = Vec::new();
    let mut per_origin = BTreeMap::new();
    for b in blocks {
        let mut origin_flow = vec![0.0; m];
        for od in b.ods {
            for p in od.paths {
                if p.flow <= 0.0 {
                    continue;
                }
                for &e in &p.links {
                    origin_flow[e] += p.flow;
                }
                entries.push(PathFlow {
                    origin: b.origin,
                    destination: od.destination,
                    links: p.links,
                    flow: p.flow,
                });
            }
        }
        per_origin.insert(b.origin, LinkFlow::from_clamped(origin_flow));
    }
    let link_flow = LinkFlow::from_clamped(flow);
    let link_latency = model.link_latencies(&link_flow);
    let link_marginal_cost = model.link_marginal_costs(&link_flow);
    let total_travel_time = model
        .total_travel_time(&link_flow)
        .expect("dimension matches");
    let f_bar = match objective {
        Objective::SystemOptimum => Some(compute_f_bar(model, &link_flow)),
        Objective::UserEquilibrium => None,
    };
    EquilibriumSolution {
        objective,
        link_flow,
        path_flows: PathFlowSet { entries },
        per_origin_link_flow: per_origin,
        link_latency,
        link_marginal_cost,
        aec,
        aec_target,
        total_travel_time,
        f_bar,
        converged,
        iterations,
        model_fingerprint: model.fingerprint(),
    }
}

/// Average excess cost of a path assignment under `metric`:
/// `(sum_p f_p C_p - sum_{s,t} R(s,t) min C_{s,t}) / sum R`.
pub fn compute_aec(
    model: &NetworkModel,
    path_flows: &PathFlowSet,
    metric: CostMetric,
) -> Result<f64> {
    let total = model.total_demand();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let flow = path_flows.link_flow(model.num_links());
    let weights = metric.link_costs(model, flow.values());
    let routed = path_flows.od_totals();
    for (&(s, t), &d) in model.demand() {
        let r = routed.get(&(s, t)).copied().unwrap_or(0.0);
        if (r - d).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::Usage(format!(
                "pair ({s}, {t}) routes {r} of demand {d}"
            )));
        }
    }
    let mut used = 0.0;
    for p in &path_flows.entries {
        used += p.flow * p.links.iter().map(|&e| weights[e]).sum::<f64>();
    }
    let mut shortest = 0.0;
    for s in model.origins() {
        let tree = one_to_all(model, s, &weights);
        for (t, d) in model.destinations(s) {
            shortest += d * tree.dist[t];
        }
    }
    Ok(((used - shortest) / total).max(0.0))
}

/// Per-link `sup { f : l_e(f) = l_e(f_SO) }`; infinite for flow-independent links.
pub fn compute_f_bar(model: &NetworkModel, so_flow: &LinkFlow) -> Vec<f64> {
    model
        .links()
        .iter()
        .zip(so_flow.values())
        .map(|(l, &x)| l.latency.flat_extent(x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LatencyFunction, NetworkBuilder};
    use approx::assert_abs_diff_eq;

    fn pigou() -> NetworkModel {
        NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(0, 1, LatencyFunction::affine(0.0, 1.0))
            .demand(0, 1, 1.0)
            .build()
            .unwrap()
    }

    fn opts() -> AssignmentOptions {
        AssignmentOptions {
            aec_target: 1e-12,
            ..Default::default()
        }
    }

    #[test]
    fn pigou_user_equilibrium() {
        let sol = solve_equilibrium(&pigou(), Objective::UserEquilibrium, &opts()).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.link_flow.get(0), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.link_flow.get(1), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.total_travel_time, 1.0, epsilon = 1e-9);
        assert!(sol.f_bar.is_none());
    }

    #[test]
    fn pigou_system_optimum() {
        let sol = solve_equilibrium(&pigou(), Objective::SystemOptimum, &opts()).unwrap();
        assert!(sol.converged);
        assert_abs_diff_eq!(sol.link_flow.get(0), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.link_flow.get(1), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.total_travel_time, 0.75, epsilon = 1e-12);
        let fbar = sol.f_bar.unwrap();
        assert!(fbar[0].is_infinite());
        assert_abs_diff_eq!(fbar[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn aec_examples() {
        let m = pigou();
        let on_a = PathFlowSet {
            entries: vec![PathFlow {
                origin: 0,
                destination: 1,
                links: vec![0],
                flow: 1.0,
            }],
        };
        assert_abs_diff_eq!(
            compute_aec(&m, &on_a, CostMetric::Latency).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let on_b = PathFlowSet {
            entries: vec![PathFlow {
                origin: 0,
                destination: 1,
                links: vec![1],
                flow: 1.0,
            }],
        };
        assert_eq!(compute_aec(&m, &on_b, CostMetric::Latency).unwrap(), 0.0);
        let empty = NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::constant(1.0))
            .build()
            .unwrap();
        assert_eq!(
            compute_aec(&empty, &PathFlowSet::default(), CostMetric::Latency).unwrap(),
            0.0
        );
    }

    #[test]
    fn f_bar_examples() {
        let m = NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::bpr(1.0, 10.0))
            .link(0, 1, LatencyFunction::constant(1.0))
            .build()
            .unwrap();
        let fb = compute_f_bar(&m, &LinkFlow::new(vec![50.0, 3.0]).unwrap());
        assert_eq!(fb[0], 50.0);
        assert!(fb[1].is_infinite());
    }

    #[test]
    fn rejects_nonpositive_target() {
        let o = AssignmentOptions {
            aec_target: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            solve_equilibrium(&pigou(), Objective::UserEquilibrium, &o),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn iteration_cap_flags_nonconvergence() {
        let m = NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::bpr(1.0, 1.0))
            .link(0, 1, LatencyFunction::bpr(2.0, 1.0))
            .demand(0, 1, 3.0)
            .build()
            .unwrap();
        let o = AssignmentOptions {
            aec_target: 1e-300,
            max_iterations: 1,
            inner_passes: 1,
            seed: None,
        };
        let sol = solve_equilibrium(&m, Objective::UserEquilibrium, &o).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 1);
    }
}
