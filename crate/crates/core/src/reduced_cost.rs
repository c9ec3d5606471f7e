//! Links that self-interested agents accept inside a system-optimal flow.
//!
//! A path is *zero reduced cost* when no other path between its endpoints has
//! lower latency or lower marginal cost at the system optimum. For each origin
//! `s`, [`ReducedCostSets`] holds the links lying on such a path from `s` to
//! some destination of `s`.
//!
//! Two ways of computing the sets are offered:
//!
//! * [`ReducedCostMode::Exact`] certifies links against both shortest-path
//!   metrics up to an absolute tolerance. A link `(u, v)` is kept when the
//!   worst latency and worst marginal cost of any certified path reaching `u`,
//!   plus the link's own costs, stay within tolerance of the optimum at `v`.
//!   Every certified path is therefore near-optimal in both metrics, and
//!   tolerances do not accumulate along long paths.
//! * [`ReducedCostMode::Empirical`] keeps a link that carries system-optimal
//!   flow from `s` if the cheapest-latency path forced through it is within a
//!   threshold `T` of the unrestricted cheapest latency to its head. `T` comes
//!   from [`compute_threshold`], the largest marginal-cost slack of any used
//!   link in the solution.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{EquilibriumSolution, Objective};
use crate::error::{Error, Result};
use crate::network::{LinkId, NetworkModel, NodeId, AGGREGATION_TOL};
use crate::paths::{one_to_all, one_to_all_avoiding, ShortestPathTree};

/// Smallest default tolerance of [`ReducedCostMode::Exact`], in minutes.
pub const DEFAULT_EXACT_TOLERANCE: f64 = 1e-9;

/// The exact-mode default is this multiple of the solution's own slack `T`
/// when that exceeds [`DEFAULT_EXACT_TOLERANCE`]. A tolerance below the
/// slack drops links that are optimal but not yet exactly balanced.
pub const EXACT_SLACK_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducedCostMode {
    Exact,
    Empirical,
}

impl std::str::FromStr for ReducedCostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(ReducedCostMode::Exact),
            "empirical" => Ok(ReducedCostMode::Empirical),
            other => Err(Error::Usage(format!(
                "unknown reduced-cost mode {other:?} (expected exact or empirical)"
            ))),
        }
    }
}

impl std::fmt::Display for ReducedCostMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReducedCostMode::Exact => "exact",
            ReducedCostMode::Empirical => "empirical",
        })
    }
}

/// Zero-reduced-cost links of every origin with demand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedCostSets {
    /// Sorted link ids per origin.
    pub per_origin_links: BTreeMap<NodeId, Vec<LinkId>>,
    pub mode: ReducedCostMode,
    /// Absolute tolerance used in exact mode, or the threshold `T` in
    /// empirical mode.
    pub tolerance: f64,
    /// Largest marginal-cost slack of a used link; always computed.
    pub threshold: f64,
    /// Pairs with demand but no path inside their origin's set. All of their
    /// demand has to be compliant.
    pub disconnected_pairs: Vec<(NodeId, NodeId)>,
    pub model_fingerprint: u64,
}

impl ReducedCostSets {
    /// Computes the sets for every origin. `tolerance` defaults to
    /// `max(DEFAULT_EXACT_TOLERANCE, EXACT_SLACK_FACTOR * T)` in exact mode
    /// and to the threshold `T` in empirical mode.
    pub fn compute(
        model: &NetworkModel,
        so: &EquilibriumSolution,
        mode: ReducedCostMode,
        tolerance: Option<f64>,
    ) -> Result<Self> {
        check_solution(model, so)?;
        let threshold = compute_threshold(model, so)?;
        let tolerance = match (mode, tolerance) {
            (_, Some(t)) if !(t >= 0.0 && t.is_finite()) => {
                return Err(Error::Usage(format!(
                    "reduced-cost tolerance must be finite and non-negative, got {t}"
                )));
            }
            (_, Some(t)) => t,
            (ReducedCostMode::Exact, None) => {
                DEFAULT_EXACT_TOLERANCE.max(EXACT_SLACK_FACTOR * threshold)
            }
            (ReducedCostMode::Empirical, None) => threshold,
        };
        let origins = model.origins();
        let sets: Vec<(NodeId, Vec<LinkId>)> = origins
            .par_iter()
            .map(|&s| (s, links_for_origin(model, so, s, mode, tolerance)))
            .collect();
        let per_origin_links: BTreeMap<NodeId, Vec<LinkId>> = sets.into_iter().collect();

        let mut disconnected_pairs = Vec::new();
        for (&s, links) in &per_origin_links {
            let reach = reachable_within(model, s, links);
            for (t, _) in model.destinations(s) {
                if !reach[t] {
                    disconnected_pairs.push((s, t));
                }
            }
        }
        if !disconnected_pairs.is_empty() {
            warn!(
                "{} demand pair(s) have no zero-reduced-cost path",
                disconnected_pairs.len()
            );
        }
        Ok(ReducedCostSets {
            per_origin_links,
            mode,
            tolerance,
            threshold,
            disconnected_pairs,
            model_fingerprint: model.fingerprint(),
        })
    }

    pub fn links(&self, origin: NodeId) -> &[LinkId] {
        self.per_origin_links
            .get(&origin)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, origin: NodeId, link: LinkId) -> bool {
        self.links(origin).binary_search(&link).is_ok()
    }

    /// Total number of (origin, link) memberships.
    pub fn total_links(&self) -> usize {
        self.per_origin_links.values().map(Vec::len).sum()
    }
}

fn check_solution(model: &NetworkModel, so: &EquilibriumSolution) -> Result<()> {
    if so.objective != Objective::SystemOptimum {
        return Err(Error::Usage(
            "reduced costs need a system-optimum solution".into(),
        ));
    }
    if so.model_fingerprint != model.fingerprint() {
        return Err(Error::Usage(
            "solution was computed for a different network".into(),
        ));
    }
    if !so.converged {
        warn!("system optimum did not reach its AEC target; reduced-cost sets may be unreliable");
    }
    Ok(())
}

/// Zero-reduced-cost links from `origin`, sorted. For empirical mode
/// `tolerance` is the threshold `T`. An origin without demand has none.
pub fn zero_reduced_cost_links(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    origin: NodeId,
    mode: ReducedCostMode,
    tolerance: f64,
) -> Result<Vec<LinkId>> {
    check_solution(model, so)?;
    if origin >= model.num_nodes() {
        return Err(Error::Usage(format!("origin {origin} is not a node")));
    }
    Ok(links_for_origin(model, so, origin, mode, tolerance))
}

fn links_for_origin(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    s: NodeId,
    mode: ReducedCostMode,
    tolerance: f64,
) -> Vec<LinkId> {
    if model.destinations(s).next().is_none() {
        return Vec::new();
    }
    match mode {
        ReducedCostMode::Exact => exact_links(model, so, s, tolerance),
        ReducedCostMode::Empirical => empirical_links(model, so, s, tolerance),
    }
}

fn exact_links(model: &NetworkModel, so: &EquilibriumSolution, s: NodeId, tol: f64) -> Vec<LinkId> {
    let lat = &so.link_latency;
    let mc = &so.link_marginal_cost;
    let tree_l = one_to_all(model, s, lat);
    let tree_c = one_to_all(model, s, mc);
    let n = model.num_nodes();
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in tree_c.order.iter().enumerate() {
        pos[v] = i;
    }

    // worst latency / marginal cost over certified paths reaching each node
    let mut worst_l = vec![f64::NEG_INFINITY; n];
    let mut worst_c = vec![f64::NEG_INFINITY; n];
    worst_l[s] = 0.0;
    worst_c[s] = 0.0;
    let mut certified = vec![false; model.num_links()];
    for &u in &tree_c.order {
        if worst_l[u] == f64::NEG_INFINITY || (u != s && !model.allows_through(u)) {
            continue;
        }
        for &e in model.out_links(u) {
            let v = model.link(e).head;
            if v == s || pos[v] <= pos[u] || pos[v] == usize::MAX {
                continue;
            }
            let cand_l = worst_l[u] + lat[e];
            let cand_c = worst_c[u] + mc[e];
            if cand_l <= tree_l.dist[v] + tol && cand_c <= tree_c.dist[v] + tol {
                certified[e] = true;
                worst_l[v] = worst_l[v].max(cand_l);
                worst_c[v] = worst_c[v].max(cand_c);
            }
        }
    }
    prune_to_destinations(model, s, &certified)
}

/// Keeps certified links whose head reaches a destination of `s` through
/// certified links.
fn prune_to_destinations(model: &NetworkModel, s: NodeId, certified: &[bool]) -> Vec<LinkId> {
    let n = model.num_nodes();
    let mut useful = vec![false; n];
    let mut stack: Vec<NodeId> = model.destinations(s).map(|(t, _)| t).collect();
    for &t in &stack {
        useful[t] = true;
    }
    while let Some(v) = stack.pop() {
        if v != s && !model.allows_through(v) && !model.destinations(s).any(|(t, _)| t == v) {
            continue;
        }
        for &e in model.in_links(v) {
            let u = model.link(e).tail;
            if certified[e] && !useful[u] {
                useful[u] = true;
                if u != s {
                    stack.push(u);
                }
            }
        }
    }
    (0..model.num_links())
        .filter(|&e| certified[e] && useful[model.link(e).head])
        .collect()
}

/// Whether the tree path from the root to `target` visits `node`.
fn tree_path_visits(
    model: &NetworkModel,
    tree: &ShortestPathTree,
    target: NodeId,
    node: NodeId,
) -> bool {
    let mut v = target;
    loop {
        if v == node {
            return true;
        }
        match tree.pred[v] {
            Some(e) => v = model.link(e).tail,
            None => return false,
        }
    }
}

/// Cheapest cost from the tree root to `head(e)` among simple paths ending
/// with `e`, minus the unrestricted cheapest cost to `head(e)`.
fn forced_slack(model: &NetworkModel, tree: &ShortestPathTree, weights: &[f64], e: LinkId) -> f64 {
    let link = model.link(e);
    let (u, v) = (link.tail, link.head);
    let to_tail = if tree_path_visits(model, tree, u, v) {
        one_to_all_avoiding(model, tree.root, weights, Some(v)).dist[u]
    } else {
        tree.dist[u]
    };
    to_tail + weights[e] - tree.dist[v]
}

fn used_links(so: &EquilibriumSolution, s: NodeId) -> Vec<LinkId> {
    so.per_origin_link_flow
        .get(&s)
        .map(|f| {
            (0..f.len())
                .filter(|&e| f.get(e) > AGGREGATION_TOL)
                .collect()
        })
        .unwrap_or_default()
}

fn empirical_links(
    model: &NetworkModel,
    so: &EquilibriumSolution,
    s: NodeId,
    threshold: f64,
) -> Vec<LinkId> {
    let tree = one_to_all(model, s, &so.link_latency);
    used_links(so, s)
        .into_iter()
        .filter(|&e| model.link(e).head != s)
        .filter(|&e| forced_slack(model, &tree, &so.link_latency, e) <= threshold)
        .collect()
}

/// Largest marginal-cost slack over all origins and links carrying flow from
/// that origin: the cheapest marginal cost to the link's head through the
/// link, minus the unrestricted cheapest. Zero when nothing carries flow.
pub fn compute_threshold(model: &NetworkModel, so: &EquilibriumSolution) -> Result<f64> {
    check_solution(model, so)?;
    let per_origin: Vec<f64> = model
        .origins()
        .par_iter()
        .map(|&s| {
            let tree = one_to_all(model, s, &so.link_marginal_cost);
            used_links(so, s)
                .into_iter()
                .map(|e| forced_slack(model, &tree, &so.link_marginal_cost, e))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(per_origin.into_iter().fold(0.0, f64::max))
}

fn reachable_within(model: &NetworkModel, s: NodeId, links: &[LinkId]) -> Vec<bool> {
    let mut allowed = vec![false; model.num_links()];
    for &e in links {
        allowed[e] = true;
    }
    let mut seen = vec![false; model.num_nodes()];
    seen[s] = true;
    let mut stack = vec![s];
    while let Some(u) = stack.pop() {
        if u != s && !model.allows_through(u) {
            continue;
        }
        for &e in model.out_links(u) {
            let v = model.link(e).head;
            if allowed[e] && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}
