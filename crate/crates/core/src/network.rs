//! The flow model: a directed graph with per-link latency functions and an
//! origin-destination demand table.
//!
//! Vertices and links carry dense indices assigned at construction time.
//! External identifiers (the node numbers of an input file) are kept in a side
//! table and used only for reporting.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, VecDeque};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type LinkId = usize;

/// Tolerance used when checking that path flows aggregate to link flows.
pub const AGGREGATION_TOL: f64 = 1e-9;

/// Volume-delay function of a single link.
///
/// All variants are non-negative, non-decreasing and differentiable on
/// `flow >= 0`, and `l(x) * x` is convex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyFunction {
    /// `t0 * (1 + alpha * (x / capacity)^beta)`.
    Bpr {
        free_flow_time: f64,
        capacity: f64,
        alpha: f64,
        beta: f64,
    },
    /// `intercept + slope * x`.
    Affine { intercept: f64, slope: f64 },
    /// Flow-independent travel time.
    Constant { value: f64 },
}

impl LatencyFunction {
    pub const BPR_ALPHA: f64 = 0.15;
    pub const BPR_BETA: f64 = 4.0;

    pub fn bpr(free_flow_time: f64, capacity: f64) -> Self {
        LatencyFunction::Bpr {
            free_flow_time,
            capacity,
            alpha: Self::BPR_ALPHA,
            beta: Self::BPR_BETA,
        }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        LatencyFunction::Affine { intercept, slope }
    }

    pub fn constant(value: f64) -> Self {
        LatencyFunction::Constant { value }
    }

    /// Travel time at `flow`.
    pub fn latency(&self, flow: f64) -> Result<f64> {
        check_flow(flow)?;
        Ok(self.eval(flow))
    }

    /// Marginal system cost `l(x) + x * l'(x)`.
    pub fn marginal_cost(&self, flow: f64) -> Result<f64> {
        check_flow(flow)?;
        Ok(self.eval_marginal(flow))
    }

    /// Analytic derivative `l'(x)`.
    pub fn derivative(&self, flow: f64) -> Result<f64> {
        check_flow(flow)?;
        Ok(self.eval_derivative(flow))
    }

    /// Unchecked evaluation; negative inputs are clamped to zero.
    #[inline]
    pub(crate) fn eval(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            LatencyFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => free_flow_time * (1.0 + alpha * bpr_ratio_pow(x, capacity, beta)),
            LatencyFunction::Affine { intercept, slope } => intercept + slope * x,
            LatencyFunction::Constant { value } => value,
        }
    }

    #[inline]
    pub(crate) fn eval_derivative(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            LatencyFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                if beta == 0.0 || alpha == 0.0 {
                    0.0
                } else if capacity <= 0.0 {
                    if x > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    free_flow_time * alpha * beta * bpr_ratio_pow(x, capacity, beta - 1.0)
                        / capacity
                }
            }
            LatencyFunction::Affine { slope, .. } => slope,
            LatencyFunction::Constant { .. } => 0.0,
        }
    }

    #[inline]
    pub(crate) fn eval_second_derivative(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            LatencyFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                if beta <= 1.0 || alpha == 0.0 {
                    0.0
                } else if capacity <= 0.0 {
                    if x > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    free_flow_time
                        * alpha
                        * beta
                        * (beta - 1.0)
                        * bpr_ratio_pow(x, capacity, beta - 2.0)
                        / (capacity * capacity)
                }
            }
            LatencyFunction::Affine { .. } | LatencyFunction::Constant { .. } => 0.0,
        }
    }

    #[inline]
    pub(crate) fn eval_marginal(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        if x == 0.0 {
            return self.eval(0.0);
        }
        self.eval(x) + x * self.eval_derivative(x)
    }

    /// Derivative of the marginal cost, `2 l'(x) + x l''(x)`.
    #[inline]
    pub(crate) fn eval_marginal_derivative(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        let d2 = if x == 0.0 {
            0.0
        } else {
            x * self.eval_second_derivative(x)
        };
        2.0 * self.eval_derivative(x) + d2
    }

    /// True when the latency never changes with flow.
    pub fn is_flow_independent(&self) -> bool {
        match *self {
            LatencyFunction::Bpr {
                free_flow_time,
                alpha,
                beta,
                capacity,
            } => free_flow_time == 0.0 || alpha == 0.0 || (beta == 0.0 && capacity > 0.0),
            LatencyFunction::Affine { slope, .. } => slope == 0.0,
            LatencyFunction::Constant { .. } => true,
        }
    }

    /// Largest flow whose latency equals the latency at `flow`.
    ///
    /// Every supported kind is either flow-independent (unbounded result) or
    /// strictly increasing on `[0, inf)`, in which case the flow itself is
    /// returned.
    pub fn flat_extent(&self, flow: f64) -> f64 {
        if self.is_flow_independent() {
            f64::INFINITY
        } else {
            flow.max(0.0)
        }
    }
}

#[inline]
fn bpr_ratio_pow(x: f64, capacity: f64, exponent: f64) -> f64 {
    if x == 0.0 {
        return if exponent == 0.0 { 1.0 } else { 0.0 };
    }
    if capacity <= 0.0 {
        return f64::INFINITY;
    }
    let r = x / capacity;
    if exponent == 4.0 {
        let r2 = r * r;
        r2 * r2
    } else if exponent == 3.0 {
        r * r * r
    } else if exponent == 2.0 {
        r * r
    } else if exponent == 1.0 {
        r
    } else {
        r.powf(exponent)
    }
}

fn check_flow(flow: f64) -> Result<()> {
    if flow < 0.0 || flow.is_nan() {
        return Err(Error::Domain(format!(
            "flow must be non-negative, got {flow}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub tail: NodeId,
    pub head: NodeId,
    pub latency: LatencyFunction,
}

/// A `{G, R}` instance: graph, latency functions, and demand.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    num_nodes: usize,
    links: Vec<Link>,
    demand: BTreeMap<(NodeId, NodeId), f64>,
    num_zones: usize,
    first_through_node: NodeId,
    node_labels: Vec<u64>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    fingerprint: u64,
}

impl NetworkModel {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    /// Links leaving `node`, ordered by link index.
    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node]
    }

    /// Links entering `node`, ordered by link index.
    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node]
    }

    /// Positive demand entries, ordered by (origin, destination).
    pub fn demand(&self) -> &BTreeMap<(NodeId, NodeId), f64> {
        &self.demand
    }

    pub fn demand_between(&self, origin: NodeId, destination: NodeId) -> f64 {
        self.demand
            .get(&(origin, destination))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_demand(&self) -> f64 {
        self.demand.values().sum()
    }

    /// Origins with at least one positive demand entry, ascending.
    pub fn origins(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.demand.keys().map(|&(s, _)| s).collect();
        v.dedup();
        v
    }

    /// `(destination, demand)` pairs for one origin.
    pub fn destinations(&self, origin: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.demand
            .range((origin, 0)..=(origin, usize::MAX))
            .map(|(&(_, t), &d)| (t, d))
    }

    pub fn num_zones(&self) -> usize {
        self.num_zones
    }

    pub fn is_zone(&self, node: NodeId) -> bool {
        node < self.num_zones
    }

    /// Dense index of the first node that may be traversed by through traffic.
    pub fn first_through_node(&self) -> NodeId {
        self.first_through_node
    }

    /// Whether a path may pass through `node` without starting or ending there.
    #[inline]
    pub fn allows_through(&self, node: NodeId) -> bool {
        node >= self.first_through_node
    }

    /// External label of a node (1-based node number for file-loaded models).
    pub fn node_label(&self, node: NodeId) -> u64 {
        self.node_labels[node]
    }

    /// Stable hash of topology, latency parameters and demand.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Latency of every link at the given flow.
    pub fn link_latencies(&self, flow: &LinkFlow) -> Vec<f64> {
        self.links
            .iter()
            .zip(flow.values())
            .map(|(l, &x)| l.latency.eval(x))
            .collect()
    }

    /// Marginal cost of every link at the given flow.
    pub fn link_marginal_costs(&self, flow: &LinkFlow) -> Vec<f64> {
        self.links
            .iter()
            .zip(flow.values())
            .map(|(l, &x)| l.latency.eval_marginal(x))
            .collect()
    }

    /// `sum_e l_e(f_e) * f_e`.
    pub fn total_travel_time(&self, flow: &LinkFlow) -> Result<f64> {
        if flow.len() != self.links.len() {
            return Err(Error::Usage(format!(
                "flow has {} entries but the network has {} links",
                flow.len(),
                self.links.len()
            )));
        }
        Ok(self
            .links
            .iter()
            .zip(flow.values())
            .map(|(l, &x)| if x > 0.0 { l.latency.eval(x) * x } else { 0.0 })
            .sum())
    }

    /// Path latency and path marginal cost at `flow`.
    pub fn path_metrics(&self, flow: &LinkFlow, path: &[LinkId]) -> Result<(f64, f64)> {
        if flow.len() != self.links.len() {
            return Err(Error::Usage(
                "flow dimension does not match link count".into(),
            ));
        }
        self.check_path(path)?;
        let mut lat = 0.0;
        let mut mc = 0.0;
        for &e in path {
            let x = flow.values()[e];
            lat += self.links[e].latency.eval(x);
            mc += self.links[e].latency.eval_marginal(x);
        }
        Ok((lat, mc))
    }

    /// Verifies that `path` is a connected sequence of valid links.
    pub fn check_path(&self, path: &[LinkId]) -> Result<()> {
        for (i, &e) in path.iter().enumerate() {
            if e >= self.links.len() {
                return Err(Error::Usage(format!("link index {e} out of range")));
            }
            if i > 0 && self.links[path[i - 1]].head != self.links[e].tail {
                return Err(Error::Usage(format!(
                    "path is disconnected between links {} and {}",
                    path[i - 1],
                    e
                )));
            }
        }
        Ok(())
    }

    /// Returns pairs with positive demand and no admissible directed path.
    pub fn unreachable_pairs(&self) -> Vec<(NodeId, NodeId)> {
        let mut bad = Vec::new();
        for s in self.origins() {
            let reach = self.reachable_from(s);
            for (t, _) in self.destinations(s) {
                if !reach[t] {
                    bad.push((s, t));
                }
            }
        }
        bad
    }

    fn reachable_from(&self, origin: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes];
        let mut queue = VecDeque::from([origin]);
        seen[origin] = true;
        while let Some(u) = queue.pop_front() {
            if u != origin && !self.allows_through(u) {
                continue;
            }
            for &e in &self.out_links[u] {
                let v = self.links[e].head;
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Copy of this model with a different demand table.
    pub fn with_demand(
        &self,
        demand: impl IntoIterator<Item = ((NodeId, NodeId), f64)>,
    ) -> Result<NetworkModel> {
        let mut b = NetworkBuilder {
            num_nodes: self.num_nodes,
            links: self.links.clone(),
            demand: BTreeMap::new(),
            num_zones: Some(self.num_zones),
            first_through_node: self.first_through_node,
            node_labels: Some(self.node_labels.clone()),
        };
        for ((s, t), d) in demand {
            b = b.demand(s, t, d);
        }
        b.build()
    }
}

/// Incremental constructor for [`NetworkModel`].
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    num_nodes: usize,
    links: Vec<Link>,
    demand: BTreeMap<(NodeId, NodeId), f64>,
    num_zones: Option<usize>,
    first_through_node: NodeId,
    node_labels: Option<Vec<u64>>,
}

impl NetworkBuilder {
    pub fn new(num_nodes: usize) -> Self {
        NetworkBuilder {
            num_nodes,
            ..Default::default()
        }
    }

    pub fn link(mut self, tail: NodeId, head: NodeId, latency: LatencyFunction) -> Self {
        self.links.push(Link {
            tail,
            head,
            latency,
        });
        self
    }

    pub fn add_link(&mut self, tail: NodeId, head: NodeId, latency: LatencyFunction) -> LinkId {
        self.links.push(Link {
            tail,
            head,
            latency,
        });
        self.links.len() - 1
    }

    /// Adds demand; repeated pairs accumulate.
    pub fn demand(mut self, origin: NodeId, destination: NodeId, amount: f64) -> Self {
        self.add_demand(origin, destination, amount);
        self
    }

    pub fn add_demand(&mut self, origin: NodeId, destination: NodeId, amount: f64) {
        *self.demand.entry((origin, destination)).or_insert(0.0) += amount;
    }

    /// Nodes `0..zones` are centroids; default is every node.
    pub fn zones(mut self, zones: usize) -> Self {
        self.num_zones = Some(zones);
        self
    }

    /// Nodes below this index may not be used as intermediate nodes.
    pub fn first_through_node(mut self, node: NodeId) -> Self {
        self.first_through_node = node;
        self
    }

    pub fn node_labels(mut self, labels: Vec<u64>) -> Self {
        self.node_labels = Some(labels);
        self
    }

    pub fn build(self) -> Result<NetworkModel> {
        let n = self.num_nodes;
        let num_zones = self.num_zones.unwrap_or(n);
        if num_zones > n {
            return Err(Error::Validation(format!(
                "{num_zones} zones declared but only {n} nodes"
            )));
        }
        let node_labels = self.node_labels.unwrap_or_else(|| (1..=n as u64).collect());
        if node_labels.len() != n {
            return Err(Error::Validation(
                "node label table has the wrong length".into(),
            ));
        }
        for (i, l) in self.links.iter().enumerate() {
            if l.tail >= n || l.head >= n {
                return Err(Error::Validation(format!(
                    "link {i} references a node outside 0..{n}"
                )));
            }
            if l.tail == l.head {
                return Err(Error::Validation(format!(
                    "link {i} is a self-loop at node {}",
                    l.tail
                )));
            }
            validate_latency(i, &l.latency)?;
        }
        let mut demand = BTreeMap::new();
        for (&(s, t), &d) in &self.demand {
            if !(d >= 0.0) || !d.is_finite() {
                return Err(Error::Validation(format!("demand ({s}, {t}) is {d}")));
            }
            if s >= n || t >= n {
                return Err(Error::Validation(format!(
                    "demand ({s}, {t}) references a node outside 0..{n}"
                )));
            }
            if d == 0.0 {
                continue;
            }
            if s >= num_zones || t >= num_zones {
                return Err(Error::Validation(format!(
                    "demand ({s}, {t}) involves a non-centroid node"
                )));
            }
            if s == t {
                return Err(Error::Validation(format!(
                    "demand ({s}, {t}) has identical origin and destination"
                )));
            }
            demand.insert((s, t), d);
        }
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (i, l) in self.links.iter().enumerate() {
            out_links[l.tail].push(i);
            in_links[l.head].push(i);
        }
        let mut model = NetworkModel {
            num_nodes: n,
            links: self.links,
            demand,
            num_zones,
            first_through_node: self.first_through_node,
            node_labels,
            out_links,
            in_links,
            fingerprint: 0,
        };
        model.fingerprint = compute_fingerprint(&model);
        let bad = model.unreachable_pairs();
        if !bad.is_empty() {
            return Err(Error::Unroutable { pairs: bad });
        }
        Ok(model)
    }
}

fn validate_latency(link: usize, f: &LatencyFunction) -> Result<()> {
    let ok = match *f {
        LatencyFunction::Bpr {
            free_flow_time,
            capacity,
            alpha,
            beta,
        } => {
            free_flow_time >= 0.0
                && capacity >= 0.0
                && alpha >= 0.0
                && beta >= 0.0
                && (beta >= 1.0 || beta == 0.0)
        }
        LatencyFunction::Affine { intercept, slope } => intercept >= 0.0 && slope >= 0.0,
        LatencyFunction::Constant { value } => value >= 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "link {link} has an invalid latency function {f:?}"
        )))
    }
}

fn compute_fingerprint(m: &NetworkModel) -> u64 {
    let mut h = DefaultHasher::new();
    m.num_nodes.hash(&mut h);
    m.num_zones.hash(&mut h);
    m.first_through_node.hash(&mut h);
    for l in &m.links {
        l.tail.hash(&mut h);
        l.head.hash(&mut h);
        match l.latency {
            LatencyFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                0u8.hash(&mut h);
                for v in [free_flow_time, capacity, alpha, beta] {
                    v.to_bits().hash(&mut h);
                }
            }
            LatencyFunction::Affine { intercept, slope } => {
                1u8.hash(&mut h);
                intercept.to_bits().hash(&mut h);
                slope.to_bits().hash(&mut h);
            }
            LatencyFunction::Constant { value } => {
                2u8.hash(&mut h);
                value.to_bits().hash(&mut h);
            }
        }
    }
    for (&(s, t), &d) in &m.demand {
        s.hash(&mut h);
        t.hash(&mut h);
        d.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Flow volume per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkFlow(Vec<f64>);

impl LinkFlow {
    pub fn zeros(num_links: usize) -> Self {
        LinkFlow(vec![0.0; num_links])
    }

    /// Wraps a vector; rejects negative or non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Domain(format!("link flow entry {i} is {v}")));
        }
        Ok(LinkFlow(values))
    }

    /// Builds a flow, clamping tiny negative round-off to zero.
    pub(crate) fn from_clamped(mut values: Vec<f64>) -> Self {
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        LinkFlow(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, link: LinkId) -> f64 {
        self.0[link]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Entry-wise sum of two flows of equal dimension.
    pub fn plus(&self, other: &LinkFlow) -> LinkFlow {
        LinkFlow(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs_diff(&self, other: &LinkFlow) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Flow on one path of one origin-destination pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFlow {
    pub origin: NodeId,
    pub destination: NodeId,
    pub links: Vec<LinkId>,
    pub flow: f64,
}

/// Collection of path flows, `f_p` over `P_{s,t}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathFlowSet {
    pub entries: Vec<PathFlow>,
}

impl PathFlowSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sums entry flows onto links.
    pub fn link_flow(&self, num_links: usize) -> LinkFlow {
        let mut v = vec![0.0; num_links];
        for p in &self.entries {
            for &e in &p.links {
                v[e] += p.flow;
            }
        }
        LinkFlow::from_clamped(v)
    }

    /// Routed volume per (origin, destination).
    pub fn od_totals(&self) -> BTreeMap<(NodeId, NodeId), f64> {
        let mut m = BTreeMap::new();
        for p in &self.entries {
            *m.entry((p.origin, p.destination)).or_insert(0.0) += p.flow;
        }
        m
    }

    /// Verifies each entry is a simple path from its origin to its destination.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        for (i, p) in self.entries.iter().enumerate() {
            if !(p.flow >= 0.0) {
                return Err(Error::Validation(format!(
                    "path {i} has negative flow {}",
                    p.flow
                )));
            }
            model.check_path(&p.links)?;
            let (Some(&first), Some(&last)) = (p.links.first(), p.links.last()) else {
                return Err(Error::Validation(format!("path {i} is empty")));
            };
            if model.link(first).tail != p.origin || model.link(last).head != p.destination {
                return Err(Error::Validation(format!(
                    "path {i} does not connect its origin and destination"
                )));
            }
            let mut nodes: Vec<NodeId> = p.links.iter().map(|&e| model.link(e).head).collect();
            nodes.push(p.origin);
            nodes.sort_unstable();
            if nodes.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!("path {i} revisits a node")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bpr() -> LatencyFunction {
        LatencyFunction::bpr(10.0, 100.0)
    }

    pub(crate) fn pigou() -> NetworkModel {
        NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(0, 1, LatencyFunction::affine(0.0, 1.0))
            .demand(0, 1, 1.0)
            .build()
            .unwrap()
    }

    #[test]
    fn bpr_latency_values() {
        assert_eq!(bpr().latency(0.0).unwrap(), 10.0);
        assert_relative_eq!(bpr().latency(100.0).unwrap(), 11.5, max_relative = 1e-15);
        assert_eq!(LatencyFunction::constant(1.0).latency(7.0).unwrap(), 1.0);
    }

    #[test]
    fn marginal_cost_values() {
        assert_relative_eq!(
            LatencyFunction::affine(0.0, 1.0)
                .marginal_cost(0.5)
                .unwrap(),
            1.0
        );
        assert_eq!(
            LatencyFunction::constant(1.0).marginal_cost(123.0).unwrap(),
            1.0
        );
        assert_relative_eq!(
            bpr().marginal_cost(100.0).unwrap(),
            17.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn negative_flow_is_a_domain_error() {
        assert!(matches!(bpr().latency(-1.0), Err(Error::Domain(_))));
        assert!(matches!(bpr().marginal_cost(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_capacity_bpr_at_zero_flow() {
        let f = LatencyFunction::bpr(3.0, 0.0);
        assert_eq!(f.latency(0.0).unwrap(), 3.0);
        assert!(f.latency(1.0).unwrap().is_infinite());
    }

    #[test]
    fn pigou_total_travel_time() {
        let m = pigou();
        let f = LinkFlow::new(vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(m.total_travel_time(&f).unwrap(), 0.75);
        assert_eq!(m.total_travel_time(&LinkFlow::zeros(2)).unwrap(), 0.0);
        assert!(matches!(
            m.total_travel_time(&LinkFlow::zeros(3)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn path_metrics_examples() {
        let m = NetworkBuilder::new(3)
            .link(0, 1, LatencyFunction::bpr(10.0, 100.0))
            .link(1, 2, LatencyFunction::constant(1.0))
            .link(0, 2, LatencyFunction::constant(1.0))
            .build()
            .unwrap();
        let zero = LinkFlow::zeros(3);
        assert_eq!(m.path_metrics(&zero, &[0]).unwrap(), (10.0, 10.0));
        assert!(matches!(
            m.path_metrics(&zero, &[0, 2]),
            Err(Error::Usage(_))
        ));

        let p = pigou();
        let f = LinkFlow::new(vec![0.5, 0.5]).unwrap();
        let (l, c) = p.path_metrics(&f, &[1]).unwrap();
        assert_relative_eq!(l, 0.5);
        assert_relative_eq!(c, 1.0);

        let chain = NetworkBuilder::new(3)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(1, 2, LatencyFunction::constant(1.0))
            .build()
            .unwrap();
        assert_eq!(
            chain.path_metrics(&LinkFlow::zeros(2), &[0, 1]).unwrap(),
            (2.0, 2.0)
        );
    }

    #[test]
    fn builder_rejects_bad_input() {
        let self_loop = NetworkBuilder::new(2)
            .link(1, 1, LatencyFunction::constant(1.0))
            .build();
        assert!(matches!(self_loop, Err(Error::Validation(_))));
        let unreachable = NetworkBuilder::new(3)
            .link(0, 1, LatencyFunction::constant(1.0))
            .demand(0, 2, 1.0)
            .build();
        assert!(matches!(unreachable, Err(Error::Unroutable { .. })));
        let non_zone = NetworkBuilder::new(3)
            .link(0, 2, LatencyFunction::constant(1.0))
            .zones(2)
            .demand(0, 2, 1.0)
            .build();
        assert!(matches!(non_zone, Err(Error::Validation(_))));
    }

    #[test]
    fn through_restriction_blocks_centroid_shortcuts() {
        // 0 -> 1 -> 2 is the only route, but node 1 is a centroid below the first through node.
        let built = NetworkBuilder::new(3)
            .link(0, 1, LatencyFunction::constant(1.0))
            .link(1, 2, LatencyFunction::constant(1.0))
            .first_through_node(2)
            .demand(0, 2, 1.0)
            .build();
        assert!(matches!(built, Err(Error::Unroutable { .. })));
    }

    #[test]
    fn flat_extent_by_kind() {
        assert_eq!(bpr().flat_extent(50.0), 50.0);
        assert!(LatencyFunction::constant(1.0)
            .flat_extent(3.0)
            .is_infinite());
        assert_eq!(LatencyFunction::affine(0.0, 1.0).flat_extent(0.5), 0.5);
    }

    #[test]
    fn path_set_validation() {
        let m = pigou();
        let ok = PathFlowSet {
            entries: vec![PathFlow {
                origin: 0,
                destination: 1,
                links: vec![1],
                flow: 1.0,
            }],
        };
        ok.validate(&m).unwrap();
        assert_eq!(ok.link_flow(2).values(), &[0.0, 1.0]);
        let wrong_end = PathFlowSet {
            entries: vec![PathFlow {
                origin: 1,
                destination: 0,
                links: vec![1],
                flow: 1.0,
            }],
        };
        assert!(wrong_end.validate(&m).is_err());
    }
}
