//! One-to-all and all-to-one label-setting shortest paths over non-negative
//! link weights.
//!
//! Intermediate nodes below the model's first through node are never
//! expanded. Among equal-distance labels the predecessor with the lowest link
//! index wins, so trees are reproducible across runs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::{LinkId, NetworkModel, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    dist: f64,
    node: NodeId,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then node index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances and predecessor links from a single origin.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub root: NodeId,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<LinkId>>,
    /// Nodes in the order they were settled.
    pub order: Vec<NodeId>,
}

impl ShortestPathTree {
    pub fn reached(&self, node: NodeId) -> bool {
        self.dist[node].is_finite()
    }

    /// Link sequence from the root to `target`, or `None` if unreachable.
    pub fn path_to(&self, model: &NetworkModel, target: NodeId) -> Option<Vec<LinkId>> {
        if !self.reached(target) {
            return None;
        }
        let mut links = Vec::new();
        let mut v = target;
        while let Some(e) = self.pred[v] {
            links.push(e);
            v = model.link(e).tail;
        }
        links.reverse();
        Some(links)
    }
}

/// Label-setting search from `origin` under `weights` (one per link).
pub fn one_to_all(model: &NetworkModel, origin: NodeId, weights: &[f64]) -> ShortestPathTree {
    one_to_all_avoiding(model, origin, weights, None)
}

/// As [`one_to_all`], never entering `forbidden`.
pub fn one_to_all_avoiding(
    model: &NetworkModel,
    origin: NodeId,
    weights: &[f64],
    forbidden: Option<NodeId>,
) -> ShortestPathTree {
    let n = model.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<LinkId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(Label {
        dist: 0.0,
        node: origin,
    });
    while let Some(Label { dist: d, node: u }) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        order.push(u);
        if u != origin && !model.allows_through(u) {
            continue;
        }
        for &e in model.out_links(u) {
            let v = model.link(e).head;
            if done[v] || Some(v) == forbidden {
                continue;
            }
            let nd = d + weights[e];
            if nd < dist[v] || (nd == dist[v] && pred[v].is_some_and(|p| e < p)) {
                dist[v] = nd;
                pred[v] = Some(e);
                heap.push(Label { dist: nd, node: v });
            }
        }
    }
    ShortestPathTree {
        root: origin,
        dist,
        pred,
        order,
    }
}

/// Distances from every node to `destination` under `weights`.
///
/// Mirrors the through-node rule: a node below the first through node may
/// start a path but is never passed through.
pub fn all_to_one(model: &NetworkModel, destination: NodeId, weights: &[f64]) -> Vec<f64> {
    let n = model.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[destination] = 0.0;
    heap.push(Label {
        dist: 0.0,
        node: destination,
    });
    while let Some(Label { dist: d, node: v }) = heap.pop() {
        if done[v] || d > dist[v] {
            continue;
        }
        done[v] = true;
        if v != destination && !model.allows_through(v) {
            continue;
        }
        for &e in model.in_links(v) {
            let u = model.link(e).tail;
            let nd = d + weights[e];
            if !done[u] && nd < dist[u] {
                dist[u] = nd;
                heap.push(Label { dist: nd, node: u });
            }
        }
    }
    dist
}
