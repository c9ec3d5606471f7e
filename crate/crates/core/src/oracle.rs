//! Brute-force reference computations for small networks.
//!
//! Nothing here calls into the assignment, shortest-path, LP or compliance
//! modules: paths are enumerated by depth-first search, latencies are
//! evaluated from the raw function parameters, the system optimum is found
//! by pairwise path-flow descent and the largest selfish share by
//! enumerating the vertices of the path-flow polytope. Agreement with the
//! library is therefore evidence rather than a tautology.
//!
//! Everything refuses to run when the instance has more than
//! [`MAX_DEGREES_OF_FREEDOM`] path-flow degrees of freedom.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::network::{LatencyFunction, LinkFlow, LinkId, NetworkModel, NodeId};

/// Largest number of free path-flow variables the oracle accepts.
pub const MAX_DEGREES_OF_FREEDOM: usize = 6;

/// Every simple path of every pair with demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathEnumeration {
    pub paths: BTreeMap<(NodeId, NodeId), Vec<Vec<LinkId>>>,
}

impl PathEnumeration {
    pub fn total_paths(&self) -> usize {
        self.paths.values().map(Vec::len).sum()
    }

    /// Free path-flow variables once each pair's demand constraint is used.
    pub fn degrees_of_freedom(&self) -> usize {
        self.paths.values().map(|p| p.len().saturating_sub(1)).sum()
    }
}

/// Lists all simple paths from each origin to each of its destinations.
/// Paths never pass through a node that forbids through traffic.
pub fn enumerate_paths(model: &NetworkModel, max_paths: usize) -> Result<PathEnumeration> {
    let mut out = PathEnumeration::default();
    let mut count = 0usize;
    for (&(s, t), &d) in model.demand() {
        if d <= 0.0 {
            continue;
        }
        let mut found = Vec::new();
        let mut on_path = vec![false; model.num_nodes()];
        let mut links = Vec::new();
        on_path[s] = true;
        dfs(
            model,
            s,
            s,
            t,
            &mut on_path,
            &mut links,
            &mut found,
            &mut count,
            max_paths,
        )?;
        if found.is_empty() {
            return Err(Error::Unroutable {
                pairs: vec![(s, t)],
            });
        }
        out.paths.insert((s, t), found);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    model: &NetworkModel,
    s: NodeId,
    u: NodeId,
    t: NodeId,
    on_path: &mut [bool],
    links: &mut Vec<LinkId>,
    found: &mut Vec<Vec<LinkId>>,
    count: &mut usize,
    max_paths: usize,
) -> Result<()> {
    if u == t {
        *count += 1;
        if *count > max_paths {
            return Err(Error::Usage(format!(
                "more than {max_paths} simple paths; the oracle only handles small networks"
            )));
        }
        found.push(links.clone());
        return Ok(());
    }
    if u != s && !model.allows_through(u) {
        return Ok(());
    }
    for &e in model.out_links(u) {
        let v = model.link(e).head;
        if on_path[v] {
            continue;
        }
        on_path[v] = true;
        links.push(e);
        dfs(model, s, v, t, on_path, links, found, count, max_paths)?;
        links.pop();
        on_path[v] = false;
    }
    Ok(())
}

/// Latency and its derivative, from the function parameters.
fn eval(f: &LatencyFunction, x: f64) -> (f64, f64) {
    match *f {
        LatencyFunction::Bpr {
            free_flow_time,
            capacity,
            alpha,
            beta,
        } => {
            let r = x / capacity;
            let lat = free_flow_time * (1.0 + alpha * r.powf(beta));
            let d = if x > 0.0 {
                free_flow_time * alpha * beta * r.powf(beta - 1.0) / capacity
            } else if beta < 1.0 {
                f64::INFINITY
            } else if beta == 1.0 {
                free_flow_time * alpha / capacity
            } else {
                0.0
            };
            (lat, d)
        }
        LatencyFunction::Affine { intercept, slope } => (intercept + slope * x, slope),
        LatencyFunction::Constant { value } => (value, 0.0),
    }
}

fn flat(f: &LatencyFunction) -> bool {
    match *f {
        LatencyFunction::Bpr {
            free_flow_time,
            alpha,
            ..
        } => free_flow_time == 0.0 || alpha == 0.0,
        LatencyFunction::Affine { slope, .. } => slope == 0.0,
        LatencyFunction::Constant { .. } => true,
    }
}

fn path_sum(path: &[LinkId], per_link: &[f64]) -> f64 {
    path.iter().map(|&e| per_link[e]).sum()
}

/// Reference system optimum.
#[derive(Debug, Clone)]
pub struct OracleSo {
    /// Flow of each enumerated path, aligned with [`PathEnumeration::paths`].
    pub path_flows: BTreeMap<(NodeId, NodeId), Vec<f64>>,
    pub link_flow: LinkFlow,
    pub total_travel_time: f64,
    /// Largest marginal-cost gap between a used path and the cheapest path
    /// of its pair at termination.
    pub max_gap: f64,
}

struct Loads<'a> {
    model: &'a NetworkModel,
    x: Vec<f64>,
}

impl Loads<'_> {
    fn shift(&mut self, path: &[LinkId], amount: f64) {
        for &e in path {
            self.x[e] += amount;
        }
    }

    fn latencies(&self) -> Vec<f64> {
        self.model
            .links()
            .iter()
            .zip(&self.x)
            .map(|(l, &x)| eval(&l.latency, x.max(0.0)).0)
            .collect()
    }

    fn marginals(&self) -> Vec<f64> {
        self.model
            .links()
            .iter()
            .zip(&self.x)
            .map(|(l, &x)| {
                let (lat, d) = eval(&l.latency, x.max(0.0));
                lat + x.max(0.0) * d
            })
            .collect()
    }

    fn marginal_of(&self, path: &[LinkId], extra: &[(LinkId, f64)]) -> f64 {
        path.iter()
            .map(|&e| {
                let x = (self.x[e]
                    + extra
                        .iter()
                        .filter(|&&(k, _)| k == e)
                        .map(|&(_, a)| a)
                        .sum::<f64>())
                .max(0.0);
                let (lat, d) = eval(&self.model.link(e).latency, x);
                lat + x * d
            })
            .sum()
    }
}

const SWEEP_LIMIT: usize = 200_000;

/// Minimizes total travel time over path flows by repeatedly moving flow
/// from the most to the least expensive path of a pair, each move sized by
/// bisection so that the two marginal costs meet.
pub fn brute_force_so(model: &NetworkModel, paths: &PathEnumeration) -> Result<OracleSo> {
    refuse_large(paths)?;
    let mut loads = Loads {
        model,
        x: vec![0.0; model.num_links()],
    };
    let mut flows: BTreeMap<(NodeId, NodeId), Vec<f64>> = BTreeMap::new();
    for (&(s, t), list) in &paths.paths {
        let d = model.demand_between(s, t);
        let mut h = vec![0.0; list.len()];
        h[0] = d;
        loads.shift(&list[0], d);
        flows.insert((s, t), h);
    }

    let mut gap = f64::INFINITY;
    for _ in 0..SWEEP_LIMIT {
        gap = 0.0;
        for (pair, list) in &paths.paths {
            let mc = loads.marginals();
            let h = flows.get_mut(pair).expect("pair enumerated");
            let costs: Vec<f64> = list.iter().map(|p| path_sum(p, &mc)).collect();
            let cheap = (0..list.len())
                .min_by(|&a, &b| costs[a].total_cmp(&costs[b]))
                .expect("non-empty");
            let dear = (0..list.len())
                .filter(|&i| h[i] > 0.0)
                .max_by(|&a, &b| costs[a].total_cmp(&costs[b]))
                .expect("demand positive");
            let g = costs[dear] - costs[cheap];
            gap = gap.max(g);
            if g <= 0.0 || dear == cheap {
                continue;
            }
            let (p, q) = (&list[dear], &list[cheap]);
            let diff = |delta: f64, loads: &Loads| {
                let mut extra: Vec<(LinkId, f64)> = p.iter().map(|&e| (e, -delta)).collect();
                extra.extend(q.iter().map(|&e| (e, delta)));
                loads.marginal_of(p, &extra) - loads.marginal_of(q, &extra)
            };
            let mut lo = 0.0;
            let mut hi = h[dear];
            let delta = if diff(hi, &loads) >= 0.0 {
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if diff(mid, &loads) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            if delta <= 0.0 {
                continue;
            }
            h[dear] -= delta;
            h[cheap] += delta;
            loads.shift(p, -delta);
            loads.shift(q, delta);
        }
        let scale = loads
            .marginals()
            .iter()
            .fold(1.0f64, |a, &b| a.max(b.abs()));
        if gap <= 1e-13 * scale {
            break;
        }
    }
    let lat = loads.latencies();
    let total_travel_time = lat.iter().zip(&loads.x).map(|(l, &x)| l * x.max(0.0)).sum();
    let link_flow = LinkFlow::new(loads.x.iter().map(|&x| x.max(0.0)).collect())?;
    Ok(OracleSo {
        path_flows: flows,
        link_flow,
        total_travel_time,
        max_gap: gap,
    })
}

/// Reference maximum selfish share.
#[derive(Debug, Clone)]
pub struct OracleMaxUe {
    pub r_ue_total: f64,
    /// Indices of the paths selfish agents accept, per pair.
    pub acceptable: BTreeMap<(NodeId, NodeId), Vec<usize>>,
    /// Largest flow on each link with unchanged optimal latency.
    pub f_bar: Vec<f64>,
    pub so: OracleSo,
    /// Number of constraint subsets examined.
    pub vertices_tried: usize,
}

/// Largest selfish demand such that selfish agents use only paths of least
/// latency and least marginal cost at the system optimum, and the remaining
/// demand can be routed on any paths with every link at most at `fbar`.
///
/// Selfish and compliant flow on a path only differ in the objective, so the
/// answer is the largest acceptable-path flow over all path flows meeting
/// the demand within `fbar`. That linear program is solved by trying every
/// basis of the reduced constraint system.
pub fn brute_force_max_ue(
    model: &NetworkModel,
    paths: &PathEnumeration,
    tolerance: f64,
) -> Result<OracleMaxUe> {
    let so = brute_force_so(model, paths)?;
    let lat = model
        .links()
        .iter()
        .zip(so.link_flow.values())
        .map(|(l, &x)| eval(&l.latency, x).0)
        .collect::<Vec<_>>();
    let mc = model
        .links()
        .iter()
        .zip(so.link_flow.values())
        .map(|(l, &x)| {
            let (a, d) = eval(&l.latency, x);
            a + x * d
        })
        .collect::<Vec<_>>();
    let f_bar: Vec<f64> = model
        .links()
        .iter()
        .zip(so.link_flow.values())
        .map(|(l, &x)| if flat(&l.latency) { f64::INFINITY } else { x })
        .collect();

    let mut acceptable = BTreeMap::new();
    for (&pair, list) in &paths.paths {
        let ls: Vec<f64> = list.iter().map(|p| path_sum(p, &lat)).collect();
        let cs: Vec<f64> = list.iter().map(|p| path_sum(p, &mc)).collect();
        let min_l = ls.iter().copied().fold(f64::INFINITY, f64::min);
        let min_c = cs.iter().copied().fold(f64::INFINITY, f64::min);
        let ok: Vec<usize> = (0..list.len())
            .filter(|&i| ls[i] <= min_l + tolerance && cs[i] <= min_c + tolerance)
            .collect();
        acceptable.insert(pair, ok);
    }

    // Reduced variables: all paths of a pair except its last, whose flow is
    // the demand minus the others.
    let mut columns: Vec<(NodeId, NodeId, usize)> = Vec::new();
    for (&(s, t), list) in &paths.paths {
        for i in 0..list.len() - 1 {
            columns.push((s, t, i));
        }
    }
    let d = columns.len();
    let col_of = |s: NodeId, t: NodeId, i: usize| columns.iter().position(|&c| c == (s, t, i));

    // Objective c.z + c0 and constraints a.z <= b.
    let mut c = vec![0.0; d];
    let mut c0 = 0.0;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (&(s, t), list) in &paths.paths {
        let demand = model.demand_between(s, t);
        let last = list.len() - 1;
        let acc = &acceptable[&(s, t)];
        let last_acc = acc.contains(&last);
        if last_acc {
            c0 += demand;
        }
        let mut sum_row = vec![0.0; d];
        for i in 0..last {
            let j = col_of(s, t, i).expect("column exists");
            c[j] += f64::from(u8::from(acc.contains(&i))) - f64::from(u8::from(last_acc));
            let mut nonneg = vec![0.0; d];
            nonneg[j] = -1.0;
            rows.push((nonneg, 0.0));
            sum_row[j] = 1.0;
        }
        if last > 0 {
            rows.push((sum_row, demand));
        }
    }
    for e in 0..model.num_links() {
        if !f_bar[e].is_finite() {
            continue;
        }
        let mut a = vec![0.0; d];
        let mut b = f_bar[e];
        let mut used = false;
        for (&(s, t), list) in &paths.paths {
            let last = list.len() - 1;
            let last_uses = list[last].contains(&e);
            if last_uses {
                b -= model.demand_between(s, t);
                used = true;
            }
            for (i, p) in list.iter().enumerate().take(last) {
                let coef = f64::from(u8::from(p.contains(&e))) - f64::from(u8::from(last_uses));
                if coef != 0.0 {
                    a[col_of(s, t, i).expect("column exists")] += coef;
                    used = true;
                }
            }
        }
        if used {
            rows.push((a, b));
        }
    }

    let feas_tol = |b: f64| 1e-9 * (1.0 + b.abs());
    let feasible = |z: &[f64]| rows.iter().all(|(a, b)| dot(a, z) <= b + feas_tol(*b));
    let mut best = f64::NEG_INFINITY;
    let mut tried = 0usize;
    if d == 0 {
        tried = 1;
        if feasible(&[]) {
            best = c0;
        }
    } else {
        let mut pick: Vec<usize> = (0..d).collect();
        if rows.len() >= d {
            loop {
                tried += 1;
                let mat: Vec<Vec<f64>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
                let rhs: Vec<f64> = pick.iter().map(|&r| rows[r].1).collect();
                if let Some(z) = solve_dense(mat, rhs) {
                    if feasible(&z) {
                        best = best.max(dot(&c, &z) + c0);
                    }
                }
                if !next_combination(&mut pick, rows.len()) {
                    break;
                }
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::Internal(
            "no vertex of the path-flow polytope is feasible".into(),
        ));
    }
    Ok(OracleMaxUe {
        r_ue_total: best.max(0.0),
        acceptable,
        f_bar,
        so,
        vertices_tried: tried,
    })
}

fn refuse_large(paths: &PathEnumeration) -> Result<()> {
    let dof = paths.degrees_of_freedom();
    if dof > MAX_DEGREES_OF_FREEDOM {
        return Err(Error::Usage(format!(
            "{dof} path-flow degrees of freedom exceed the oracle limit of {MAX_DEGREES_OF_FREEDOM}"
        )));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * z[k]).sum();
        z[r] = (b[r] - s) / a[r][r];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

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

    #[test]
    fn path_counts() {
        assert_eq!(enumerate_paths(&pigou(), 100).unwrap().total_paths(), 2);
        assert_eq!(enumerate_paths(&braess(), 100).unwrap().total_paths(), 3);
        // complete DAG on 4 nodes: 1 + 2 + 1 = 4 paths from 0 to 3
        let mut b = NetworkBuilder::new(4);
        for u in 0..4 {
            for v in u + 1..4 {
                b.add_link(u, v, LatencyFunction::affine(1.0, 1.0));
            }
        }
        b.add_demand(0, 3, 1.0);
        assert_eq!(
            enumerate_paths(&b.build().unwrap(), 100)
                .unwrap()
                .total_paths(),
            4
        );
    }

    #[test]
    fn refuses_path_explosion() {
        let err = enumerate_paths(&braess(), 2).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn pigou_reference_values() {
        let m = pigou();
        let p = enumerate_paths(&m, 10).unwrap();
        let so = brute_force_so(&m, &p).unwrap();
        assert!((so.total_travel_time - 0.75).abs() < 1e-12);
        assert!((so.link_flow.get(1) - 0.5).abs() < 1e-12);
        let ue = brute_force_max_ue(&m, &p, 1e-9).unwrap();
        assert!((ue.r_ue_total - 0.5).abs() < 1e-12);
        assert_eq!(ue.acceptable[&(0, 1)], vec![1]);
    }

    #[test]
    fn braess_reference_values() {
        let m = braess();
        let p = enumerate_paths(&m, 10).unwrap();
        let so = brute_force_so(&m, &p).unwrap();
        assert!((so.total_travel_time - 1.5).abs() < 1e-12);
        assert!(so.link_flow.get(4).abs() < 1e-12);
        let ue = brute_force_max_ue(&m, &p, 1e-9).unwrap();
        assert!(ue.r_ue_total.abs() < 1e-12, "{}", ue.r_ue_total);
    }

    #[test]
    fn single_link_needs_no_compliance() {
        let m = NetworkBuilder::new(2)
            .link(0, 1, LatencyFunction::bpr(2.0, 5.0))
            .demand(0, 1, 10.0)
            .build()
            .unwrap();
        let p = enumerate_paths(&m, 10).unwrap();
        let ue = brute_force_max_ue(&m, &p, 1e-9).unwrap();
        assert!((ue.r_ue_total - 10.0).abs() < 1e-9);
        assert!((ue.so.link_flow.get(0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_many_degrees_of_freedom() {
        let mut b = NetworkBuilder::new(2);
        for _ in 0..8 {
            b.add_link(0, 1, LatencyFunction::affine(1.0, 1.0));
        }
        b.add_demand(0, 1, 1.0);
        let m = b.build().unwrap();
        let p = enumerate_paths(&m, 100).unwrap();
        assert!(matches!(brute_force_so(&m, &p), Err(Error::Usage(_))));
    }
}
