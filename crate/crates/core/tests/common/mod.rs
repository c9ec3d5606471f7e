//! Small networks shared by the integration tests.
#![allow(dead_code)]

pub mod lp_exact;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackroute::oracle::{
    brute_force_max_ue, brute_force_so, enumerate_paths, MAX_DEGREES_OF_FREEDOM,
};
use stackroute::paths::one_to_all;
use stackroute::{
    AssignmentOptions, ComplianceResult, LatencyFunction as L, LinkFlow, NetworkBuilder,
    NetworkModel, PathFlowSet, PipelineOptions, PipelineResult,
};

pub fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn sioux_falls() -> NetworkModel {
    stackroute::tntp::load_model(data("SiouxFalls_net.tntp"), data("SiouxFalls_trips.tntp"))
        .unwrap()
}

pub fn pigou() -> NetworkModel {
    NetworkBuilder::new(2)
        .link(0, 1, L::constant(1.0))
        .link(0, 1, L::affine(0.0, 1.0))
        .demand(0, 1, 1.0)
        .build()
        .unwrap()
}

/// Links: s->a (x), a->t (1), s->b (1), b->t (x), a->b (0).
pub fn braess() -> NetworkModel {
    NetworkBuilder::new(4)
        .link(0, 1, L::affine(0.0, 1.0))
        .link(1, 3, L::constant(1.0))
        .link(0, 2, L::constant(1.0))
        .link(2, 3, L::affine(0.0, 1.0))
        .link(1, 2, L::constant(0.0))
        .demand(0, 3, 1.0)
        .build()
        .unwrap()
}

/// Braess with a shortcut of latency 0.25. At the optimum the shortcut path
/// is the fastest (1.25 against 1.5) yet its marginal cost is 2.25 against
/// 2, so no path is acceptable to selfish agents and the shortcut link
/// (index 4) must not be certified.
pub fn min_latency_not_min_marginal() -> NetworkModel {
    NetworkBuilder::new(4)
        .link(0, 1, L::affine(0.0, 1.0))
        .link(1, 3, L::constant(1.0))
        .link(0, 2, L::constant(1.0))
        .link(2, 3, L::affine(0.0, 1.0))
        .link(1, 2, L::constant(0.25))
        .demand(0, 3, 1.0)
        .build()
        .unwrap()
}

/// Two origins that share a congestible link into the sink, each with its
/// own constant-latency bypass.
pub fn shared_bottleneck() -> NetworkModel {
    NetworkBuilder::new(4)
        .link(0, 2, L::affine(0.2, 1.0))
        .link(1, 2, L::affine(0.1, 0.5))
        .link(2, 3, L::affine(0.5, 1.0))
        .link(0, 3, L::constant(2.5))
        .link(1, 3, L::constant(2.0))
        .demand(0, 3, 1.0)
        .demand(1, 3, 1.5)
        .build()
        .unwrap()
}

/// A random acyclic network on 4 to 6 nodes with affine and constant
/// latencies, drawn until the oracle can handle it.
pub fn random_dag(seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(4..=6);
        let mut b = NetworkBuilder::new(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.55) {
                    let latency = if rng.gen_bool(0.2) {
                        L::constant(rng.gen_range(0.0..3.0))
                    } else {
                        L::affine(rng.gen_range(0.0..2.0), rng.gen_range(0.2..2.0))
                    };
                    b.add_link(u, v, latency);
                }
            }
        }
        b.add_demand(0, n - 1, rng.gen_range(0.5..3.0));
        if rng.gen_bool(0.5) {
            b.add_demand(1, n - 1, rng.gen_range(0.5..2.0));
        }
        let Ok(model) = b.build() else { continue };
        if !model.unreachable_pairs().is_empty() {
            continue;
        }
        match enumerate_paths(&model, 64) {
            Ok(p)
                if p.degrees_of_freedom() >= 1
                    && p.degrees_of_freedom() <= MAX_DEGREES_OF_FREEDOM =>
            {
                return model
            }
            _ => continue,
        }
    }
}

/// Every small instance with a name, in a fixed order.
pub fn corpus() -> Vec<(String, NetworkModel)> {
    let mut out = vec![
        ("pigou".to_string(), pigou()),
        ("braess".to_string(), braess()),
        (
            "min-latency-not-min-marginal".to_string(),
            min_latency_not_min_marginal(),
        ),
        ("shared-bottleneck".to_string(), shared_bottleneck()),
    ];
    for seed in 0..20 {
        out.push((format!("random-dag-{seed}"), random_dag(1000 + seed)));
    }
    out
}

/// Pipeline settings for the small instances: tight convergence.
pub fn tight_options() -> PipelineOptions {
    PipelineOptions {
        assignment: AssignmentOptions {
            aec_target: 1e-12,
            max_iterations: 20_000,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub struct OracleComparison {
    pub lp_r_ue: f64,
    pub oracle_r_ue: f64,
    pub lib_so_ttt: f64,
    pub oracle_so_ttt: f64,
}

pub fn compare_with_oracle(model: &NetworkModel, run: &PipelineResult) -> OracleComparison {
    let paths = enumerate_paths(model, 1000).unwrap();
    let so = brute_force_so(model, &paths).unwrap();
    let ue = brute_force_max_ue(model, &paths, 1e-9).unwrap();
    OracleComparison {
        lp_r_ue: run.compliance.r_ue_total,
        oracle_r_ue: ue.r_ue_total,
        lib_so_ttt: run.so.total_travel_time,
        oracle_so_ttt: so.total_travel_time,
    }
}

/// Violations of the subflow, optimality and acceptability properties of a
/// pipeline run; empty when all hold.
pub fn subflow_violations(model: &NetworkModel, run: &PipelineResult) -> Vec<String> {
    let mut out = Vec::new();
    let res = &run.compliance;
    let f_bar = run
        .so
        .f_bar
        .clone()
        .unwrap_or_else(|| stackroute::assignment::compute_f_bar(model, &run.so.link_flow));
    for e in 0..model.num_links() {
        let x = res.ue_subflow.get(e);
        if x > f_bar[e] + 1e-7 * f_bar[e].max(1.0) {
            out.push(format!(
                "link {e}: selfish flow {x} above fbar {}",
                f_bar[e]
            ));
        }
    }
    if res.compliant_routed {
        let combined = res.combined_flow();
        let ttt = model.total_travel_time(&combined).unwrap();
        let so = run.so.total_travel_time;
        let bound = 10.0 * run.so.aec_target * so.max(1.0);
        if (ttt - so).abs() > bound {
            out.push(format!(
                "combined travel time {ttt} differs from optimum {so} by more than {bound}"
            ));
        }
        out.extend(acceptability_violations(
            model,
            res,
            &combined,
            run.reduced_costs.tolerance,
        ));
    } else {
        out.push("compliant demand was not routed".into());
    }
    out
}

fn acceptability_violations(
    model: &NetworkModel,
    res: &ComplianceResult,
    flow: &LinkFlow,
    tol: f64,
) -> Vec<String> {
    let lat = model.link_latencies(flow);
    let mc = model.link_marginal_costs(flow);
    let mut trees: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut out = Vec::new();
    for p in &res.ue_paths.entries {
        let (dl, dc) = trees.entry(p.origin).or_insert_with(|| {
            (
                one_to_all(model, p.origin, &lat).dist,
                one_to_all(model, p.origin, &mc).dist,
            )
        });
        let (pl, pc) = model.path_metrics(flow, &p.links).unwrap();
        if pl > dl[p.destination] + 2.0 * tol || pc > dc[p.destination] + 2.0 * tol {
            out.push(format!(
                "selfish path {:?} of ({}, {}): latency {pl} vs {}, marginal cost {pc} vs {}",
                p.links, p.origin, p.destination, dl[p.destination], dc[p.destination]
            ));
        }
    }
    out
}

/// Mismatches between path sets and the link flows they were taken from.
pub fn decomposition_violations(model: &NetworkModel, res: &ComplianceResult) -> Vec<String> {
    let mut out = Vec::new();
    let m = model.num_links();
    let mut check = |name: &str, paths: &PathFlowSet, flow: &LinkFlow| {
        let agg = paths.link_flow(m);
        let diff = agg.max_abs_diff(flow);
        if diff > 1e-7 {
            out.push(format!(
                "{name} paths reproduce the link flow only within {diff}"
            ));
        }
        let mut per_origin: BTreeMap<usize, usize> = BTreeMap::new();
        for p in &paths.entries {
            *per_origin.entry(p.origin).or_default() += 1;
        }
        for (o, n) in per_origin {
            if n > m {
                out.push(format!("{name}: origin {o} has {n} paths for {m} links"));
            }
        }
    };
    check("selfish", &res.ue_paths, &res.ue_subflow);
    check("compliant", &res.compliant_paths, &res.compliant_flow);
    out
}
