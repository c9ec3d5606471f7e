//! Compares the pipeline against brute-force path enumeration on a small
//! network with two origins sharing a bottleneck.

use stackroute::oracle::{brute_force_max_ue, brute_force_so, enumerate_paths};
use stackroute::{
    run_pipeline, AssignmentOptions, LatencyFunction as L, NetworkBuilder, PipelineOptions,
};

fn main() -> stackroute::Result<()> {
    let model = NetworkBuilder::new(4)
        .link(0, 2, L::affine(0.2, 1.0))
        .link(1, 2, L::affine(0.1, 0.5))
        .link(2, 3, L::affine(0.5, 1.0))
        .link(0, 3, L::constant(2.5))
        .link(1, 3, L::constant(2.0))
        .demand(0, 3, 1.0)
        .demand(1, 3, 1.5)
        .build()?;
    let opts = PipelineOptions {
        assignment: AssignmentOptions {
            aec_target: 1e-12,
            max_iterations: 20_000,
            ..Default::default()
        },
        solve_ue: false,
        ..Default::default()
    };
    let run = run_pipeline(&model, &opts)?;

    let paths = enumerate_paths(&model, 100)?;
    let so = brute_force_so(&model, &paths)?;
    let ue = brute_force_max_ue(&model, &paths, 1e-9)?;
    println!(
        "{} paths, {} degrees of freedom",
        paths.total_paths(),
        paths.degrees_of_freedom()
    );
    println!(
        "SO TTT     pipeline {:.10}  oracle {:.10}",
        run.so.total_travel_time, so.total_travel_time
    );
    println!(
        "selfish    pipeline {:.10}  oracle {:.10}",
        run.compliance.r_ue_total, ue.r_ue_total
    );
    Ok(())
}
