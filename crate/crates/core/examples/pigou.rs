//! Two parallel links, one with constant latency 1 and one with latency x,
//! carrying one unit of demand. Selfish routing sends everything over the
//! congestible link; the optimum splits evenly, and half the demand has to
//! be compliant to hold that split.

use stackroute::{run_pipeline, LatencyFunction, NetworkBuilder, PipelineOptions};

fn main() -> stackroute::Result<()> {
    let model = NetworkBuilder::new(2)
        .link(0, 1, LatencyFunction::constant(1.0))
        .link(0, 1, LatencyFunction::affine(0.0, 1.0))
        .demand(0, 1, 1.0)
        .build()?;
    let run = run_pipeline(&model, &PipelineOptions::default())?;

    let ue = run.ue.as_ref().expect("user equilibrium requested");
    println!(
        "user equilibrium  TTT {:.4}  flows {:?}",
        ue.total_travel_time,
        ue.link_flow.values()
    );
    println!(
        "system optimum    TTT {:.4}  flows {:?}",
        run.so.total_travel_time,
        run.so.link_flow.values()
    );
    println!(
        "selfish demand {:.4}, compliant share {:.2}%",
        run.compliance.r_ue_total, run.summary.compliant_pct
    );
    for p in &run.compliance.compliant_paths.entries {
        println!(
            "compliant path over links {:?} carries {:.4}",
            p.links, p.flow
        );
    }
    Ok(())
}
