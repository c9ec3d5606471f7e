//! Braess network with a free shortcut. At the optimum the shortcut is
//! unused, but it is the cheapest path, so no selfish agent would accept
//! either outer path: every agent must be compliant.
//!
//! The program that bounds only the selfish flow reports half the demand as
//! selfish. That share cannot be completed, because the remaining compliant
//! half no longer fits. The joint program, the default, reports zero.

use stackroute::{
    run_pipeline, LatencyFunction as L, NetworkBuilder, PipelineOptions, ShareFormulation,
};

fn main() -> stackroute::Result<()> {
    let model = NetworkBuilder::new(4)
        .link(0, 1, L::affine(0.0, 1.0))
        .link(1, 3, L::constant(1.0))
        .link(0, 2, L::constant(1.0))
        .link(2, 3, L::affine(0.0, 1.0))
        .link(1, 2, L::constant(0.0))
        .demand(0, 3, 1.0)
        .build()?;

    for formulation in [ShareFormulation::Joint, ShareFormulation::SelfishOnly] {
        let opts = PipelineOptions {
            formulation,
            solve_ue: false,
            ..Default::default()
        };
        let run = run_pipeline(&model, &opts)?;
        println!(
            "{formulation:>12}: selfish {:.3}, compliant {:.1}%, compliant demand routable: {}",
            run.compliance.r_ue_total, run.summary.compliant_pct, run.compliance.compliant_routed
        );
    }
    Ok(())
}
