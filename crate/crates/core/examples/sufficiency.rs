//! Is a given amount of compliant demand enough? On the two-link network of
//! the `pigou` example the answer flips at one half.

use std::collections::BTreeMap;

use stackroute::{
    check_sufficiency, run_pipeline, LatencyFunction, NetworkBuilder, PipelineOptions, Sufficiency,
};

fn main() -> stackroute::Result<()> {
    let model = NetworkBuilder::new(2)
        .link(0, 1, LatencyFunction::constant(1.0))
        .link(0, 1, LatencyFunction::affine(0.0, 1.0))
        .demand(0, 1, 1.0)
        .build()?;
    let run = run_pipeline(
        &model,
        &PipelineOptions {
            solve_ue: false,
            ..Default::default()
        },
    )?;

    for c in [0.2, 0.4, 0.5, 0.6, 0.9] {
        let demand = BTreeMap::from([((0, 1), c)]);
        match check_sufficiency(&model, &run.so, &run.reduced_costs, &demand)? {
            Sufficiency::Sufficient(res) => {
                println!(
                    "compliant {c:.1}: sufficient, compliant flow per link {:?}",
                    res.compliant_flow.values()
                )
            }
            Sufficiency::Insufficient => println!("compliant {c:.1}: insufficient"),
        }
    }
    Ok(())
}
