//! Path decomposition of an origin's link flow. The flow below contains a
//! circulation around nodes 1 and 2, which is canceled and reported before
//! the rest is split into paths.

use std::collections::BTreeMap;

use stackroute::{decompose_flow, LatencyFunction as L, LinkFlow, NetworkBuilder};

fn main() -> stackroute::Result<()> {
    let model = NetworkBuilder::new(4)
        .link(0, 1, L::constant(1.0))
        .link(0, 2, L::constant(1.0))
        .link(1, 2, L::constant(1.0))
        .link(2, 1, L::constant(1.0))
        .link(1, 3, L::constant(1.0))
        .link(2, 3, L::constant(1.0))
        .demand(0, 3, 3.0)
        .build()?;
    let flow = LinkFlow::new(vec![1.5, 1.5, 0.5, 0.5, 1.5, 1.5])?;
    let per_origin = BTreeMap::from([(0, flow)]);

    let d = decompose_flow(&model, &per_origin, model.demand())?;
    for c in &d.cycles {
        println!(
            "canceled cycle over links {:?} with flow {}",
            c.links, c.flow
        );
    }
    for p in &d.paths.entries {
        println!(
            "{} -> {} over links {:?}: {}",
            p.origin, p.destination, p.links, p.flow
        );
    }
    Ok(())
}
