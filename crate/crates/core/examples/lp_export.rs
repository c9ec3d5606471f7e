//! Builds the selfish-share program for a small network, writes it as MPS,
//! reads it back and solves both copies. Fixed-field MPS keeps 12
//! characters per value, so the two objectives agree to about that
//! precision.
//!
//! ```text
//! cargo run --example lp_export -- /tmp/share.mps
//! ```

use stackroute::lp::{export_lp, read_mps, solve_lp};
use stackroute::{
    build_ue_lp, solve_equilibrium, AssignmentOptions, LatencyFunction as L, NetworkBuilder,
    Objective, ReducedCostMode, ReducedCostSets,
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
    let so = solve_equilibrium(
        &model,
        Objective::SystemOptimum,
        &AssignmentOptions::default(),
    )?;
    let rc = ReducedCostSets::compute(&model, &so, ReducedCostMode::Exact, None)?;
    let inst = build_ue_lp(&model, &so, &rc)?;

    let mps = export_lp(&inst.lp);
    match std::env::args().nth(1) {
        Some(path) => std::fs::write(&path, &mps)?,
        None => print!("{mps}"),
    }

    let original = solve_lp(&inst.lp)?;
    let reread = solve_lp(&read_mps(&mps)?)?;
    println!(
        "\n{} rows, {} columns; objective {:.9} direct, {:.9} after MPS round trip",
        inst.lp.num_constraints(),
        inst.lp.num_variables(),
        original.objective_value,
        reread.objective_value
    );
    Ok(())
}
