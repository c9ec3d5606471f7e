//! Links that self-interested agents accept inside the Sioux Falls system
//! optimum, certified exactly and by the empirical threshold rule.

use stackroute::{
    solve_equilibrium, tntp, AssignmentOptions, Objective, ReducedCostMode, ReducedCostSets,
};

fn main() -> stackroute::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let model = tntp::load_model(
        format!("{dir}/SiouxFalls_net.tntp"),
        format!("{dir}/SiouxFalls_trips.tntp"),
    )?;
    let so = solve_equilibrium(
        &model,
        Objective::SystemOptimum,
        &AssignmentOptions::default(),
    )?;

    for mode in [ReducedCostMode::Exact, ReducedCostMode::Empirical] {
        let rc = ReducedCostSets::compute(&model, &so, mode, None)?;
        println!(
            "{mode}: tolerance {:.2e}, threshold {:.2e}, {} origin-link pairs, {} pairs without an acceptable path",
            rc.tolerance,
            rc.threshold,
            rc.total_links(),
            rc.disconnected_pairs.len()
        );
    }

    // Tightening the exact tolerance below the solver's own slack drops links.
    for tol in [1e-12, 1e-9, 1e-6] {
        let rc = ReducedCostSets::compute(&model, &so, ReducedCostMode::Exact, Some(tol))?;
        println!("exact at {tol:.0e}: {} origin-link pairs", rc.total_links());
    }
    Ok(())
}
