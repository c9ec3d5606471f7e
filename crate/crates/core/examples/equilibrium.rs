//! User equilibrium and system optimum on Sioux Falls, with the links whose
//! flow changes most between the two.

use stackroute::{solve_equilibrium, tntp, AssignmentOptions, Objective};

fn main() -> stackroute::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let model = tntp::load_model(
        format!("{dir}/SiouxFalls_net.tntp"),
        format!("{dir}/SiouxFalls_trips.tntp"),
    )?;
    let opts = AssignmentOptions {
        aec_target: 1e-10,
        ..Default::default()
    };

    let ue = solve_equilibrium(&model, Objective::UserEquilibrium, &opts)?;
    let so = solve_equilibrium(&model, Objective::SystemOptimum, &opts)?;
    for sol in [&ue, &so] {
        println!(
            "{:?}: TTT {:.2}, AEC {:.2e} after {} iterations (converged: {})",
            sol.objective, sol.total_travel_time, sol.aec, sol.iterations, sol.converged
        );
    }

    let mut shift: Vec<(usize, f64)> = (0..model.num_links())
        .map(|e| (e, so.link_flow.get(e) - ue.link_flow.get(e)))
        .collect();
    shift.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("\nlink  tail  head        UE flow       SO flow");
    for &(e, _) in shift.iter().take(8) {
        let l = model.link(e);
        println!(
            "{:>4}  {:>4}  {:>4}  {:>13.2} {:>13.2}",
            e + 1,
            model.node_label(l.tail),
            model.node_label(l.head),
            ue.link_flow.get(e),
            so.link_flow.get(e)
        );
    }
    Ok(())
}
