//! Sioux Falls results row: travel times, saving and compliant share.
//!
//! ```text
//! cargo run --release --example sioux_falls [net.tntp trips.tntp]
//! ```

use std::time::Instant;

use stackroute::{run_pipeline, tntp, PipelineOptions};

fn main() -> stackroute::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (net, trips) = match args.as_slice() {
        [n, t] => (n.clone(), t.clone()),
        _ => (
            format!("{dir}/SiouxFalls_net.tntp"),
            format!("{dir}/SiouxFalls_trips.tntp"),
        ),
    };
    let model = tntp::load_model(&net, &trips)?;
    let start = Instant::now();
    let run = run_pipeline(&model, &PipelineOptions::default())?;
    let s = &run.summary;

    println!(
        "nodes {}  links {}  zones {}  demand {:.0}",
        model.num_nodes(),
        model.num_links(),
        model.num_zones(),
        model.total_demand()
    );
    println!(
        "UE TTT          {:.0}",
        s.ue_total_travel_time.unwrap_or(f64::NAN)
    );
    println!("SO TTT          {:.0}", s.so_total_travel_time);
    println!(
        "improvement     {:.2}%",
        s.improvement_pct.unwrap_or(f64::NAN)
    );
    println!("threshold T     {:.2e}", s.threshold);
    println!(
        "compliant       {:.2}% (selfish-only bound {:.2}%)",
        s.compliant_pct, s.selfish_only_compliant_pct
    );
    println!("elapsed         {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
