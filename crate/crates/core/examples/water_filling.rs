//! Splitting one demand over parallel paths so the busiest path is as idle
//! as possible, given the load already on each path.
//!
//! ```text
//! cargo run --example water_filling
//! ```

use polka_te::optimizer::{split_min_max_util, DemandSpec, PathSpec};

fn show(title: &str, spec: &DemandSpec) -> Result<(), Box<dyn std::error::Error>> {
    let d = split_min_max_util(spec)?;
    println!("{title}: demand {} Mbps, max utilisation {:.4}", spec.demand_mbps, d.objective);
    for (p, x) in spec.paths.iter().zip(&d.x) {
        let util = (p.background_mbps + x) / p.capacity_mbps;
        println!(
            "  path {}: cap {:>5} bg {:>5} -> +{:>7.3} Mbps, util {:.4}",
            p.id, p.capacity_mbps, p.background_mbps, x, util
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let idle = DemandSpec::new(30.0, vec![PathSpec::new(1, 20.0), PathSpec::new(2, 10.0), PathSpec::new(3, 5.0)]);
    show("idle paths", &idle)?;

    let mut busy = idle.clone();
    busy.paths[0].background_mbps = 15.0;
    busy.demand_mbps = 10.0;
    show("path 1 already loaded", &busy)?;

    // a small demand never touches a path that is already above the level
    let mut skewed = busy.clone();
    skewed.demand_mbps = 1.0;
    show("small demand", &skewed)?;

    let over = DemandSpec::new(40.0, idle.paths.clone());
    match split_min_max_util(&over) {
        Ok(_) => unreachable!("35 Mbps of capacity cannot carry 40"),
        Err(e) => println!("over capacity: {e}"),
    }
    Ok(())
}
