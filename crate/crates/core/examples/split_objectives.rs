//! The three demand-split objectives side by side on the same two paths.
//!
//! ```text
//! cargo run --example split_objectives
//! ```

use polka_te::optimizer::{split, DemandSpec, Objective, PathSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paths = vec![PathSpec::new(1, 20.0).with_cost(1.0), PathSpec::new(2, 10.0).with_cost(2.0)];
    println!("{:>8}  {:<24} {:>9} {:>9} {:>12}", "demand", "objective", "path 1", "path 2", "value");
    for demand in [5.0, 15.0, 25.0] {
        let spec = DemandSpec::new(demand, paths.clone());
        for objective in [Objective::MinCost, Objective::MinMaxUtilization, Objective::MinDelay] {
            let d = split(&spec, objective)?;
            println!(
                "{:>8}  {:<24} {:>9.4} {:>9.4} {:>12.6}",
                demand,
                objective.name(),
                d.x[0],
                d.x[1],
                d.objective
            );
        }
    }
    // selection objectives pick a tunnel rather than splitting
    let spec = DemandSpec::new(5.0, paths);
    if let Err(e) = split(&spec, Objective::MinLatency) {
        println!("\n{e}");
    }
    Ok(())
}
