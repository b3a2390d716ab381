//! Three TCP flows share one tunnel; a joint reallocation spreads them over
//! the three tunnels leaving the same edge.
//!
//! ```text
//! cargo run --example flow_aggregation
//! ```

use polka_te::scenario::{describe, run_scenario, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = ScenarioScript::bundled("flow_aggregation")?;
    let run = run_scenario(&script, 42)?;
    print!("{}", describe(&run.report));

    let table = &run.timeseries;
    let at = |t: f64| table.t.iter().position(|&x| x == t).expect("sampled");
    println!("\nflow     tunnel@60  Mbps@60   tunnel@120  Mbps@120");
    for (name, id) in &run.report.flows {
        let tun = table.column(&format!("flow:{id}:tunnel"))?;
        let thr = table.column(&format!("flow:{id}:throughput"))?;
        let (a, b) = (at(60.0), at(120.0));
        println!("{name:<8} T{:<9} {:>7.2}   T{:<10} {:>7.2}", tun[a], thr[a], tun[b], thr[b]);
    }
    Ok(())
}
