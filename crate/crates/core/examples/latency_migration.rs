//! A ping flow starts on the long tunnel, then is moved to the
//! lowest-latency tunnel at the same edge with one PBR update.
//!
//! ```text
//! cargo run --example latency_migration
//! ```

use polka_te::controller::Event;
use polka_te::scenario::{describe, run_scenario, ScenarioScript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let script = ScenarioScript::bundled("latency_migration")?;
    let run = run_scenario(&script, 42)?;
    print!("{}", describe(&run.report));

    let flow = run.report.flows["ping"];
    let tunnel = run.timeseries.column(&format!("flow:{flow}:tunnel"))?;
    println!("\n  t    tunnel  latency");
    for (i, t) in run.timeseries.t.iter().enumerate() {
        if (55.0..=65.0).contains(t) {
            let id = tunnel[i] as u32;
            let lat = run.timeseries.column(&format!("path:{id}:latency"))?[i];
            println!("{t:>4}   T{id}     {lat:>5} ms");
        }
    }

    for m in run.controller.bus().log() {
        if let Event::FlowMigrated { flow, from, to, rule } = &m.event {
            println!("\nseq {} t={}: flow {flow} T{from} -> T{to} via rule {} at {}", m.seq, m.t, rule.name, rule.edge);
        }
    }
    Ok(())
}
