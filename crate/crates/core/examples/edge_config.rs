//! Router configuration the controller would push to an edge after a few
//! flows are allocated.
//!
//! ```text
//! cargo run --example edge_config [edge]
//! ```

use polka_te::bundled;
use polka_te::controller::{Controller, ControllerConfig, FlowIntent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let edge = std::env::args().nth(1).unwrap_or_else(|| "MIA_edge".to_string());
    let mut c = Controller::new(bundled::p4lab(), ControllerConfig::default());
    for (tos, tunnel) in [(1, 1), (2, 2), (3, 3)] {
        c.submit(FlowIntent::new("host1", "host2", 6, tos, 100.0).pinned(tunnel))?;
    }
    c.submit(FlowIntent::new("host1", "host2", 1, 0, 0.1))?;
    print!("{}", c.render_edge_config(&edge)?);
    Ok(())
}
