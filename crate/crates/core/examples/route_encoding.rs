//! Route identifiers: encode a path once at the edge, then let every core
//! node recover its output port with a single polynomial remainder.
//!
//! ```text
//! cargo run --example route_encoding
//! ```

use polka_te::bundled;
use polka_te::gf2poly::Gf2Poly;
use polka_te::polka::{self, NodeId, PortId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three nodes with identifiers t+1, t^2+t+1, t^3+t+1
    let nodes = [
        NodeId::new("s1", "11".parse::<Gf2Poly>()?)?,
        NodeId::new("s2", "111".parse::<Gf2Poly>()?)?,
        NodeId::new("s3", "1011".parse::<Gf2Poly>()?)?,
    ];
    let hops: Vec<(NodeId, PortId)> = nodes
        .iter()
        .cloned()
        .zip([1, 2, 6].map(PortId::new))
        .collect();
    let route = polka::route_id_for_path(&hops)?;
    println!("route s1:1 -> s2:2 -> s3:6 encodes to {route}");
    for node in &nodes {
        let port = polka::forward(route, node);
        println!("  {} ({}) : {} mod {} = {}", node.label, node.poly, route, node.poly, port.number());
    }

    // the same thing through the spec parser and a bundled topology
    let topo = bundled::load_topology("demo3.topo")?;
    let from_spec = polka_te::scenario::encode_route(&topo, "s1:1,s2:2,s3:6")?;
    assert_eq!(from_spec, route);

    // malformed specs report where they went wrong
    if let Err(e) = polka::parse_route_spec("s1:1,s2:two") {
        println!("parse error: {e}");
    }

    // tunnels of the bundled wide-area topology, compiled at load time
    let p4lab = bundled::p4lab();
    println!("\n{} tunnels:", p4lab.name);
    for t in p4lab.tunnels() {
        let ports: Vec<String> = t
            .hops
            .iter()
            .map(|(n, p)| format!("{}:{}", n.label, p.number()))
            .collect();
        println!("  T{} {} -> {} via [{}] route id {}", t.id, t.ingress, t.egress, ports.join(", "), t.route_id);
    }

    // generated identifiers are irreducible and pairwise coprime
    let generated = polka::gen_node_ids(8, 7)?;
    let labels: Vec<String> = generated.iter().map(|n| format!("{}={}", n.label, n.poly)).collect();
    println!("\n8 generated ids for 3-bit ports: {}", labels.join(" "));
    Ok(())
}
