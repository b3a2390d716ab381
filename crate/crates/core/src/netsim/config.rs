//! Edge router configuration text, shaped after freeRtr's access-list /
//! tunnel interface / PBR stanzas. Human-readable; not guaranteed to load
//! into a real router.

use std::fmt::Write;

use super::{NetsimError, NodeKind, Result, Simulator};

/// Renders access lists for the PBR rules installed at `edge`, one tunnel
/// interface per tunnel that starts there, and the PBR bindings.
pub fn render_edge_config(sim: &Simulator, edge: &str) -> Result<String> {
    let topo = sim.topology();
    let node = topo.node(edge)?;
    if node.kind != NodeKind::Edge {
        return Err(NetsimError::InvalidNode(format!("{edge} is not an edge router")));
    }
    let router_addr = |label: &str| -> String {
        topo.node(label)
            .ok()
            .and_then(|n| n.addr)
            .map_or_else(|| label.to_string(), |a| a.addr().to_string())
    };

    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "! topology {} edge {}", topo.name, edge).ok();
    writeln!(w, "hostname {edge}").ok();
    writeln!(w, "!").ok();

    let rules: Vec<_> = sim.rules_at(edge).collect();
    for rule in &rules {
        let m = &rule.matcher;
        writeln!(w, "access-list {}", rule.name).ok();
        writeln!(
            w,
            " sequence 10 permit {} {} {} all {} 255.255.255.255 all tos {}",
            m.protocol,
            m.src_net.network(),
            m.src_net.netmask(),
            m.dst_addr,
            m.tos
        )
        .ok();
        writeln!(w, " exit").ok();
        writeln!(w, "!").ok();
    }

    for tunnel in topo.tunnels().filter(|t| t.ingress == edge) {
        let domain: Vec<String> = tunnel
            .core
            .iter()
            .chain(std::iter::once(&tunnel.egress))
            .map(|l| router_addr(l))
            .collect();
        let local = tunnel.nexthop.octets();
        writeln!(w, "interface tunnel{}", tunnel.id).ok();
        writeln!(w, " description {} polka routeid {}", tunnel.core.join("-"), tunnel.route_id).ok();
        writeln!(w, " tunnel vrf v1").ok();
        writeln!(w, " tunnel source loopback0").ok();
        writeln!(w, " tunnel destination {}", router_addr(&tunnel.egress)).ok();
        writeln!(w, " tunnel domain-name {}", domain.join(" ")).ok();
        writeln!(w, " tunnel mode polka").ok();
        writeln!(w, " vrf forwarding v1").ok();
        writeln!(
            w,
            " ipv4 address {}.{}.{}.1 255.255.255.0",
            local[0], local[1], local[2]
        )
        .ok();
        writeln!(w, " no shutdown").ok();
        writeln!(w, " exit").ok();
        writeln!(w, "!").ok();
    }

    for rule in &rules {
        let tunnel = topo.tunnel(rule.tunnel_id)?;
        writeln!(w, "ipv4 pbr v1 {} nexthop {}", rule.name, tunnel.nexthop).ok();
    }
    Ok(out)
}
