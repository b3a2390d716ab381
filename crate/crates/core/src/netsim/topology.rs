//! Capacitated, latency-annotated topologies and PolKA tunnels.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};

use super::{NetsimError, Result};
use crate::gf2poly::Gf2Poly;
use crate::polka::{self, NodeId, PortId, RouteId};

pub const DEFAULT_LATENCY_MS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Core,
    Edge,
    Host,
}

/// On-disk topology (`*.topo`, JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDoc {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default = "default_latency")]
    pub default_latency_ms: f64,
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub tunnels: Vec<TunnelDoc>,
}

fn schema_version() -> u32 {
    crate::SCHEMA_VERSION
}

fn default_latency() -> f64 {
    DEFAULT_LATENCY_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub label: String,
    pub kind: NodeKind,
    /// Irreducible identifier for core nodes; generated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_id: Option<Gf2Poly>,
    /// Address, optionally with prefix (`40.40.1.2/24`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<String>,
    /// Layout hint for renderers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub a: String,
    pub b: String,
    pub capacity_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelDoc {
    pub id: u32,
    pub ingress: String,
    pub egress: String,
    pub path: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nexthop: Option<Ipv4Addr>,
    /// Checked against the compiled route when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_id: Option<Gf2Poly>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: String,
    pub kind: NodeKind,
    pub node_id: Option<NodeId>,
    pub addr: Option<Ipv4Net>,
    pub pos: Option<[f64; 2]>,
}

/// Full-duplex link; each direction has its own `capacity_mbps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub a_port: PortId,
    pub b_port: PortId,
    pub capacity_mbps: f64,
    pub latency_ms: f64,
}

/// One direction of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirLink {
    pub link: usize,
    pub from_a: bool,
}

impl DirLink {
    /// Dense index over both directions of every link.
    pub fn resource(self) -> usize {
        self.link * 2 + usize::from(!self.from_a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tunnel {
    pub id: u32,
    pub ingress: String,
    pub egress: String,
    pub core: Vec<String>,
    pub hops: Vec<(NodeId, PortId)>,
    pub route_id: RouteId,
    pub nexthop: Ipv4Addr,
}

impl Tunnel {
    pub fn to_doc(&self) -> TunnelDoc {
        TunnelDoc {
            id: self.id,
            ingress: self.ingress.clone(),
            egress: self.egress.clone(),
            path: self.core.clone(),
            nexthop: Some(self.nexthop),
            route_id: Some(self.route_id.poly()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    default_latency_ms: f64,
    nodes: Vec<Node>,
    links: Vec<Link>,
    tunnels: BTreeMap<u32, Tunnel>,
    by_label: HashMap<String, usize>,
    /// per node: port number -> (link, neighbour)
    ports: Vec<BTreeMap<u64, (usize, usize)>>,
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(text).map_err(NetsimError::Document)?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: TopologyDoc) -> Result<Self> {
        if doc.nodes.is_empty() {
            return Err(NetsimError::EmptyTopology);
        }
        if doc.default_latency_ms.is_nan() || doc.default_latency_ms < 0.0 {
            return Err(NetsimError::InvalidLink(format!(
                "default latency {} must be >= 0",
                doc.default_latency_ms
            )));
        }
        let mut by_label = HashMap::new();
        for (i, n) in doc.nodes.iter().enumerate() {
            if by_label.insert(n.label.clone(), i).is_some() {
                return Err(NetsimError::DuplicateNode(n.label.clone()));
            }
        }
        let lookup = |label: &str| {
            by_label
                .get(label)
                .copied()
                .ok_or_else(|| NetsimError::UnknownNode(label.to_string()))
        };

        let mut ports: Vec<BTreeMap<u64, (usize, usize)>> = vec![BTreeMap::new(); doc.nodes.len()];
        let mut links = Vec::with_capacity(doc.links.len());
        for (li, l) in doc.links.iter().enumerate() {
            let (a, b) = (lookup(&l.a)?, lookup(&l.b)?);
            if a == b {
                return Err(NetsimError::InvalidLink(format!("self loop at {}", l.a)));
            }
            if !(l.capacity_mbps > 0.0 && l.capacity_mbps.is_finite()) {
                return Err(NetsimError::InvalidLink(format!(
                    "{}-{}: capacity {} must be positive",
                    l.a, l.b, l.capacity_mbps
                )));
            }
            let latency_ms = l.latency_ms.unwrap_or(doc.default_latency_ms);
            if !(latency_ms >= 0.0 && latency_ms.is_finite()) {
                return Err(NetsimError::InvalidLink(format!(
                    "{}-{}: latency {latency_ms} must be >= 0",
                    l.a, l.b
                )));
            }
            // ports count from 1 in link order; 0 means local delivery
            let a_port = PortId::new(ports[a].len() as u64 + 1);
            let b_port = PortId::new(ports[b].len() as u64 + 1);
            ports[a].insert(a_port.number(), (li, b));
            ports[b].insert(b_port.number(), (li, a));
            links.push(Link {
                a,
                b,
                a_port,
                b_port,
                capacity_mbps: l.capacity_mbps,
                latency_ms,
            });
        }

        let nodes = build_nodes(&doc.nodes, &ports)?;
        let mut topo = Topology {
            name: doc.name,
            default_latency_ms: doc.default_latency_ms,
            nodes,
            links,
            tunnels: BTreeMap::new(),
            by_label,
            ports,
        };
        topo.check_connected()?;
        for t in doc.tunnels {
            let core: Vec<&str> = t.path.iter().map(String::as_str).collect();
            let tunnel = topo.add_tunnel(Some(t.id), &t.ingress, &t.egress, &core, t.nexthop)?;
            if let Some(expected) = t.route_id {
                if tunnel.route_id.poly() != expected {
                    return Err(NetsimError::InvalidTunnel(format!(
                        "tunnel {}: declared route id {} but path compiles to {}",
                        t.id,
                        expected.to_binary_string(),
                        tunnel.route_id
                    )));
                }
            }
        }
        Ok(topo)
    }

    /// Document form, with generated identifiers and compiled routes filled in.
    pub fn to_doc(&self) -> TopologyDoc {
        TopologyDoc {
            schema_version: crate::SCHEMA_VERSION,
            name: self.name.clone(),
            default_latency_ms: self.default_latency_ms,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeDoc {
                    label: n.label.clone(),
                    kind: n.kind,
                    node_id: n.node_id.as_ref().map(|id| id.poly),
                    addr: n.addr.map(|a| a.to_string()),
                    pos: n.pos,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkDoc {
                    a: self.nodes[l.a].label.clone(),
                    b: self.nodes[l.b].label.clone(),
                    capacity_mbps: l.capacity_mbps,
                    latency_ms: Some(l.latency_ms),
                })
                .collect(),
            tunnels: self
                .tunnels
                .values()
                .map(Tunnel::to_doc)
                .collect(),
        }
    }

    fn check_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for &(_, m) in self.ports[n].values() {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(NetsimError::Disconnected(self.nodes[i].label.clone())),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn index(&self, label: &str) -> Result<usize> {
        self.by_label
            .get(label)
            .copied()
            .ok_or_else(|| NetsimError::UnknownNode(label.to_string()))
    }

    pub fn node(&self, label: &str) -> Result<&Node> {
        self.index(label).map(|i| &self.nodes[i])
    }

    pub fn node_id(&self, label: &str) -> Result<&NodeId> {
        self.node(label)?
            .node_id
            .as_ref()
            .ok_or_else(|| NetsimError::NotCore(label.to_string()))
    }

    pub fn tunnel(&self, id: u32) -> Result<&Tunnel> {
        self.tunnels.get(&id).ok_or(NetsimError::UnknownTunnel(id))
    }

    pub fn tunnels(&self) -> impl Iterator<Item = &Tunnel> {
        self.tunnels.values()
    }

    /// Neighbour reached through `port` of node `node`.
    pub fn port_neighbor(&self, node: usize, port: PortId) -> Option<(usize, usize)> {
        self.ports[node].get(&port.number()).copied()
    }

    /// Output port of `from` on its first link towards `to`.
    pub fn port_towards(&self, from: usize, to: usize) -> Option<(PortId, usize)> {
        self.ports[from]
            .iter()
            .find(|(_, &(_, n))| n == to)
            .map(|(&p, &(l, _))| (PortId::new(p), l))
    }

    pub fn dir_link(&self, link: usize, from: usize) -> DirLink {
        DirLink {
            link,
            from_a: self.links[link].a == from,
        }
    }

    pub fn dir_link_label(&self, d: DirLink) -> String {
        let l = &self.links[d.link];
        let (from, to) = if d.from_a { (l.a, l.b) } else { (l.b, l.a) };
        format!("{}-{}", self.nodes[from].label, self.nodes[to].label)
    }

    /// Compiles and registers a tunnel. `id` defaults to one above the largest.
    pub fn add_tunnel(
        &mut self,
        id: Option<u32>,
        ingress: &str,
        egress: &str,
        core: &[&str],
        nexthop: Option<Ipv4Addr>,
    ) -> Result<Tunnel> {
        let id = id.unwrap_or_else(|| self.tunnels.keys().next_back().map_or(1, |k| k + 1));
        if self.tunnels.contains_key(&id) {
            return Err(NetsimError::InvalidTunnel(format!("tunnel {id} already exists")));
        }
        let bad = |msg: String| NetsimError::InvalidTunnel(format!("tunnel {id}: {msg}"));
        let ing = self.index(ingress)?;
        let egr = self.index(egress)?;
        for (label, idx) in [(ingress, ing), (egress, egr)] {
            if self.nodes[idx].kind != NodeKind::Edge {
                return Err(bad(format!("{label} is not an edge node")));
            }
        }
        if core.is_empty() {
            return Err(bad("empty core path".into()));
        }
        let mut sequence = vec![ing];
        for label in core {
            let idx = self.index(label)?;
            if self.nodes[idx].kind != NodeKind::Core {
                return Err(bad(format!("{label} is not a core node")));
            }
            sequence.push(idx);
        }
        sequence.push(egr);

        let mut hops = Vec::with_capacity(core.len());
        for w in sequence.windows(2) {
            let Some((port, _)) = self.port_towards(w[0], w[1]) else {
                return Err(bad(format!(
                    "{} and {} are not adjacent",
                    self.nodes[w[0]].label, self.nodes[w[1]].label
                )));
            };
            if let Some(node_id) = &self.nodes[w[0]].node_id {
                hops.push((node_id.clone(), port));
            }
        }
        let route_id = polka::route_id_for_path(&hops).map_err(|e| bad(e.to_string()))?;
        let tunnel = Tunnel {
            id,
            ingress: ingress.to_string(),
            egress: egress.to_string(),
            core: core.iter().map(|s| s.to_string()).collect(),
            hops,
            route_id,
            nexthop: nexthop.unwrap_or_else(|| default_nexthop(id)),
        };
        // the label must actually steer packets along the declared path
        let walked = self.walk_route(&tunnel)?;
        if walked.len() != sequence.len() - 1 {
            return Err(bad("forwarding walk diverges from the declared path".into()));
        }
        self.tunnels.insert(id, tunnel.clone());
        Ok(tunnel)
    }

    /// Directed links a packet traverses from the tunnel's ingress edge to its
    /// egress edge, obtained by applying PolKA forwarding at every core node.
    pub fn walk_route(&self, tunnel: &Tunnel) -> Result<Vec<DirLink>> {
        let bad = |msg: String| NetsimError::InvalidTunnel(format!("tunnel {}: {msg}", tunnel.id));
        let ing = self.index(&tunnel.ingress)?;
        let egr = self.index(&tunnel.egress)?;
        let first = self.index(tunnel.core.first().ok_or_else(|| bad("empty core path".into()))?)?;
        let (_, link) = self
            .port_towards(ing, first)
            .ok_or_else(|| bad("ingress not adjacent to first core".into()))?;
        let mut out = vec![self.dir_link(link, ing)];
        let mut cur = first;
        for _ in 0..=self.nodes.len() {
            let Some(node_id) = &self.nodes[cur].node_id else {
                return if cur == egr {
                    Ok(out)
                } else {
                    Err(bad(format!("route exits the core at {}", self.nodes[cur].label)))
                };
            };
            let port = polka::forward(tunnel.route_id, node_id);
            let (link, next) = self.port_neighbor(cur, port).ok_or_else(|| {
                bad(format!("{} has no port {port}", self.nodes[cur].label))
            })?;
            out.push(self.dir_link(link, cur));
            cur = next;
        }
        Err(bad("forwarding loop".into()))
    }

    /// Sum of link latencies from ingress edge to egress edge.
    pub fn path_latency(&self, tunnel: &Tunnel) -> Result<f64> {
        Ok(self
            .walk_route(tunnel)?
            .iter()
            .map(|d| self.links[d.link].latency_ms)
            .sum())
    }

    /// Smallest link capacity along the tunnel.
    pub fn bottleneck(&self, tunnel: &Tunnel) -> Result<f64> {
        Ok(self
            .walk_route(tunnel)?
            .iter()
            .map(|d| self.links[d.link].capacity_mbps)
            .fold(f64::INFINITY, f64::min))
    }
}

fn default_nexthop(id: u32) -> Ipv4Addr {
    Ipv4Addr::new(30, 30, (id % 256) as u8, 2)
}

fn build_nodes(docs: &[NodeDoc], ports: &[BTreeMap<u64, (usize, usize)>]) -> Result<Vec<Node>> {
    let mut nodes = Vec::with_capacity(docs.len());
    let mut used: Vec<(String, Gf2Poly)> = Vec::new();
    for n in docs {
        let addr = n
            .addr
            .as_deref()
            .map(|a| parse_addr(a).ok_or_else(|| NetsimError::InvalidAddress(a.to_string())))
            .transpose()?;
        let node_id = match (n.kind, n.node_id) {
            (NodeKind::Core, Some(poly)) => {
                let id = NodeId::new(n.label.clone(), poly)?;
                for (other, p) in &used {
                    if p.gcd(poly)? != Gf2Poly::ONE {
                        return Err(NetsimError::NodeIdsNotCoprime(other.clone(), n.label.clone()));
                    }
                }
                used.push((n.label.clone(), poly));
                Some(id)
            }
            (NodeKind::Core, None) => None,
            (_, Some(_)) => {
                return Err(NetsimError::InvalidNode(format!(
                    "{}: only core nodes carry identifiers",
                    n.label
                )))
            }
            (_, None) => None,
        };
        nodes.push(Node {
            label: n.label.clone(),
            kind: n.kind,
            node_id,
            addr,
            pos: n.pos,
        });
    }

    let missing: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind == NodeKind::Core && nodes[i].node_id.is_none())
        .collect();
    let max_port = ports
        .iter()
        .zip(&nodes)
        .filter(|(_, n)| n.kind == NodeKind::Core)
        .map(|(p, _)| p.len() as u64)
        .max()
        .unwrap_or(1);
    if !missing.is_empty() {
        let candidates = polka::gen_node_ids(missing.len() + used.len(), max_port)?;
        let mut fresh = candidates
            .into_iter()
            .filter(|c| used.iter().all(|(_, p)| p.gcd(c.poly).map(|g| g == Gf2Poly::ONE).unwrap_or(false)));
        for i in missing {
            let c = fresh.next().ok_or_else(|| NetsimError::InvalidNode("identifier pool exhausted".into()))?;
            nodes[i].node_id = Some(NodeId::new(nodes[i].label.clone(), c.poly)?);
        }
    }
    for (i, n) in nodes.iter().enumerate() {
        if let Some(id) = &n.node_id {
            let degree = ports[i].len() as u64;
            if degree > id.max_port() {
                return Err(NetsimError::InvalidNode(format!(
                    "{}: {degree} ports exceed identifier {} (max port {})",
                    n.label,
                    id.poly,
                    id.max_port()
                )));
            }
        }
    }
    Ok(nodes)
}

fn parse_addr(s: &str) -> Option<Ipv4Net> {
    s.parse::<Ipv4Net>()
        .ok()
        .or_else(|| s.parse::<Ipv4Addr>().ok().map(|a| Ipv4Net::new(a, 32).expect("valid prefix")))
}
