//! Deterministic fluid-flow network simulator.
//!
//! Flows are continuous rates. Each active flow enters at the edge router
//! next to its source host, is matched by a PBR rule onto a tunnel, follows
//! the tunnel's PolKA route through the core, and exits to its destination
//! host. Rates are the max-min fair allocation over per-direction link
//! capacities, capped by each flow's demand.

mod config;
pub mod fairness;
mod topology;

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use ipnet::Ipv4Net;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::render_edge_config;
pub use topology::{
    DirLink, Link, LinkDoc, Node, NodeDoc, NodeKind, Topology, TopologyDoc, Tunnel, TunnelDoc,
    DEFAULT_LATENCY_MS,
};

use crate::polka::PolkaError;
use crate::telemetry::TelemetrySample;
use fairness::Demand;

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("topology has no nodes")]
    EmptyTopology,
    #[error("duplicate node label {0}")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} is not a core node")]
    NotCore(String),
    #[error("invalid node: {0}")]
    InvalidNode(String),
    #[error("invalid link: {0}")]
    InvalidLink(String),
    #[error("invalid address {0:?}")]
    InvalidAddress(String),
    #[error("node identifiers of {0} and {1} are not coprime")]
    NodeIdsNotCoprime(String, String),
    #[error("node {0} is not connected to the rest of the topology")]
    Disconnected(String),
    #[error("unknown tunnel {0}")]
    UnknownTunnel(u32),
    #[error("invalid tunnel: {0}")]
    InvalidTunnel(String),
    #[error("tunnel {tunnel} does not start at edge {edge}")]
    ForeignTunnel { tunnel: u32, edge: String },
    #[error("unknown flow {0}")]
    UnknownFlow(FlowId),
    #[error("invalid flow: {0}")]
    InvalidFlow(String),
    #[error("flow {0} duplicates the match tuple of active flow {1}")]
    DuplicateFlow(FlowId, FlowId),
    #[error("flow {0} matches no PBR rule")]
    Unroutable(FlowId),
    #[error("flow {flow} matches rules {first} and {second} with equal specificity")]
    AmbiguousRules {
        flow: FlowId,
        first: String,
        second: String,
    },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Polka(#[from] PolkaError),
    #[error(transparent)]
    Gf2(#[from] crate::gf2poly::Gf2Error),
    #[error("malformed topology document: {0}")]
    Document(serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NetsimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u64);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub src_host: String,
    pub dst_host: String,
    /// IP protocol number (6 = TCP, 1 = ICMP).
    pub protocol: u8,
    pub tos: u8,
    pub demand_mbps: f64,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PbrMatch {
    pub src_net: Ipv4Net,
    pub dst_addr: Ipv4Addr,
    pub protocol: u8,
    pub tos: u8,
}

/// Edge-router policy: traffic matching `matcher` enters tunnel `tunnel_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PbrRule {
    pub edge: String,
    /// Access-list name, e.g. `flow3`.
    pub name: String,
    pub matcher: PbrMatch,
    pub tunnel_id: u32,
}

/// Route and exact rate of every active flow for one allocation round.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocations {
    pub rates: BTreeMap<FlowId, BigRational>,
    pub routes: BTreeMap<FlowId, FlowRoute>,
    /// Load per directed link, indexed by [`DirLink::resource`].
    pub load: Vec<BigRational>,
}

impl Allocations {
    pub fn rate_mbps(&self, flow: FlowId) -> f64 {
        self.rates.get(&flow).and_then(ToPrimitive::to_f64).unwrap_or(0.0)
    }

    pub fn total_mbps(&self) -> f64 {
        self.rates.values().sum::<BigRational>().to_f64().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRoute {
    pub tunnel_id: u32,
    pub links: Vec<DirLink>,
}

/// Simulator state. All mutation goes through `&mut self` methods, so one
/// owner applies changes in a single order.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulator {
    topo: Topology,
    flows: BTreeMap<FlowId, Flow>,
    rules: Vec<PbrRule>,
    clock: f64,
}

impl Simulator {
    pub fn new(topo: Topology) -> Self {
        Simulator {
            topo,
            flows: BTreeMap::new(),
            rules: Vec::new(),
            clock: 0.0,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn flows(&self) -> impl Iterator<Item = &Flow> {
        self.flows.values()
    }

    pub fn flow(&self, id: FlowId) -> Result<&Flow> {
        self.flows.get(&id).ok_or(NetsimError::UnknownFlow(id))
    }

    pub fn rules(&self) -> &[PbrRule] {
        &self.rules
    }

    pub fn rules_at<'a>(&'a self, edge: &'a str) -> impl Iterator<Item = &'a PbrRule> {
        self.rules.iter().filter(move |r| r.edge == edge)
    }

    pub fn add_tunnel(
        &mut self,
        ingress: &str,
        egress: &str,
        core: &[&str],
    ) -> Result<Tunnel> {
        self.topo.add_tunnel(None, ingress, egress, core, None)
    }

    /// Edge router adjacent to a host.
    pub fn host_edge(&self, host: &str) -> Result<usize> {
        let h = self.topo.index(host)?;
        if self.topo.nodes()[h].kind != NodeKind::Host {
            return Err(NetsimError::InvalidFlow(format!("{host} is not a host")));
        }
        self.topo
            .links()
            .iter()
            .filter_map(|l| match (l.a == h, l.b == h) {
                (true, _) => Some(l.b),
                (_, true) => Some(l.a),
                _ => None,
            })
            .find(|&n| self.topo.nodes()[n].kind == NodeKind::Edge)
            .ok_or_else(|| NetsimError::InvalidFlow(format!("{host} has no edge router")))
    }

    pub fn host_addr(&self, host: &str) -> Result<Ipv4Net> {
        self.topo
            .node(host)?
            .addr
            .ok_or_else(|| NetsimError::InvalidFlow(format!("{host} has no address")))
    }

    /// Registers a flow. Active flows must not share a match tuple.
    pub fn add_flow(&mut self, flow: Flow) -> Result<()> {
        if !(flow.demand_mbps > 0.0 && flow.demand_mbps.is_finite()) {
            return Err(NetsimError::InvalidFlow(format!(
                "demand {} must be positive",
                flow.demand_mbps
            )));
        }
        if self.flows.contains_key(&flow.id) {
            return Err(NetsimError::InvalidFlow(format!("flow {} already exists", flow.id)));
        }
        self.host_edge(&flow.src_host)?;
        self.host_edge(&flow.dst_host)?;
        if flow.active {
            self.check_unique(&flow)?;
        }
        self.flows.insert(flow.id, flow);
        Ok(())
    }

    fn check_unique(&self, flow: &Flow) -> Result<()> {
        let key = |f: &Flow| (f.src_host.clone(), f.dst_host.clone(), f.protocol, f.tos);
        match self
            .flows
            .values()
            .find(|f| f.active && f.id != flow.id && key(f) == key(flow))
        {
            Some(other) => Err(NetsimError::DuplicateFlow(flow.id, other.id)),
            None => Ok(()),
        }
    }

    pub fn set_flow_active(&mut self, id: FlowId, active: bool) -> Result<()> {
        let flow = self.flow(id)?.clone();
        if active {
            self.check_unique(&flow)?;
        }
        self.flows.get_mut(&id).expect("checked").active = active;
        Ok(())
    }

    pub fn remove_flow(&mut self, id: FlowId) -> Result<Flow> {
        self.flows.remove(&id).ok_or(NetsimError::UnknownFlow(id))
    }

    /// Installs a rule, replacing any rule at the same edge with the same
    /// match tuple. Returns the replaced rule.
    pub fn set_pbr(&mut self, rule: PbrRule) -> Result<Option<PbrRule>> {
        let tunnel = self.topo.tunnel(rule.tunnel_id)?;
        if tunnel.ingress != rule.edge {
            return Err(NetsimError::ForeignTunnel {
                tunnel: rule.tunnel_id,
                edge: rule.edge.clone(),
            });
        }
        match self
            .rules
            .iter_mut()
            .find(|r| r.edge == rule.edge && r.matcher == rule.matcher)
        {
            Some(existing) => Ok(Some(std::mem::replace(existing, rule))),
            None => {
                self.rules.push(rule);
                Ok(None)
            }
        }
    }

    /// The rule a flow's packets hit at its ingress edge.
    pub fn matching_rule(&self, flow: &Flow) -> Result<&PbrRule> {
        let edge = &self.topo.nodes()[self.host_edge(&flow.src_host)?].label;
        let src = self.host_addr(&flow.src_host)?.addr();
        let dst = self.host_addr(&flow.dst_host)?.addr();
        let mut best: Option<&PbrRule> = None;
        for rule in self.rules_at(edge) {
            let m = &rule.matcher;
            if !(m.src_net.contains(&src)
                && m.dst_addr == dst
                && m.protocol == flow.protocol
                && m.tos == flow.tos)
            {
                continue;
            }
            match best {
                Some(b) if b.matcher.src_net.prefix_len() == m.src_net.prefix_len() => {
                    return Err(NetsimError::AmbiguousRules {
                        flow: flow.id,
                        first: b.name.clone(),
                        second: rule.name.clone(),
                    })
                }
                Some(b) if b.matcher.src_net.prefix_len() > m.src_net.prefix_len() => {}
                _ => best = Some(rule),
            }
        }
        best.ok_or(NetsimError::Unroutable(flow.id))
    }

    /// Full directed-link path of a flow: source host, tunnel, destination host.
    pub fn flow_route(&self, flow: &Flow) -> Result<FlowRoute> {
        let rule = self.matching_rule(flow)?;
        let tunnel = self.topo.tunnel(rule.tunnel_id)?;
        let src = self.topo.index(&flow.src_host)?;
        let dst = self.topo.index(&flow.dst_host)?;
        let ingress = self.topo.index(&tunnel.ingress)?;
        let egress = self.topo.index(&tunnel.egress)?;
        let (_, first) = self
            .topo
            .port_towards(src, ingress)
            .ok_or_else(|| NetsimError::InvalidFlow(format!("{} not attached to {}", flow.src_host, tunnel.ingress)))?;
        let (_, last) = self.topo.port_towards(egress, dst).ok_or_else(|| {
            NetsimError::InvalidFlow(format!(
                "tunnel {} ends at {}, not next to {}",
                tunnel.id, tunnel.egress, flow.dst_host
            ))
        })?;
        let mut links = vec![self.topo.dir_link(first, src)];
        links.extend(self.topo.walk_route(tunnel)?);
        links.push(self.topo.dir_link(last, egress));
        Ok(FlowRoute {
            tunnel_id: tunnel.id,
            links,
        })
    }

    /// Max-min fair rates for every active flow.
    pub fn compute_allocations(&self) -> Result<Allocations> {
        let capacities: Vec<BigRational> = self
            .topo
            .links()
            .iter()
            .flat_map(|l| {
                let c = exact(l.capacity_mbps);
                [c.clone(), c]
            })
            .collect();
        let mut routes = BTreeMap::new();
        let mut ids = Vec::new();
        let mut demands = Vec::new();
        for flow in self.flows.values().filter(|f| f.active) {
            let route = self.flow_route(flow)?;
            demands.push(Demand {
                cap: exact(flow.demand_mbps),
                links: route.links.iter().map(|d| d.resource()).collect(),
            });
            ids.push(flow.id);
            routes.insert(flow.id, route);
        }
        let rates = fairness::max_min_fair(&capacities, &demands);
        let mut load = vec![BigRational::zero(); capacities.len()];
        for (d, r) in demands.iter().zip(&rates) {
            for &l in &d.links {
                load[l] += r;
            }
        }
        Ok(Allocations {
            rates: ids.into_iter().zip(rates).collect(),
            routes,
            load,
        })
    }

    /// Advances the clock by `dt` seconds and reports the new state.
    ///
    /// Series emitted, all stamped with the new clock:
    /// `flow:<id>:throughput` (Mbps) and `flow:<id>:tunnel` per active flow,
    /// `link:<from>-<to>:utilization` (fraction) per link direction, and
    /// `path:<tunnel>:{latency,bandwidth,throughput}` per tunnel, where
    /// bandwidth is the residual capacity of the tunnel's tightest link.
    pub fn advance(&mut self, dt: f64) -> Result<Vec<TelemetrySample>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(NetsimError::InvalidStep(dt));
        }
        let alloc = self.compute_allocations()?;
        self.clock += dt;
        self.samples(&alloc)
    }

    fn samples(&self, alloc: &Allocations) -> Result<Vec<TelemetrySample>> {
        let t = self.clock;
        let mut out = Vec::new();
        for (id, route) in &alloc.routes {
            out.push(TelemetrySample::new(format!("flow:{id}:throughput"), t, alloc.rate_mbps(*id)));
            out.push(TelemetrySample::new(format!("flow:{id}:tunnel"), t, f64::from(route.tunnel_id)));
        }
        for (li, link) in self.topo.links().iter().enumerate() {
            for from_a in [true, false] {
                let d = DirLink { link: li, from_a };
                let util = (&alloc.load[d.resource()] / exact(link.capacity_mbps))
                    .to_f64()
                    .unwrap_or(0.0);
                out.push(TelemetrySample::new(
                    format!("link:{}:utilization", self.topo.dir_link_label(d)),
                    t,
                    util,
                ));
            }
        }
        for tunnel in self.topo.tunnels() {
            let links = self.topo.walk_route(tunnel)?;
            let latency: f64 = links.iter().map(|d| self.topo.links()[d.link].latency_ms).sum();
            let residual = links
                .iter()
                .map(|d| exact(self.topo.links()[d.link].capacity_mbps) - &alloc.load[d.resource()])
                .min()
                .unwrap_or_else(BigRational::zero);
            let throughput: BigRational = alloc
                .routes
                .iter()
                .filter(|(_, r)| r.tunnel_id == tunnel.id)
                .map(|(id, _)| alloc.rates[id].clone())
                .sum();
            let id = tunnel.id;
            out.push(TelemetrySample::new(format!("path:{id}:latency"), t, latency));
            out.push(TelemetrySample::new(
                format!("path:{id}:bandwidth"),
                t,
                residual.to_f64().unwrap_or(0.0).max(0.0),
            ));
            out.push(TelemetrySample::new(
                format!("path:{id}:throughput"),
                t,
                throughput.to_f64().unwrap_or(0.0),
            ));
        }
        Ok(out)
    }
}

/// Exact rational value of a finite float.
fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap_or_else(BigRational::zero)
}
