//! Control plane: flow intents in, PBR rules out.
//!
//! An allocation round pulls telemetry windows, forecasts every candidate
//! path, asks the optimizer for a tunnel and installs the PBR rule at the
//! ingress edge. Each step is published on the [`Bus`], and replaying the
//! log's mutation events on a fresh simulator rebuilds the same state.

pub mod bus;
mod runtime;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bus::{read_ndjson, write_ndjson, Bus, BusMessage, Event, SeriesWindow, TOPICS};
pub use runtime::{ControlHandle, ControlLoop};

use crate::netsim::{
    render_edge_config, Flow, FlowId, NetsimError, PbrMatch, PbrRule, Simulator, Topology,
};
use crate::optimizer::{select_path_with, Aggregation, Candidate, Objective, OptimizerError};
use crate::predictor::{Forecaster, Hyperparams, ModelKind};
use crate::telemetry::{TelemetryError, TelemetryStore};

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Netsim(#[from] NetsimError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("unknown flow {0}")]
    UnknownFlow(FlowId),
    #[error("invalid intent: {0}")]
    InvalidIntent(String),
    #[error("flow {flow} duplicates active flow {existing}")]
    DuplicateFlow { flow: FlowId, existing: FlowId },
    #[error("flow {flow} is {state:?}, expected {expected:?}")]
    InvalidState {
        flow: FlowId,
        state: FlowState,
        expected: FlowState,
    },
    #[error("no tunnel from {ingress} to {egress} for flow {flow}")]
    NoCandidates {
        flow: FlowId,
        ingress: String,
        egress: String,
    },
    #[error("tunnel {tunnel} is not a candidate for flow {flow}")]
    NotCandidate { flow: FlowId, tunnel: u32 },
    #[error("replay diverged at seq {seq}: {reason}")]
    Replay { seq: u64, reason: String },
    #[error("control loop stopped")]
    Stopped,
}

pub type Result<T, E = ControllerError> = std::result::Result<T, E>;

fn default_objective() -> Objective {
    Objective::MaxPredictedBandwidth
}

/// A user's request for a new flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowIntent {
    pub src: String,
    pub dst: String,
    pub protocol: u8,
    #[serde(default)]
    pub tos: u8,
    pub demand_mbps: f64,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    /// Forces the initial tunnel instead of asking the optimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunnel: Option<u32>,
}

impl FlowIntent {
    pub fn new(src: &str, dst: &str, protocol: u8, tos: u8, demand_mbps: f64) -> Self {
        FlowIntent {
            src: src.to_string(),
            dst: dst.to_string(),
            protocol,
            tos,
            demand_mbps,
            objective: default_objective(),
            tunnel: None,
        }
    }

    pub fn objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn pinned(mut self, tunnel: u32) -> Self {
        self.tunnel = Some(tunnel);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowState {
    Pending,
    Allocated,
    Failed,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEntry {
    pub id: FlowId,
    pub intent: FlowIntent,
    pub state: FlowState,
    pub tunnel: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    /// Trained model, recursive forecast.
    Model,
    /// Too little history: the latest sample repeated.
    LatestSample,
    /// No samples at all: the tunnel's bottleneck capacity.
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathForecast {
    pub series: String,
    pub values: Vec<f64>,
    pub source: ForecastSource,
}

impl PathForecast {
    pub fn is_fallback(&self) -> bool {
        self.source != ForecastSource::Model
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub flow: FlowId,
    pub tunnel: u32,
    pub objective: Objective,
    pub score: f64,
    pub pinned: bool,
    pub forecasts: Vec<PathForecast>,
    /// Any forecast in this round came from a fallback.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub flow: FlowId,
    pub from: u32,
    pub to: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReallocationReport {
    pub objective: Objective,
    pub decisions: Vec<Decision>,
    pub forecasts: Vec<PathForecast>,
    pub migrations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Simulated seconds per telemetry tick.
    pub tick_s: f64,
    pub n_lags: usize,
    /// Forecast steps.
    pub horizon: usize,
    /// Most recent samples used for training.
    pub history_window: usize,
    /// Below this many samples a series falls back to its latest value.
    pub min_history: usize,
    pub model: ModelKind,
    pub hyperparams: Hyperparams,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            tick_s: 1.0,
            n_lags: 10,
            horizon: 10,
            history_window: 120,
            min_history: 20,
            model: ModelKind::RandomForest,
            hyperparams: Hyperparams::default(),
            aggregation: Aggregation::Min,
            seed: 42,
        }
    }
}

/// Owns the simulator. Every state change goes through `&mut self` and is
/// published on the bus before the call returns.
#[derive(Debug)]
pub struct Controller {
    sim: Simulator,
    store: Arc<TelemetryStore>,
    bus: Bus,
    flows: BTreeMap<FlowId, FlowEntry>,
    next_id: u64,
    config: ControllerConfig,
}

impl Controller {
    pub fn new(topo: Topology, config: ControllerConfig) -> Self {
        Self::with_store(topo, config, Arc::new(TelemetryStore::new()))
    }

    pub fn with_store(topo: Topology, config: ControllerConfig, store: Arc<TelemetryStore>) -> Self {
        Controller {
            sim: Simulator::new(topo),
            store,
            bus: Bus::new(),
            flows: BTreeMap::new(),
            next_id: 1,
            config,
        }
    }

    pub fn sim(&self) -> &Simulator {
        &self.sim
    }

    pub fn topology(&self) -> &Topology {
        self.sim.topology()
    }

    pub fn store(&self) -> &Arc<TelemetryStore> {
        &self.store
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn bus_mut(&mut self) -> &mut Bus {
        &mut self.bus
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowEntry> {
        self.flows.values()
    }

    pub fn flow(&self, id: FlowId) -> Result<&FlowEntry> {
        self.flows.get(&id).ok_or(ControllerError::UnknownFlow(id))
    }

    fn publish(&mut self, event: Event) -> u64 {
        self.bus.publish(self.sim.clock(), event)
    }

    /// Registers a pending flow and returns its id; allocation is a
    /// separate step.
    pub fn request_flow(&mut self, intent: FlowIntent) -> Result<FlowId> {
        if !(intent.demand_mbps > 0.0 && intent.demand_mbps.is_finite()) {
            return Err(ControllerError::InvalidIntent(format!(
                "demand {} must be positive",
                intent.demand_mbps
            )));
        }
        for host in [&intent.src, &intent.dst] {
            self.sim.host_edge(host)?;
            self.sim.host_addr(host)?;
        }
        if intent.src == intent.dst {
            return Err(ControllerError::InvalidIntent("source equals destination".into()));
        }
        let id = FlowId(self.next_id);
        if let Some(existing) = self.flows.values().find(|f| {
            matches!(f.state, FlowState::Pending | FlowState::Allocated)
                && f.intent.src == intent.src
                && f.intent.dst == intent.dst
                && f.intent.protocol == intent.protocol
                && f.intent.tos == intent.tos
        }) {
            return Err(ControllerError::DuplicateFlow {
                flow: id,
                existing: existing.id,
            });
        }
        self.next_id += 1;
        self.flows.insert(
            id,
            FlowEntry {
                id,
                intent: intent.clone(),
                state: FlowState::Pending,
                tunnel: None,
                reason: None,
            },
        );
        self.publish(Event::FlowRequested { flow: id, intent });
        Ok(id)
    }

    /// `request_flow` followed by `allocate_flow`.
    pub fn submit(&mut self, intent: FlowIntent) -> Result<(FlowId, AllocationRecord)> {
        let id = self.request_flow(intent)?;
        let record = self.allocate_flow(id)?;
        Ok((id, record))
    }

    fn edges(&self, intent: &FlowIntent) -> Result<(String, String)> {
        let nodes = self.sim.topology().nodes();
        let src = &nodes[self.sim.host_edge(&intent.src)?].label;
        let dst = &nodes[self.sim.host_edge(&intent.dst)?].label;
        Ok((src.clone(), dst.clone()))
    }

    /// Tunnels from the flow's ingress edge to its egress edge, by id.
    pub fn candidates(&self, id: FlowId) -> Result<Vec<u32>> {
        let (ingress, egress) = self.edges(&self.flow(id)?.intent)?;
        Ok(self
            .sim
            .topology()
            .tunnels()
            .filter(|t| t.ingress == ingress && t.egress == egress)
            .map(|t| t.id)
            .collect())
    }

    fn expect_state(&self, id: FlowId, expected: FlowState) -> Result<&FlowEntry> {
        let f = self.flow(id)?;
        if f.state != expected {
            return Err(ControllerError::InvalidState {
                flow: id,
                state: f.state,
                expected,
            });
        }
        Ok(f)
    }

    fn fail(&mut self, id: FlowId, reason: String) {
        if let Some(f) = self.flows.get_mut(&id) {
            f.state = FlowState::Failed;
            f.reason = Some(reason.clone());
        }
        self.publish(Event::FlowFailed { flow: id, reason });
    }

    /// Runs the allocation pipeline for a pending flow: telemetry query,
    /// forecasts, path selection, PBR install.
    pub fn allocate_flow(&mut self, id: FlowId) -> Result<AllocationRecord> {
        let intent = self.expect_state(id, FlowState::Pending)?.intent.clone();
        let candidates = self.candidates(id)?;
        if candidates.is_empty() {
            let (ingress, egress) = self.edges(&intent)?;
            let err = ControllerError::NoCandidates {
                flow: id,
                ingress,
                egress,
            };
            self.fail(id, err.to_string());
            return Err(err);
        }
        if let Some(t) = intent.tunnel.filter(|t| !candidates.contains(t)) {
            let err = ControllerError::NotCandidate { flow: id, tunnel: t };
            self.fail(id, err.to_string());
            return Err(err);
        }

        let keys: Vec<String> = candidates.iter().map(|t| bandwidth_key(*t)).collect();
        let forecasts = self.query_and_forecast(&[id], &keys)?;
        let cands = self.build_candidates(&candidates, &forecasts)?;

        let (tunnel, score, objective) = match intent.tunnel {
            Some(t) => (t, 0.0, intent.objective),
            None => {
                let objective = selection_objective(intent.objective)?;
                let sel = select_path_with(&cands, objective, self.config.aggregation)?;
                (sel.path, sel.score, objective)
            }
        };
        self.publish(Event::PathSelected {
            flow: id,
            objective,
            tunnel,
            score,
            pinned: intent.tunnel.is_some(),
            candidates: cands,
        });

        let (ingress, _) = self.edges(&intent)?;
        let rule = PbrRule {
            edge: ingress,
            name: format!("flow{}", id.0),
            matcher: self.matcher(&intent)?,
            tunnel_id: tunnel,
        };
        // rules left behind by stopped flows are simply replaced
        for other in self.flows.values().filter(|f| f.state == FlowState::Allocated) {
            if self.matcher(&other.intent)? == rule.matcher && self.edges(&other.intent)?.0 == rule.edge {
                let err = ControllerError::DuplicateFlow {
                    flow: id,
                    existing: other.id,
                };
                self.fail(id, err.to_string());
                return Err(err);
            }
        }
        let flow = Flow {
            id,
            src_host: intent.src.clone(),
            dst_host: intent.dst.clone(),
            protocol: intent.protocol,
            tos: intent.tos,
            demand_mbps: intent.demand_mbps,
            active: true,
        };
        self.sim.set_pbr(rule.clone())?;
        self.publish(Event::PbrInstalled { flow: id, rule });
        self.sim.add_flow(flow.clone())?;

        let record = AllocationRecord {
            flow: id,
            tunnel,
            objective,
            score,
            pinned: intent.tunnel.is_some(),
            fallback: forecasts.iter().any(PathForecast::is_fallback),
            forecasts,
        };
        let entry = self.flows.get_mut(&id).expect("checked above");
        entry.state = FlowState::Allocated;
        entry.tunnel = Some(tunnel);
        self.publish(Event::FlowAllocated {
            flow,
            record: record.clone(),
        });
        Ok(record)
    }

    fn matcher(&self, intent: &FlowIntent) -> Result<PbrMatch> {
        Ok(PbrMatch {
            src_net: self.sim.host_addr(&intent.src)?.trunc(),
            dst_addr: self.sim.host_addr(&intent.dst)?.addr(),
            protocol: intent.protocol,
            tos: intent.tos,
        })
    }

    /// Publishes the telemetry query and the forecasts for `keys`.
    fn query_and_forecast(&mut self, flows: &[FlowId], keys: &[String]) -> Result<Vec<PathForecast>> {
        let series = keys
            .iter()
            .map(|k| SeriesWindow {
                series: k.clone(),
                len: self.store.len(k).min(self.config.history_window),
            })
            .collect();
        self.publish(Event::TelemetryQueried {
            flows: flows.to_vec(),
            series,
        });
        let forecasts = keys
            .iter()
            .map(|k| self.forecast_series(k))
            .collect::<Result<Vec<_>>>()?;
        self.publish(Event::PredictionReady {
            flows: flows.to_vec(),
            forecasts: forecasts.clone(),
        });
        Ok(forecasts)
    }

    /// Forecast for one series; falls back to the latest sample when the
    /// history is too short, and to the static path capacity when empty.
    pub fn forecast_series(&self, key: &str) -> Result<PathForecast> {
        let cfg = &self.config;
        let available = self.store.len(key);
        if available >= cfg.min_history.max(cfg.n_lags + 2) {
            let history = self.store.window(key, available.min(cfg.history_window))?;
            let f = Forecaster::train(cfg.model, &history, cfg.n_lags, &cfg.hyperparams, cfg.seed);
            if let Ok(values) = f.and_then(|f| f.forecast(&history[history.len() - cfg.n_lags..], cfg.horizon)) {
                return Ok(PathForecast {
                    series: key.to_string(),
                    values,
                    source: ForecastSource::Model,
                });
            }
        }
        if available > 0 {
            let last = self.store.window(key, 1)?[0];
            return Ok(PathForecast {
                series: key.to_string(),
                values: vec![last; cfg.horizon],
                source: ForecastSource::LatestSample,
            });
        }
        let value = match parse_path_key(key) {
            Some(t) => {
                let topo = self.sim.topology();
                topo.bottleneck(topo.tunnel(t)?)?
            }
            None => 0.0,
        };
        Ok(PathForecast {
            series: key.to_string(),
            values: vec![value; cfg.horizon],
            source: ForecastSource::Static,
        })
    }

    fn latency(&self, tunnel: u32) -> Result<f64> {
        match self.store.window(&format!("path:{tunnel}:latency"), 1) {
            Ok(v) => Ok(v[0]),
            Err(_) => {
                let topo = self.sim.topology();
                Ok(topo.path_latency(topo.tunnel(tunnel)?)?)
            }
        }
    }

    fn build_candidates(&self, tunnels: &[u32], forecasts: &[PathForecast]) -> Result<Vec<Candidate>> {
        tunnels
            .iter()
            .map(|&t| {
                let key = bandwidth_key(t);
                let forecast = forecasts
                    .iter()
                    .find(|f| f.series == key)
                    .map(|f| f.values.clone())
                    .unwrap_or_default();
                Ok(Candidate {
                    path: t,
                    forecast,
                    latency_ms: self.latency(t)?,
                })
            })
            .collect()
    }

    /// Rebinds an allocated flow to another tunnel at the same edge with a
    /// single PBR update. Returns false if the flow was already there.
    pub fn migrate_flow(&mut self, id: FlowId, tunnel: u32) -> Result<bool> {
        let entry = self.expect_state(id, FlowState::Allocated)?;
        let from = entry.tunnel.expect("allocated flows have a tunnel");
        let intent = entry.intent.clone();
        let (ingress, _) = self.edges(&intent)?;
        let target = self.sim.topology().tunnel(tunnel)?;
        if target.ingress != ingress {
            return Err(NetsimError::ForeignTunnel {
                tunnel,
                edge: ingress,
            }
            .into());
        }
        if !self.candidates(id)?.contains(&tunnel) {
            return Err(ControllerError::NotCandidate { flow: id, tunnel });
        }
        if from == tunnel {
            return Ok(false);
        }
        let matcher = self.matcher(&intent)?;
        let rule = PbrRule {
            edge: ingress,
            name: format!("flow{}", id.0),
            matcher,
            tunnel_id: tunnel,
        };
        self.sim.set_pbr(rule.clone())?;
        self.flows.get_mut(&id).expect("checked").tunnel = Some(tunnel);
        self.publish(Event::FlowMigrated {
            flow: id,
            from,
            to: tunnel,
            rule,
        });
        Ok(true)
    }

    /// Re-plans the given allocated flows jointly.
    ///
    /// The flows are lifted off their tunnels: each candidate's predicted
    /// headroom is its bandwidth forecast plus the throughput forecasts of
    /// lifted flows currently on it. Flows then pick a tunnel in id order,
    /// each charging `min(demand, headroom)` against its choice, and flows
    /// whose choice differs are migrated.
    pub fn reallocate(&mut self, ids: &[FlowId], objective: Objective) -> Result<ReallocationReport> {
        let objective = selection_objective(objective)?;
        let mut ids = ids.to_vec();
        ids.sort();
        ids.dedup();
        let mut tunnels = Vec::new();
        for &id in &ids {
            self.expect_state(id, FlowState::Allocated)?;
            for t in self.candidates(id)? {
                if !tunnels.contains(&t) {
                    tunnels.push(t);
                }
            }
        }
        tunnels.sort_unstable();

        let mut keys: Vec<String> = tunnels.iter().map(|t| bandwidth_key(*t)).collect();
        keys.extend(ids.iter().map(|id| throughput_key(*id)));
        let forecasts = self.query_and_forecast(&ids, &keys)?;
        let find = |key: &str| -> Vec<f64> {
            forecasts
                .iter()
                .find(|f| f.series == key)
                .map(|f| f.values.clone())
                .unwrap_or_default()
        };

        let mut headroom: BTreeMap<u32, Vec<f64>> = tunnels.iter().map(|&t| (t, find(&bandwidth_key(t)))).collect();
        for &id in &ids {
            let on = self.flows[&id].tunnel.expect("allocated");
            if let Some(h) = headroom.get_mut(&on) {
                for (a, b) in h.iter_mut().zip(find(&throughput_key(id))) {
                    *a += b;
                }
            }
        }

        let mut decisions = Vec::new();
        let mut selections = Vec::new();
        for &id in &ids {
            let cand_ids = self.candidates(id)?;
            let mut cands = self.build_candidates(&cand_ids, &forecasts)?;
            for c in &mut cands {
                c.forecast = headroom[&c.path].clone();
            }
            let sel = select_path_with(&cands, objective, self.config.aggregation)?;
            let demand = self.flows[&id].intent.demand_mbps;
            let h = headroom.get_mut(&sel.path).expect("candidate");
            let charge = demand.min(self.config.aggregation.apply(h)).max(0.0);
            h.iter_mut().for_each(|v| *v = (*v - charge).max(0.0));
            decisions.push(Decision {
                flow: id,
                from: self.flows[&id].tunnel.expect("allocated"),
                to: sel.path,
                score: sel.score,
            });
            selections.push(Event::PathSelected {
                flow: id,
                objective,
                tunnel: sel.path,
                score: sel.score,
                pinned: false,
                candidates: cands,
            });
        }
        for e in selections {
            self.publish(e);
        }
        let mut migrations = 0;
        for d in &decisions {
            if self.migrate_flow(d.flow, d.to)? {
                migrations += 1;
            }
        }
        Ok(ReallocationReport {
            objective,
            decisions,
            forecasts,
            migrations,
        })
    }

    /// All allocated flows entering at `edge`.
    pub fn flows_at_edge(&self, edge: &str) -> Result<Vec<FlowId>> {
        let mut out = Vec::new();
        for f in self.flows.values().filter(|f| f.state == FlowState::Allocated) {
            if self.edges(&f.intent)?.0 == edge {
                out.push(f.id);
            }
        }
        Ok(out)
    }

    pub fn stop_flow(&mut self, id: FlowId) -> Result<()> {
        self.expect_state(id, FlowState::Allocated)?;
        self.sim.remove_flow(id)?;
        self.flows.get_mut(&id).expect("checked").state = FlowState::Stopped;
        self.publish(Event::FlowStopped { flow: id });
        Ok(())
    }

    /// Adds a tunnel over `core` between two edges.
    pub fn add_tunnel(&mut self, ingress: &str, egress: &str, core: &[&str]) -> Result<u32> {
        let tunnel = self.sim.add_tunnel(ingress, egress, core)?;
        let id = tunnel.id;
        self.publish(Event::TunnelAdded {
            tunnel: tunnel.to_doc(),
        });
        Ok(id)
    }

    /// Advances the simulation one tick and stores the samples.
    pub fn telemetry_tick(&mut self) -> Result<()> {
        let dt = self.config.tick_s;
        let samples = self.sim.advance(dt)?;
        let n = samples.len();
        self.store.append_all(samples)?;
        self.publish(Event::TelemetryTick {
            dt,
            clock: self.sim.clock(),
            samples: n,
        });
        Ok(())
    }

    pub fn run_ticks(&mut self, n: usize) -> Result<()> {
        for _ in 0..n {
            self.telemetry_tick()?;
        }
        Ok(())
    }

    pub fn render_edge_config(&self, edge: &str) -> Result<String> {
        Ok(render_edge_config(&self.sim, edge)?)
    }
}

fn selection_objective(objective: Objective) -> Result<Objective> {
    if objective.is_selection() {
        Ok(objective)
    } else {
        Err(OptimizerError::NotSelection(objective).into())
    }
}

pub fn bandwidth_key(tunnel: u32) -> String {
    format!("path:{tunnel}:bandwidth")
}

pub fn throughput_key(flow: FlowId) -> String {
    format!("flow:{flow}:throughput")
}

fn parse_path_key(key: &str) -> Option<u32> {
    key.strip_prefix("path:")?.split(':').next()?.parse().ok()
}

/// Applies the mutation events of `log` to a fresh simulator over `topo`.
pub fn replay(topo: Topology, log: &[BusMessage]) -> Result<Simulator> {
    let mut sim = Simulator::new(topo);
    let diverged = |seq: u64, reason: String| ControllerError::Replay { seq, reason };
    for msg in log {
        match &msg.event {
            Event::TelemetryTick { dt, clock, .. } => {
                sim.advance(*dt)?;
                if sim.clock() != *clock {
                    return Err(diverged(msg.seq, format!("clock {} vs {clock}", sim.clock())));
                }
            }
            Event::TunnelAdded { tunnel } => {
                let core: Vec<&str> = tunnel.path.iter().map(String::as_str).collect();
                let added = sim.add_tunnel(&tunnel.ingress, &tunnel.egress, &core)?;
                if added.to_doc() != *tunnel {
                    return Err(diverged(msg.seq, format!("tunnel {} differs", tunnel.id)));
                }
            }
            Event::PbrInstalled { rule, .. } | Event::FlowMigrated { rule, .. } => {
                sim.set_pbr(rule.clone())?;
            }
            Event::FlowAllocated { flow, .. } => sim.add_flow(flow.clone())?,
            Event::FlowStopped { flow } => {
                sim.remove_flow(*flow)?;
            }
            _ => {}
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests;
