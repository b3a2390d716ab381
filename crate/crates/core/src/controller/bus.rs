//! In-process message bus with a retained, replayable log.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AllocationRecord, FlowIntent, PathForecast};
use crate::netsim::{Flow, FlowId, PbrRule, TunnelDoc};
use crate::optimizer::{Candidate, Objective};

pub const TOPICS: [&str; 11] = [
    "flow.requested",
    "telemetry.tick",
    "telemetry.queried",
    "prediction.ready",
    "path.selected",
    "tunnel.added",
    "pbr.installed",
    "flow.allocated",
    "flow.migrated",
    "flow.failed",
    "flow.stopped",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topic", content = "payload")]
pub enum Event {
    #[serde(rename = "flow.requested")]
    FlowRequested { flow: FlowId, intent: FlowIntent },
    #[serde(rename = "telemetry.tick")]
    TelemetryTick { dt: f64, clock: f64, samples: usize },
    /// Windows pulled from the store for one allocation round.
    #[serde(rename = "telemetry.queried")]
    TelemetryQueried {
        flows: Vec<FlowId>,
        series: Vec<SeriesWindow>,
    },
    #[serde(rename = "prediction.ready")]
    PredictionReady {
        flows: Vec<FlowId>,
        forecasts: Vec<PathForecast>,
    },
    #[serde(rename = "path.selected")]
    PathSelected {
        flow: FlowId,
        objective: Objective,
        tunnel: u32,
        score: f64,
        pinned: bool,
        candidates: Vec<Candidate>,
    },
    #[serde(rename = "tunnel.added")]
    TunnelAdded { tunnel: TunnelDoc },
    #[serde(rename = "pbr.installed")]
    PbrInstalled { flow: FlowId, rule: PbrRule },
    #[serde(rename = "flow.allocated")]
    FlowAllocated { flow: Flow, record: AllocationRecord },
    #[serde(rename = "flow.migrated")]
    FlowMigrated {
        flow: FlowId,
        from: u32,
        to: u32,
        rule: PbrRule,
    },
    #[serde(rename = "flow.failed")]
    FlowFailed { flow: FlowId, reason: String },
    #[serde(rename = "flow.stopped")]
    FlowStopped { flow: FlowId },
}

impl Event {
    pub fn topic(&self) -> &'static str {
        match self {
            Event::FlowRequested { .. } => "flow.requested",
            Event::TelemetryTick { .. } => "telemetry.tick",
            Event::TelemetryQueried { .. } => "telemetry.queried",
            Event::PredictionReady { .. } => "prediction.ready",
            Event::PathSelected { .. } => "path.selected",
            Event::TunnelAdded { .. } => "tunnel.added",
            Event::PbrInstalled { .. } => "pbr.installed",
            Event::FlowAllocated { .. } => "flow.allocated",
            Event::FlowMigrated { .. } => "flow.migrated",
            Event::FlowFailed { .. } => "flow.failed",
            Event::FlowStopped { .. } => "flow.stopped",
        }
    }

    /// Events that change simulator state and must be replayed.
    pub fn is_mutation(&self) -> bool {
        matches!(
            self,
            Event::TelemetryTick { .. }
                | Event::TunnelAdded { .. }
                | Event::PbrInstalled { .. }
                | Event::FlowAllocated { .. }
                | Event::FlowMigrated { .. }
                | Event::FlowStopped { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWindow {
    pub series: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub schema_version: u32,
    pub seq: u64,
    /// Simulation clock when published, seconds.
    pub t: f64,
    #[serde(flatten)]
    pub event: Event,
}

impl BusMessage {
    pub fn topic(&self) -> &'static str {
        self.event.topic()
    }
}

type Subscriber = Box<dyn FnMut(&BusMessage) + Send>;

/// Single-writer bus: the controller publishes, subscribers are called
/// synchronously in publish order, and every message is kept in the log.
#[derive(Default)]
pub struct Bus {
    log: Vec<BusMessage>,
    subscribers: Vec<Subscriber>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus")
            .field("messages", &self.log.len())
            .field("subscribers", &self.subscribers.len())
            .finish()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&mut self, t: f64, event: Event) -> u64 {
        let seq = self.log.len() as u64 + 1;
        let msg = BusMessage {
            schema_version: crate::SCHEMA_VERSION,
            seq,
            t,
            event,
        };
        for s in &mut self.subscribers {
            s(&msg);
        }
        self.log.push(msg);
        seq
    }

    pub fn subscribe(&mut self, f: impl FnMut(&BusMessage) + Send + 'static) {
        self.subscribers.push(Box::new(f));
    }

    pub fn log(&self) -> &[BusMessage] {
        &self.log
    }

    pub fn last_seq(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn since(&self, seq: u64) -> &[BusMessage] {
        let start = (seq as usize).min(self.log.len());
        &self.log[start..]
    }

    pub fn write_ndjson<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_ndjson(&self.log, w)
    }
}

pub fn write_ndjson<W: Write>(log: &[BusMessage], mut w: W) -> std::io::Result<()> {
    for msg in log {
        serde_json::to_writer(&mut w, msg)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_ndjson<R: BufRead>(r: R) -> Result<Vec<BusMessage>, serde_json::Error> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(serde_json::Error::io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
