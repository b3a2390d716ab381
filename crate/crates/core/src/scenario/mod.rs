//! Scripted experiments and their reports.
//!
//! A script is JSON data: a topology reference, a tick length and a list of
//! actions (`start_flow`, `advance`, `reallocate`, `migrate`, `stop_flow`).
//! Running it drives a [`Controller`] headlessly and produces a time-series
//! table, a summary with before/after metrics and the bus log.

mod route;
mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use route::{encode_route, forward_step, RouteError};
pub use train::{load_dataset, train_eval, write_train_outputs, Dataset, TrainOptions};

use crate::bundled::{self, LoadError};
use crate::controller::{Controller, ControllerConfig, ControllerError, Event, FlowIntent};
use crate::netsim::{FlowId, PbrRule, TunnelDoc};
use crate::optimizer::Objective;
use crate::telemetry::{TelemetryError, WideTable};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {name:?}; available: {available}")]
    UnknownScenario { name: String, available: String },
    #[error("invalid scenario script: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("action {index}: {reason}")]
    Invalid { index: usize, reason: String },
    #[error("action {index}: {source}")]
    Controller {
        index: usize,
        #[source]
        source: ControllerError,
    },
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    StartFlow {
        flow: String,
        src: String,
        dst: String,
        protocol: u8,
        #[serde(default)]
        tos: u8,
        demand_mbps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tunnel: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        objective: Option<Objective>,
    },
    Advance {
        seconds: f64,
    },
    /// Re-plans the named flows, or every flow entering at `edge`.
    Reallocate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        flows: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edge: Option<String>,
        objective: Objective,
    },
    Migrate {
        flow: String,
        tunnel: u32,
    },
    StopFlow {
        flow: String,
    },
}

/// Optional assertions checked against the summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_before_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_after_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_before_max_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_after_mbps: Option<f64>,
    /// Lower bound on the final aggregate, e.g. a testbed measurement the
    /// fluid result must not fall below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_after_min_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub migrations: Option<usize>,
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Bundled topology name or a file path.
    pub topology: String,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub actions: Vec<Action>,
    #[serde(default)]
    pub expect: Expectations,
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self> {
        let script: ScenarioScript = serde_json::from_str(text)?;
        script.validate()?;
        Ok(script)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let text = bundled::scenario_text(name).ok_or_else(|| ScenarioError::UnknownScenario {
            name: name.to_string(),
            available: bundled::scenario_names().join(", "),
        })?;
        Self::from_json(text)
    }

    /// A bundled scenario name or a path to a script file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        let path = Path::new(name_or_path);
        if path.is_file() {
            return Self::from_json(&fs::read_to_string(path)?);
        }
        Self::bundled(name_or_path)
    }

    /// Checks that every flow is started before it is referenced and that
    /// advances are whole multiples of the tick.
    pub fn validate(&self) -> Result<()> {
        let invalid = |index: usize, reason: String| ScenarioError::Invalid { index, reason };
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(invalid(0, format!("dt_s {} must be positive", self.dt_s)));
        }
        let mut started: Vec<&str> = Vec::new();
        for (i, action) in self.actions.iter().enumerate() {
            let known = |name: &str| -> Result<()> {
                if started.contains(&name) {
                    Ok(())
                } else {
                    Err(invalid(i, format!("flow {name:?} is not started before this action")))
                }
            };
            match action {
                Action::StartFlow { flow, .. } => {
                    if started.contains(&flow.as_str()) {
                        return Err(invalid(i, format!("flow {flow:?} started twice")));
                    }
                    started.push(flow);
                }
                Action::Advance { seconds } => {
                    self.ticks(*seconds).ok_or_else(|| {
                        invalid(i, format!("{seconds} s is not a positive multiple of dt_s {}", self.dt_s))
                    })?;
                }
                Action::Reallocate { flows, edge, .. } => match (flows, edge) {
                    (Some(names), None) => names.iter().try_for_each(|n| known(n))?,
                    (None, Some(_)) => {}
                    _ => return Err(invalid(i, "reallocate needs exactly one of `flows` or `edge`".into())),
                },
                Action::Migrate { flow, .. } | Action::StopFlow { flow } => known(flow)?,
            }
        }
        Ok(())
    }

    fn ticks(&self, seconds: f64) -> Option<usize> {
        let n = seconds / self.dt_s;
        (n >= 1.0 && (n - n.round()).abs() < 1e-9).then(|| n.round() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: f64,
    pub pass: bool,
}

/// Rule-level effect of one reallocate or migrate action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationCheck {
    pub action: usize,
    pub migrations: usize,
    /// PBR rules that differ before and after the action.
    pub rules_changed: usize,
    pub edges: Vec<String>,
    /// Each changed rule kept its match tuple and only swapped tunnel.
    pub match_preserved: bool,
    pub tunnels_changed: bool,
    pub minimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: String,
    pub topology: String,
    pub seed: u64,
    pub duration_s: f64,
    pub flows: BTreeMap<String, FlowId>,
    /// Clock at the first reallocate or migrate action.
    pub migration_time_s: Option<f64>,
    /// Highest tunnel latency among active flows, just before and at the end.
    pub latency_before_ms: f64,
    pub latency_after_ms: f64,
    pub throughput_before_mbps: f64,
    pub throughput_after_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_after_floor_mbps: Option<f64>,
    pub migrations: usize,
    pub migration_checks: Vec<MigrationCheck>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub timeseries: WideTable,
    pub controller: Controller,
}

#[derive(Debug, Clone, Copy)]
struct Snapshot {
    latency: f64,
    throughput: f64,
}

fn snapshot(c: &Controller) -> Result<Snapshot, ControllerError> {
    let alloc = c.sim().compute_allocations()?;
    let topo = c.topology();
    let mut latency: f64 = 0.0;
    for route in alloc.routes.values() {
        latency = latency.max(topo.path_latency(topo.tunnel(route.tunnel_id)?)?);
    }
    Ok(Snapshot {
        latency,
        throughput: alloc.total_mbps(),
    })
}

/// Runs `script` to completion with the default controller settings and
/// the given seed.
pub fn run_scenario(script: &ScenarioScript, seed: u64) -> Result<ScenarioRun> {
    script.validate()?;
    let topo = bundled::load_topology(&script.topology)?;
    let config = ControllerConfig {
        tick_s: script.dt_s,
        seed,
        ..ControllerConfig::default()
    };
    let mut c = Controller::new(topo, config);
    let mut names: BTreeMap<String, FlowId> = BTreeMap::new();
    let mut before: Option<Snapshot> = None;
    let mut migration_time = None;
    let mut migration_checks = Vec::new();

    for (index, action) in script.actions.iter().enumerate() {
        let ctl = |source: ControllerError| ScenarioError::Controller { index, source };
        let lookup = |n: &str| names.get(n).copied().ok_or_else(|| ScenarioError::Invalid {
            index,
            reason: format!("unknown flow {n:?}"),
        });
        match action {
            Action::StartFlow {
                flow,
                src,
                dst,
                protocol,
                tos,
                demand_mbps,
                tunnel,
                objective,
            } => {
                let mut intent = FlowIntent::new(src, dst, *protocol, *tos, *demand_mbps);
                intent.tunnel = *tunnel;
                if let Some(o) = objective {
                    intent.objective = *o;
                }
                let (id, _) = c.submit(intent).map_err(ctl)?;
                names.insert(flow.clone(), id);
            }
            Action::Advance { seconds } => {
                let n = script.ticks(*seconds).expect("validated");
                c.run_ticks(n).map_err(ctl)?;
            }
            Action::Reallocate { .. } | Action::Migrate { .. } => {
                if before.is_none() {
                    before = Some(snapshot(&c).map_err(ctl)?);
                    migration_time = Some(c.sim().clock());
                }
                let rules_before = c.sim().rules().to_vec();
                let tunnels_before: Vec<TunnelDoc> = c.topology().tunnels().map(|t| t.to_doc()).collect();
                let log_before = c.bus().log().len();
                match action {
                    Action::Reallocate { flows, edge, objective } => {
                        let ids = match (flows, edge) {
                            (Some(ns), _) => ns.iter().map(|n| lookup(n)).collect::<Result<Vec<_>>>()?,
                            (None, Some(e)) => c.flows_at_edge(e).map_err(ctl)?,
                            (None, None) => unreachable!("validated"),
                        };
                        c.reallocate(&ids, *objective).map_err(ctl)?;
                    }
                    Action::Migrate { flow, tunnel } => {
                        c.migrate_flow(lookup(flow)?, *tunnel).map_err(ctl)?;
                    }
                    _ => unreachable!(),
                }
                let migrated: Vec<&PbrRule> = c.bus().log()[log_before..]
                    .iter()
                    .filter_map(|m| match &m.event {
                        Event::FlowMigrated { rule, .. } => Some(rule),
                        _ => None,
                    })
                    .collect();
                let tunnels_after: Vec<TunnelDoc> = c.topology().tunnels().map(|t| t.to_doc()).collect();
                migration_checks.push(migration_check(
                    index,
                    &rules_before,
                    c.sim().rules(),
                    &migrated,
                    tunnels_before != tunnels_after,
                ));
            }
            Action::StopFlow { flow } => {
                c.stop_flow(lookup(flow)?).map_err(ctl)?;
            }
        }
    }

    let end = snapshot(&c).map_err(|source| ScenarioError::Controller {
        index: script.actions.len(),
        source,
    })?;
    let before = before.unwrap_or(end);
    let migrations = migration_checks.iter().map(|m| m.migrations).sum();
    let mut report = ScenarioReport {
        schema_version: crate::SCHEMA_VERSION,
        scenario: script.name.clone(),
        topology: c.topology().name.clone(),
        seed,
        duration_s: c.sim().clock(),
        flows: names.clone(),
        migration_time_s: migration_time,
        latency_before_ms: before.latency,
        latency_after_ms: end.latency,
        throughput_before_mbps: before.throughput,
        throughput_after_mbps: end.throughput,
        throughput_after_floor_mbps: script.expect.throughput_after_min_mbps,
        migrations,
        migration_checks,
        checks: Vec::new(),
        passed: true,
    };
    report.checks = checks(&script.expect, &report);
    report.passed = report.checks.iter().all(|c| c.pass);

    let timeseries = c.store().to_wide(&timeseries_keys(&c, &names));
    Ok(ScenarioRun {
        report,
        timeseries,
        controller: c,
    })
}

fn migration_check(
    action: usize,
    before: &[PbrRule],
    after: &[PbrRule],
    migrated: &[&PbrRule],
    tunnels_changed: bool,
) -> MigrationCheck {
    let changed: Vec<(&PbrRule, &PbrRule)> = before
        .iter()
        .filter_map(|old| {
            let new = after
                .iter()
                .find(|r| r.edge == old.edge && r.matcher == old.matcher)?;
            (new != old).then_some((old, new))
        })
        .collect();
    let match_preserved = before.len() == after.len()
        && changed.iter().all(|(o, n)| o.name == n.name && o.tunnel_id != n.tunnel_id);
    let mut edges: Vec<String> = changed.iter().map(|(o, _)| o.edge.clone()).collect();
    edges.dedup();
    let each_once = changed.len() == migrated.len()
        && changed.iter().all(|(_, n)| migrated.iter().filter(|m| **m == *n).count() == 1);
    MigrationCheck {
        action,
        migrations: migrated.len(),
        rules_changed: changed.len(),
        minimal: each_once && match_preserved && !tunnels_changed,
        edges,
        match_preserved,
        tunnels_changed,
    }
}

fn checks(expect: &Expectations, r: &ScenarioReport) -> Vec<Check> {
    const TOL: f64 = 1e-9;
    let mut out = Vec::new();
    let mut eq = |name: &str, want: Option<f64>, actual: f64| {
        if let Some(w) = want {
            out.push(Check {
                name: name.to_string(),
                expected: format!("= {w}"),
                actual,
                pass: (actual - w).abs() <= TOL,
            });
        }
    };
    eq("latency_before_ms", expect.latency_before_ms, r.latency_before_ms);
    eq("latency_after_ms", expect.latency_after_ms, r.latency_after_ms);
    eq("throughput_after_mbps", expect.throughput_after_mbps, r.throughput_after_mbps);
    eq("migrations", expect.migrations.map(|m| m as f64), r.migrations as f64);
    if let Some(max) = expect.throughput_before_max_mbps {
        out.push(Check {
            name: "throughput_before_mbps".into(),
            expected: format!("<= {max}"),
            actual: r.throughput_before_mbps,
            pass: r.throughput_before_mbps <= max + TOL,
        });
    }
    if let Some(min) = expect.throughput_after_min_mbps {
        out.push(Check {
            name: "throughput_after_floor_mbps".into(),
            expected: format!(">= {min}"),
            actual: r.throughput_after_mbps,
            pass: r.throughput_after_mbps >= min - TOL,
        });
    }
    for m in &r.migration_checks {
        out.push(Check {
            name: format!("migration_minimal[{}]", m.action),
            expected: "one rule per migration, match unchanged, no tunnel edits".into(),
            actual: m.rules_changed as f64,
            pass: m.minimal,
        });
    }
    out
}

fn timeseries_keys(c: &Controller, names: &BTreeMap<String, FlowId>) -> Vec<String> {
    let mut ids: Vec<FlowId> = names.values().copied().collect();
    ids.sort();
    let mut keys = Vec::new();
    for id in ids {
        keys.push(format!("flow:{id}:throughput"));
        keys.push(format!("flow:{id}:tunnel"));
    }
    for t in c.topology().tunnels() {
        keys.push(format!("path:{}:latency", t.id));
        keys.push(format!("path:{}:throughput", t.id));
        keys.push(format!("path:{}:bandwidth", t.id));
    }
    keys
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: String,
    pub name: String,
    pub seed: u64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("manifest.json"), to_json_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub(crate) fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Writes `timeseries.csv`, `summary.json`, `bus.ndjson` and
/// `manifest.json` into `dir`, creating it if needed.
pub fn write_scenario_outputs(run: &ScenarioRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    run.timeseries
        .write_csv(fs::File::create(dir.join("timeseries.csv"))?)?;
    fs::write(dir.join("summary.json"), to_json_pretty(&run.report)? + "\n")?;
    run.controller
        .bus()
        .write_ndjson(std::io::BufWriter::new(fs::File::create(dir.join("bus.ndjson"))?))?;
    Manifest {
        schema_version: crate::SCHEMA_VERSION,
        kind: "scenario".into(),
        name: run.report.scenario.clone(),
        seed: run.report.seed,
        files: vec!["timeseries.csv".into(), "summary.json".into(), "bus.ndjson".into()],
    }
    .write(dir)
}

/// Human-readable summary lines.
pub fn describe(report: &ScenarioReport) -> String {
    let mut s = format!(
        "scenario {} on {} (seed {}, {} s simulated)\n",
        report.scenario, report.topology, report.seed, report.duration_s
    );
    s += &format!(
        "  latency     before {:>8.3} ms   after {:>8.3} ms\n",
        report.latency_before_ms, report.latency_after_ms
    );
    s += &format!(
        "  throughput  before {:>8.3} Mbps after {:>8.3} Mbps (fluid model)\n",
        report.throughput_before_mbps, report.throughput_after_mbps
    );
    if let Some(floor) = report.throughput_after_floor_mbps {
        s += &format!("  testbed reference after migration: {floor} Mbps\n");
    }
    s += &format!("  migrations  {}\n", report.migrations);
    for c in &report.checks {
        s += &format!(
            "  [{}] {} expected {} actual {}\n",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.expected,
            c.actual
        );
    }
    s
}
