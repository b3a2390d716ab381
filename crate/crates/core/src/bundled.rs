//! Topologies and scenario scripts shipped with the crate.

use std::path::Path;

use crate::netsim::{NetsimError, Topology};

const TOPOLOGIES: &[(&str, &str)] = &[
    ("p4lab.topo", include_str!("../data/p4lab.topo")),
    ("demo3.topo", include_str!("../data/demo3.topo")),
    ("two_path.topo", include_str!("../data/two_path.topo")),
];

const SCENARIOS: &[(&str, &str)] = &[
    ("latency_migration", include_str!("../scenarios/latency_migration.json")),
    ("flow_aggregation", include_str!("../scenarios/flow_aggregation.json")),
];

pub fn topology_text(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".topo").unwrap_or(name);
    TOPOLOGIES
        .iter()
        .find(|(n, _)| n.strip_suffix(".topo") == Some(name))
        .map(|(_, text)| *text)
}

pub fn topology_names() -> Vec<&'static str> {
    TOPOLOGIES.iter().map(|(n, _)| *n).collect()
}

pub fn scenario_text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn scenario_names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|(n, _)| *n).collect()
}

/// Loads a topology from a file path, falling back to a bundled name.
pub fn load_topology(name_or_path: &str) -> Result<Topology, LoadError> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(Topology::from_json(&text)?);
    }
    match topology_text(name_or_path) {
        Some(text) => Ok(Topology::from_json(text)?),
        None => Err(LoadError::NotFound {
            name: name_or_path.to_string(),
            available: topology_names().join(", "),
        }),
    }
}

pub fn p4lab() -> Topology {
    Topology::from_json(include_str!("../data/p4lab.topo")).expect("bundled p4lab.topo is valid")
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("no file or bundled topology named {name:?} (bundled: {available})")]
    NotFound { name: String, available: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Topology(#[from] NetsimError),
}
