//! Route identifiers against a topology's node labels.

use thiserror::Error;

use crate::gf2poly::{Gf2Error, Gf2Poly};
use crate::netsim::{NetsimError, Topology};
use crate::polka::{self, PolkaError, PortId, RouteId};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error(transparent)]
    Spec(#[from] PolkaError),
    #[error(transparent)]
    Topology(#[from] NetsimError),
    #[error("invalid route identifier: {0}")]
    RouteId(#[from] Gf2Error),
}

/// Encodes a `label:port,label:port,...` spec using the topology's node
/// identifiers.
pub fn encode_route(topo: &Topology, spec: &str) -> Result<RouteId, RouteError> {
    let hops = polka::parse_route_spec(spec)?
        .into_iter()
        .map(|h| Ok((topo.node_id(&h.label)?.clone(), h.port)))
        .collect::<Result<Vec<_>, RouteError>>()?;
    Ok(polka::route_id_for_path(&hops)?)
}

/// Output port at `node` for a route given in binary (MSB first).
pub fn forward_step(topo: &Topology, route_bits: &str, node: &str) -> Result<PortId, RouteError> {
    let route = RouteId(Gf2Poly::from_binary_str(route_bits)?);
    Ok(polka::forward(route, topo.node_id(node)?))
}
