//! PolKA route identifiers.
//!
//! Every core node owns an irreducible polynomial (its node identifier).
//! A path is a list of `(node, output port)` hops; its route identifier is
//! the unique polynomial, of degree below the sum of the node degrees, whose
//! remainder modulo each node identifier is that hop's port polynomial. Core
//! nodes forward by computing one remainder and never rewrite the label.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2poly::{self, Degree, Gf2Error, Gf2Poly};

/// Upper bound on node identifier degree accepted by [`gen_node_ids`].
pub const MAX_NODE_ID_DEGREE: u32 = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolkaError {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error("node {label}: identifier {poly} is not irreducible")]
    Reducible { label: String, poly: Gf2Poly },
    #[error("node {label}: identifier degree {degree} exceeds {max}")]
    NodeDegreeTooLarge { label: String, degree: u32, max: u32 },
    #[error("port {port} does not fit below node {label} (identifier degree {degree})")]
    PortTooLarge { label: String, port: u64, degree: u32 },
    #[error("negative port number {0}")]
    NegativePort(i64),
    #[error("port polynomial {0} is wider than 64 bits")]
    PortOverflow(Gf2Poly),
    #[error("only {found} irreducible polynomials of degree <= {max_degree} admit {max_port} ports; {wanted} requested")]
    NotEnoughIdentifiers {
        wanted: usize,
        found: usize,
        max_port: u64,
        max_degree: u32,
    },
    #[error("route spec {input:?}, byte {position}: {reason}")]
    RouteSpec {
        input: String,
        position: usize,
        reason: String,
    },
    #[error("empty path")]
    EmptyPath,
}

pub type Result<T> = std::result::Result<T, PolkaError>;

/// A core node's label and irreducible identifier polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub label: String,
    pub poly: Gf2Poly,
}

impl NodeId {
    pub fn new(label: impl Into<String>, poly: Gf2Poly) -> Result<Self> {
        let label = label.into();
        if !poly.is_irreducible()? {
            return Err(PolkaError::Reducible { label, poly });
        }
        let degree = poly.degree().finite().unwrap_or(0);
        if degree > 64 {
            return Err(PolkaError::NodeDegreeTooLarge { label, degree, max: 64 });
        }
        Ok(NodeId { label, poly })
    }

    pub fn degree(&self) -> u32 {
        self.poly.degree().finite().expect("node identifiers are non-constant")
    }

    /// Largest port number whose polynomial reduces below this identifier.
    pub fn max_port(&self) -> u64 {
        let d = self.degree();
        if d >= 64 {
            u64::MAX
        } else {
            (1u64 << d) - 1
        }
    }
}

/// An output port: the number and its binary-expansion polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortId(u64);

impl PortId {
    /// Port 0: deliver locally / end of tunnel.
    pub const LOCAL: PortId = PortId(0);

    pub const fn new(number: u64) -> Self {
        PortId(number)
    }

    pub const fn number(self) -> u64 {
        self.0
    }

    pub fn poly(self) -> Gf2Poly {
        encode_port(self.0)
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn encode_port(number: u64) -> Gf2Poly {
    Gf2Poly::from_bits(number as u128)
}

/// Checked form of [`encode_port`] for signed input (CLI and documents).
pub fn encode_port_signed(number: i64) -> Result<PortId> {
    u64::try_from(number)
        .map(PortId)
        .map_err(|_| PolkaError::NegativePort(number))
}

pub fn decode_port(poly: Gf2Poly) -> Result<u64> {
    u64::try_from(poly.bits()).map_err(|_| PolkaError::PortOverflow(poly))
}

/// A route label. Printed MSB-first in binary, e.g. `10000`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouteId(pub Gf2Poly);

impl RouteId {
    pub fn poly(self) -> Gf2Poly {
        self.0
    }
}

impl fmt::Display for RouteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_binary_string())
    }
}

/// Generates `count` node identifiers able to address ports `0..=max_port`.
///
/// Irreducibles are taken in ascending degree, then ascending binary value,
/// skipping any with `2^deg <= max_port`. The polynomial `t` is skipped: its
/// remainder is just the low bit of the label. Labels are `s1`, `s2`, ...
pub fn gen_node_ids(count: usize, max_port: u64) -> Result<Vec<NodeId>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    for bits in 3u128..(1u128 << (MAX_NODE_ID_DEGREE + 1)) {
        // constant term must be 1
        if bits & 1 == 0 {
            continue;
        }
        let poly = Gf2Poly::from_bits(bits);
        let Degree::Finite(d) = poly.degree() else { continue };
        if d < 64 && (1u64 << d) <= max_port {
            continue;
        }
        if poly.is_irreducible()? {
            out.push(NodeId {
                label: format!("s{}", out.len() + 1),
                poly,
            });
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(PolkaError::NotEnoughIdentifiers {
        wanted: count,
        found: out.len(),
        max_port,
        max_degree: MAX_NODE_ID_DEGREE,
    })
}

/// Compiles an explicit path into its route identifier via the polynomial CRT.
pub fn route_id_for_path(hops: &[(NodeId, PortId)]) -> Result<RouteId> {
    if hops.is_empty() {
        return Err(PolkaError::EmptyPath);
    }
    let mut system = Vec::with_capacity(hops.len());
    for (node, port) in hops {
        if port.number() > node.max_port() {
            return Err(PolkaError::PortTooLarge {
                label: node.label.clone(),
                port: port.number(),
                degree: node.degree(),
            });
        }
        system.push((port.poly(), node.poly));
    }
    Ok(RouteId(gf2poly::crt(&system)?))
}

/// Output port chosen by `node` for a packet carrying `route`.
pub fn forward(route: RouteId, node: &NodeId) -> PortId {
    let rem = route.0.rem(node.poly).expect("node identifiers are nonzero");
    // deg(rem) < deg(node) <= 64
    PortId(decode_port(rem).expect("remainder below a degree <= 64 modulus"))
}

pub fn verify_path(route: RouteId, hops: &[(NodeId, PortId)]) -> bool {
    hops.iter().all(|(node, port)| forward(route, node) == *port)
}

/// A parsed `NODE:port` element of a textual route spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopSpec {
    pub label: String,
    pub port: PortId,
    /// Byte offset of the element in the original spec.
    pub position: usize,
}

/// Parses `"NODE:port,NODE:port,..."`.
pub fn parse_route_spec(input: &str) -> Result<Vec<HopSpec>> {
    let err = |position: usize, reason: &str| PolkaError::RouteSpec {
        input: input.to_string(),
        position,
        reason: reason.to_string(),
    };
    if input.trim().is_empty() {
        return Err(err(0, "empty route"));
    }
    let mut hops = Vec::new();
    let mut offset = 0usize;
    for part in input.split(',') {
        let lead = part.len() - part.trim_start().len();
        let start = offset + lead;
        offset += part.len() + 1;
        let item = part.trim();
        let Some((label, port)) = item.split_once(':') else {
            return Err(err(start, "expected NODE:port"));
        };
        let label = label.trim();
        if label.is_empty() {
            return Err(err(start, "missing node label"));
        }
        let port_pos = start + item.find(':').unwrap_or(0) + 1;
        let number: i64 = port
            .trim()
            .parse()
            .map_err(|_| err(port_pos, "port is not an integer"))?;
        let port = encode_port_signed(number).map_err(|_| err(port_pos, "negative port"))?;
        hops.push(HopSpec {
            label: label.to_string(),
            port,
            position: start,
        });
    }
    Ok(hops)
}
