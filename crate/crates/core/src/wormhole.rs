//! Out-of-band wormhole links between two colluding endpoints.
//!
//! Only the out-of-band-channel wormhole is modeled: a dedicated tunnel,
//! invisible to the routed topology, that re-emits captured traffic at the
//! far end. Three endpoint behaviors are supported:
//!
//! * `HiddenPassive` - route traffic crosses the tunnel with the original
//!   forwarder identity preserved and hop counts frozen, so distant nodes
//!   become fake neighbors. Probe and ack traffic is silently dropped and
//!   the endpoints never answer or relay probes.
//! * `ExposedPassive` - the tunnel exit re-emits under its own identity
//!   (the near end stays a visible, apparently cooperative node). Probes
//!   reaching an endpoint cross the tunnel and the far end answers them
//!   honestly under its own identity. Nothing is altered in transit. An
//!   open wormhole (both ends visible) behaves identically for the check
//!   logic and is subsumed by this mode.
//! * `HiddenActive` - route traffic behaves as in `HiddenPassive`, but the
//!   endpoints participate in probe relaying and flip exactly one relayed
//!   answer tag from 0 to 1 per check (lowest responder id first), trying
//!   to fake a plausible forwarder.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::routing::RouteKey;
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WormholeMode {
    HiddenPassive,
    ExposedPassive,
    HiddenActive,
}

impl WormholeMode {
    pub fn is_hidden(self) -> bool {
        matches!(self, WormholeMode::HiddenPassive | WormholeMode::HiddenActive)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WormholeMode::HiddenPassive => "hidden_passive",
            WormholeMode::ExposedPassive => "exposed_passive",
            WormholeMode::HiddenActive => "hidden_active",
        }
    }
}

impl fmt::Display for WormholeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WormholeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hidden_passive" => Ok(WormholeMode::HiddenPassive),
            "exposed_passive" => Ok(WormholeMode::ExposedPassive),
            "hidden_active" => Ok(WormholeMode::HiddenActive),
            other => Err(format!(
                "unknown wormhole mode `{other}` (expected hidden_passive, exposed_passive or hidden_active)"
            )),
        }
    }
}

/// One tunnel between two colluding endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WormholeLink {
    pub end_a: NodeId,
    pub end_b: NodeId,
    pub mode: WormholeMode,
    /// Tunnel crossing delay in time units. 0 by default: an out-of-band
    /// channel beats any multi-hop path, so the wormhole wins first-arrival
    /// races outright.
    pub tunnel_delay: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum WormholeError {
    #[error("wormhole endpoint {0} does not exist in the topology")]
    UnknownEndpoint(NodeId),
    #[error("wormhole endpoints must differ, got {0} twice")]
    SameEndpoint(NodeId),
    #[error("wormhole between one-hop neighbors {0} and {1} is vacuous")]
    AdjacentEndpoints(NodeId, NodeId),
    #[error("node {0} is an endpoint of more than one wormhole")]
    OverlappingEndpoints(NodeId),
    #[error("wormhole tunnel delay must be finite and non-negative, got {0}")]
    BadDelay(f64),
}

impl WormholeLink {
    pub fn new(end_a: NodeId, end_b: NodeId, mode: WormholeMode) -> Self {
        WormholeLink {
            end_a,
            end_b,
            mode,
            tunnel_delay: 0.0,
        }
    }

    pub fn validate(&self, topo: &Topology) -> Result<(), WormholeError> {
        if self.end_a == self.end_b {
            return Err(WormholeError::SameEndpoint(self.end_a));
        }
        for end in [self.end_a, self.end_b] {
            if !topo.contains(end) {
                return Err(WormholeError::UnknownEndpoint(end));
            }
        }
        if topo.are_neighbors(self.end_a, self.end_b) {
            return Err(WormholeError::AdjacentEndpoints(self.end_a, self.end_b));
        }
        if !(self.tunnel_delay >= 0.0 && self.tunnel_delay.is_finite()) {
            return Err(WormholeError::BadDelay(self.tunnel_delay));
        }
        Ok(())
    }

    pub fn peer_of(&self, end: NodeId) -> Option<NodeId> {
        if end == self.end_a {
            Some(self.end_b)
        } else if end == self.end_b {
            Some(self.end_a)
        } else {
            None
        }
    }
}

/// Mutable per-endpoint attack state, owned by the engine.
#[derive(Debug, Clone)]
pub(crate) struct EndpointState {
    pub peer: NodeId,
    pub mode: WormholeMode,
    pub tunnel_delay: f64,
    /// Fingerprints of packets already tunneled, so relay loops between
    /// multiple wormholes terminate.
    pub tunneled: BTreeSet<String>,
    /// Checks for which this endpoint already spent its single tag flip.
    pub flipped: BTreeSet<(NodeId, RouteKey)>,
    /// Acks buffered for the same-time relay flush (HiddenActive).
    pub ack_buffer: Vec<crate::prevention::ProbeAck>,
}

impl EndpointState {
    pub fn new(peer: NodeId, mode: WormholeMode, tunnel_delay: f64) -> Self {
        EndpointState {
            peer,
            mode,
            tunnel_delay,
            tunneled: BTreeSet::new(),
            flipped: BTreeSet::new(),
            ack_buffer: Vec::new(),
        }
    }
}

/// Resolves the configured links into per-endpoint states, validating each
/// link against the honest topology. A node may serve at most one tunnel.
pub(crate) fn resolve_endpoints(
    topo: &Topology,
    links: &[WormholeLink],
) -> Result<BTreeMap<NodeId, EndpointState>, WormholeError> {
    let mut endpoints = BTreeMap::new();
    for link in links {
        link.validate(topo)?;
        for (end, peer) in [(link.end_a, link.end_b), (link.end_b, link.end_a)] {
            if endpoints
                .insert(end, EndpointState::new(peer, link.mode, link.tunnel_delay))
                .is_some()
            {
                return Err(WormholeError::OverlappingEndpoints(end));
            }
        }
    }
    Ok(endpoints)
}
