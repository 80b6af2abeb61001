//! Route-discovery packet types and per-node routing state: RREQ flooding
//! with duplicate suppression, reverse-path entries for the RREP, and the
//! forward log that probe answers report from.
//!
//! The dialect is deliberately small: no sequence numbers, no route
//! maintenance, one discovery round per (source, destination, request_id).
//! Only the discovery handshake is exercised.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::topology::NodeId;

/// Identifies one discovery round end to end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RouteKey {
    pub source: NodeId,
    pub destination: NodeId,
    pub request_id: u64,
}

impl fmt::Display for RouteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "src {} dst {} rid {}", self.source, self.destination, self.request_id)
    }
}

/// Flooded route request. `path_predecessor` is the node whose transmission
/// carried this copy; receivers store it as the reverse-path next hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RreqPacket {
    pub key: RouteKey,
    pub hop_count: u32,
    pub path_predecessor: NodeId,
}

/// Route reply, unicast backwards along stored reverse-path entries.
/// `forwarder` is the last hop that (apparently) sent it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RrepPacket {
    pub key: RouteKey,
    pub forwarder: NodeId,
}

/// Which route replies this node has sent or forwarded. Append-only within
/// a discovery round; entries are written when the reply is actually
/// emitted, so a reply suspended and then killed by a failed check leaves
/// no entry.
#[derive(Debug, Clone, Default)]
pub struct ForwardLog {
    entries: BTreeSet<RouteKey>,
}

impl ForwardLog {
    pub fn record(&mut self, key: RouteKey) {
        self.entries.insert(key);
    }

    pub fn has_forwarded(&self, key: &RouteKey) -> bool {
        self.entries.contains(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteKey> {
        self.entries.iter()
    }
}

/// First-arrival record for one (source, request_id) flood at one node.
/// Arrivals sharing the first timestamp compete on lowest predecessor id
/// until the same-time resolve event fires; later copies are duplicates.
#[derive(Debug, Clone)]
pub(crate) struct PendingRreq {
    pub time: f64,
    pub best_predecessor: NodeId,
    pub hop_count: u32,
    pub resolved: bool,
}

/// Per-node routing state, owned by the engine's event loop.
#[derive(Debug, Clone, Default)]
pub(crate) struct RoutingState {
    /// (source, request_id) -> first-arrival bookkeeping.
    pub rreq_first: BTreeMap<(NodeId, u64), PendingRreq>,
    /// Reverse-path entries: at most one per key, first RREQ wins.
    pub reverse: BTreeMap<RouteKey, NodeId>,
    /// Keys this destination has already replied to.
    pub replied: BTreeSet<(NodeId, u64)>,
    pub forward_log: ForwardLog,
}

impl RoutingState {
    /// Handles one RREQ arrival. Returns `true` when this is the first copy
    /// and the caller must schedule a same-time resolve event.
    pub fn note_rreq(&mut self, pkt: &RreqPacket, now: f64) -> RreqArrival {
        let flood = (pkt.key.source, pkt.key.request_id);
        match self.rreq_first.get_mut(&flood) {
            None => {
                self.rreq_first.insert(
                    flood,
                    PendingRreq {
                        time: now,
                        best_predecessor: pkt.path_predecessor,
                        hop_count: pkt.hop_count,
                        resolved: false,
                    },
                );
                RreqArrival::First
            }
            Some(p) if !p.resolved && p.time == now => {
                if pkt.path_predecessor < p.best_predecessor {
                    p.best_predecessor = pkt.path_predecessor;
                    p.hop_count = pkt.hop_count;
                }
                RreqArrival::SameTimeTie
            }
            Some(_) => RreqArrival::Duplicate,
        }
    }

    /// Marks a flood as handled without recording a reverse path, used by a
    /// tunnel exit that re-emits a request under its own identity.
    pub fn mark_seen(&mut self, source: NodeId, request_id: u64, now: f64) -> bool {
        let flood = (source, request_id);
        if self.rreq_first.contains_key(&flood) {
            return false;
        }
        self.rreq_first.insert(
            flood,
            PendingRreq {
                time: now,
                best_predecessor: source,
                hop_count: 0,
                resolved: true,
            },
        );
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RreqArrival {
    First,
    SameTimeTie,
    Duplicate,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(id: u32) -> NodeId {
        NodeId(id)
    }

    fn key() -> RouteKey {
        RouteKey {
            source: n(0),
            destination: n(9),
            request_id: 0,
        }
    }

    fn rreq(pred: u32, hops: u32) -> RreqPacket {
        RreqPacket {
            key: key(),
            hop_count: hops,
            path_predecessor: n(pred),
        }
    }

    #[test]
    fn first_copy_then_duplicates() {
        let mut st = RoutingState::default();
        assert_eq!(st.note_rreq(&rreq(3, 1), 0.01), RreqArrival::First);
        st.rreq_first.get_mut(&(n(0), 0)).unwrap().resolved = true;
        assert_eq!(st.note_rreq(&rreq(4, 1), 0.02), RreqArrival::Duplicate);
        assert_eq!(st.note_rreq(&rreq(2, 1), 0.02), RreqArrival::Duplicate);
    }

    #[test]
    fn same_time_tie_prefers_lowest_predecessor() {
        let mut st = RoutingState::default();
        st.note_rreq(&rreq(5, 2), 0.01);
        assert_eq!(st.note_rreq(&rreq(2, 3), 0.01), RreqArrival::SameTimeTie);
        assert_eq!(st.note_rreq(&rreq(7, 1), 0.01), RreqArrival::SameTimeTie);
        let p = &st.rreq_first[&(n(0), 0)];
        assert_eq!(p.best_predecessor, n(2));
        assert_eq!(p.hop_count, 3);
    }

    #[test]
    fn forward_log_is_keyed_by_full_triple() {
        let mut log = ForwardLog::default();
        log.record(key());
        assert!(log.has_forwarded(&key()));
        let other = RouteKey {
            request_id: 1,
            ..key()
        };
        assert!(!log.has_forwarded(&other));
    }
}
