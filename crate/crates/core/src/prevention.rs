//! The probe/ack validity check that gates RREP forwarding.
//!
//! A node that receives a route reply from anyone but the destination
//! suspends it and asks its two-hop neighborhood "did you send or forward
//! this reply?" via a ttl-2 probe flood. One-hop neighbors relay the probe
//! outward and carry the tagged answers back, which gives every answer a
//! (responder, relay) provenance. The verdict over the collected answer set
//! decides whether the suspended reply is released or killed:
//!
//! * no responder tagged 1 - nobody nearby actually forwarded the reply, so
//!   it must have entered the neighborhood through a tunnel;
//! * exactly one tagged 1 - plausible, but only if the local key recomputed
//!   over the observed responder ids matches the provisioned key (a foreign
//!   responder, or a missing legitimate one, breaks the match);
//! * more than one tagged 1 - inconsistent with a single reply path;
//! * the same responder tagged differently via different relays - some
//!   relay altered a tag in transit.
//!
//! Responders whose answer arrived through a single relay are reported as
//! diagnostics: for those, in-transit tampering cannot be cross-checked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::keying::{derive_local_key, KeyTable};
use crate::routing::{ForwardLog, RouteKey, RrepPacket};
use crate::topology::NodeId;

/// Check-phase query, flooded with ttl 2 from the checking node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProbeMsg {
    pub origin: NodeId,
    pub key: RouteKey,
    pub ttl: u8,
}

/// Tagged answer from a two-hop responder, routed back through the relay
/// that delivered the probe copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProbeAck {
    pub responder: NodeId,
    pub tag: u8,
    pub relay: NodeId,
    pub origin: NodeId,
    pub key: RouteKey,
}

/// Computes a responder's answer to a probe: tag 1 iff its forward log has
/// the probed (source, destination, request_id) triple.
pub fn answer_probe(
    responder: NodeId,
    log: &ForwardLog,
    probe: &ProbeMsg,
    relay: NodeId,
) -> ProbeAck {
    ProbeAck {
        responder,
        tag: log.has_forwarded(&probe.key) as u8,
        relay,
        origin: probe.origin,
        key: probe.key,
    }
}

/// Answers collected during one check window, keyed responder -> set of
/// (relay, tag) pairs. Identical (responder, relay, tag) duplicates
/// collapse; differing tags for one responder are retained per relay.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AckSet {
    entries: BTreeMap<NodeId, BTreeSet<(NodeId, u8)>>,
}

impl AckSet {
    pub fn insert(&mut self, responder: NodeId, relay: NodeId, tag: u8) {
        self.entries.entry(responder).or_default().insert((relay, tag));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn responders(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.keys().copied()
    }

    pub fn relays_of(&self, responder: NodeId) -> BTreeSet<NodeId> {
        self.entries
            .get(&responder)
            .map(|s| s.iter().map(|&(relay, _)| relay).collect())
            .unwrap_or_default()
    }

    /// The responder's tag when all relays agree, `None` on disagreement.
    pub fn consistent_tag(&self, responder: NodeId) -> Option<u8> {
        let tags: BTreeSet<u8> = self.entries[&responder].iter().map(|&(_, t)| t).collect();
        (tags.len() == 1).then(|| tags.into_iter().next().unwrap())
    }

    /// Responders whose answers all came through exactly one relay: the
    /// cases where a tag alteration cannot be cross-checked.
    pub fn single_relay_responders(&self) -> BTreeSet<NodeId> {
        self.entries
            .iter()
            .filter(|(_, pairs)| {
                let relays: BTreeSet<NodeId> = pairs.iter().map(|&(r, _)| r).collect();
                relays.len() == 1
            })
            .map(|(&r, _)| r)
            .collect()
    }

    /// Compact rendering for traces and verdict records:
    /// `responder:relay=tag,relay=tag ...`.
    pub fn summary(&self) -> String {
        if self.entries.is_empty() {
            return "-".to_string();
        }
        self.entries
            .iter()
            .map(|(resp, pairs)| {
                let inner: Vec<String> = pairs
                    .iter()
                    .map(|(relay, tag)| format!("{relay}={tag}"))
                    .collect();
                format!("{resp}:{}", inner.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VerdictKind {
    Valid,
    IllegalNoForwarder,
    IllegalKeyMismatch,
    IllegalTagConflict,
    IllegalMultipleForwarders,
}

impl VerdictKind {
    pub fn is_illegal(self) -> bool {
        self != VerdictKind::Valid
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Valid => "Valid",
            VerdictKind::IllegalNoForwarder => "IllegalNoForwarder",
            VerdictKind::IllegalKeyMismatch => "IllegalKeyMismatch",
            VerdictKind::IllegalTagConflict => "IllegalTagConflict",
            VerdictKind::IllegalMultipleForwarders => "IllegalMultipleForwarders",
        }
    }
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one check. Exactly one kind per evaluation; the single-relay
/// responder set is diagnostic only and never changes the kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub single_relay_responders: BTreeSet<NodeId>,
}

/// Evaluates a closed collection window. Pure in (acks, node's keys): the
/// same inputs always give the same verdict, regardless of when or how
/// slowly the answers arrived.
///
/// Order of rules: a tag disagreement across relays is checked first so a
/// tampered tag can never launder itself into a plausible sum; then the tag
/// sum decides, with the sum-1 case additionally requiring the local key
/// recomputed over ALL observed responders to equal the provisioned key.
///
/// Panics if `node` was never provisioned; the engine only checks at
/// provisioned nodes.
pub fn evaluate(node: NodeId, acks: &AckSet, keys: &KeyTable) -> Verdict {
    let master = keys
        .master(node)
        .unwrap_or_else(|| panic!("node {node} missing from key table"));
    let kmu = keys.provisioned(node).unwrap();
    let single_relay_responders = acks.single_relay_responders();

    let mut tag_sum: u32 = 0;
    for responder in acks.responders() {
        match acks.consistent_tag(responder) {
            None => {
                return Verdict {
                    kind: VerdictKind::IllegalTagConflict,
                    single_relay_responders,
                }
            }
            Some(tag) => tag_sum += u32::from(tag),
        }
    }

    let kind = match tag_sum {
        0 => VerdictKind::IllegalNoForwarder,
        1 => {
            let lk = derive_local_key(master, acks.responders());
            if lk == kmu {
                VerdictKind::Valid
            } else {
                VerdictKind::IllegalKeyMismatch
            }
        }
        _ => VerdictKind::IllegalMultipleForwarders,
    };
    Verdict {
        kind,
        single_relay_responders,
    }
}

/// State of one in-flight check at one node: the suspended reply, the
/// answers collected so far, and when the probe went out.
#[derive(Debug, Clone)]
pub(crate) struct CheckState {
    pub rrep: RrepPacket,
    pub acks: AckSet,
    pub probe_time: f64,
    pub last_ack_time: Option<f64>,
}

impl CheckState {
    pub fn new(rrep: RrepPacket, probe_time: f64) -> Self {
        CheckState {
            rrep,
            acks: AckSet::default(),
            probe_time,
            last_ack_time: None,
        }
    }

    /// Collection time: probe broadcast to last answer, 0 when nothing came.
    pub fn collection_time(&self) -> f64 {
        self.last_ack_time.map_or(0.0, |t| t - self.probe_time)
    }
}
