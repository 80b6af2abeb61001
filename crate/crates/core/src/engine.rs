//! Deterministic discrete-event engine: event queue, radio delivery model,
//! wormhole tunneling, the route-discovery and check-phase handlers, energy
//! accounting and metrics collection.
//!
//! Determinism: events are executed in (time, insertion order) order, all
//! iteration is over ordered maps, and every random draw (placement, key
//! generation, attack placement, loss) comes from a seeded stream. The same
//! scenario therefore produces byte-identical traces and metrics on every
//! run and platform.
//!
//! The only zero-delay edges in the event graph are tunnel crossings, and
//! those terminate at wormhole endpoints; every delivery to an honest node
//! costs one `hop_delay`. Same-time RREQ arrivals at a node are therefore
//! all enqueued before any of that node's same-time events execute, which
//! is what makes the lowest-predecessor tie-break exact.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::keying::{generate_masters, provision, KeyTable, KeyingError};
use crate::metrics::{EnergyLedger, Metrics, Outcome, VerdictRecord};
use crate::prevention::{answer_probe, evaluate, CheckState, ProbeAck, ProbeMsg, VerdictKind};
use crate::routing::{RouteKey, RoutingState, RreqArrival, RreqPacket, RrepPacket};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::topology::{NodeId, Topology, TopologyError};
use crate::trace::{EventKind, Trace};
use crate::wormhole::{resolve_endpoints, EndpointState, WormholeError, WormholeLink, WormholeMode};

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Keying(#[from] KeyingError),
    #[error(transparent)]
    Wormhole(#[from] WormholeError),
    #[error("field `source`: node {0} not in topology")]
    UnknownSource(NodeId),
    #[error("field `destination`: node {0} not in topology")]
    UnknownDestination(NodeId),
    #[error("node {0} cannot be both a flow terminal and a wormhole endpoint")]
    TerminalEndpoint(NodeId),
    #[error("unresolved topology file reference `{0}`: load it into placements first")]
    UnresolvedTopologyFile(String),
    #[error("comparison configs must differ only in prevention_enabled")]
    ComparisonMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Packet {
    Rreq(RreqPacket),
    Rrep(RrepPacket),
    Probe(ProbeMsg),
    Ack(ProbeAck),
}

impl Packet {
    fn kind_name(&self) -> &'static str {
        match self {
            Packet::Rreq(_) => "rreq",
            Packet::Rrep(_) => "rrep",
            Packet::Probe(_) => "probe",
            Packet::Ack(_) => "ack",
        }
    }

    fn key(&self) -> RouteKey {
        match self {
            Packet::Rreq(p) => p.key,
            Packet::Rrep(p) => p.key,
            Packet::Probe(p) => p.key,
            Packet::Ack(p) => p.key,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Addressing {
    Broadcast,
    Unicast(NodeId),
    /// Promiscuous capture by a hidden wormhole endpoint; the field is the
    /// intended addressee.
    Overheard(NodeId),
}

#[derive(Debug, Clone)]
enum Action {
    Deliver {
        to: NodeId,
        from: NodeId,
        pkt: Packet,
        addressing: Addressing,
    },
    RreqResolve {
        node: NodeId,
        key: RouteKey,
    },
    TunnelArrive {
        exit: NodeId,
        pkt: Packet,
        addressee: Option<NodeId>,
    },
    AckFlush {
        endpoint: NodeId,
    },
    CheckExpire {
        node: NodeId,
        key: RouteKey,
    },
}

#[derive(Debug, Clone)]
struct Event {
    time: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time.to_bits() == other.time.to_bits() && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Default)]
struct NodeState {
    routing: RoutingState,
    checks: BTreeMap<RouteKey, CheckState>,
}

/// One simulation instance. Build with [`Engine::new`], drive with
/// [`Engine::run`], then query node state if a test needs to look inside.
pub struct Engine {
    cfg: ScenarioConfig,
    topo: Topology,
    keys: KeyTable,
    source: NodeId,
    destination: NodeId,
    links: Vec<WormholeLink>,
    endpoints: BTreeMap<NodeId, EndpointState>,
    nodes: BTreeMap<NodeId, NodeState>,

    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    now: f64,
    next_request_id: u64,
    loss_rng: ChaCha8Rng,

    trace: Trace,
    energy: EnergyLedger,
    route_path: Vec<NodeId>,
    rrep_emit_time: Option<f64>,
    collection_times: Vec<f64>,
    verdicts: Vec<VerdictRecord>,
    detection_count: u32,
    false_positive_count: u32,
    route_established: bool,
    outcome: Option<Outcome>,
    end_time: f64,
}

impl Engine {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, SetupError> {
        cfg.validate()?;
        if let Some(file) = &cfg.topology_file {
            if cfg.placements.is_none() {
                return Err(SetupError::UnresolvedTopologyFile(file.clone()));
            }
        }
        let topo = match &cfg.placements {
            Some(placements) => Topology::build(placements.iter().copied(), cfg.range)?,
            None => Topology::random(cfg.seed, cfg.node_count, cfg.area, cfg.range)?,
        };

        let source = cfg.source.unwrap_or_else(|| topo.node_ids().next().unwrap());
        let destination = cfg
            .destination
            .unwrap_or_else(|| topo.node_ids().last().unwrap());
        if !topo.contains(source) {
            return Err(SetupError::UnknownSource(source));
        }
        if !topo.contains(destination) {
            return Err(SetupError::UnknownDestination(destination));
        }
        if source == destination {
            return Err(SetupError::Scenario(ScenarioError::Invalid {
                field: "destination",
                msg: format!("source and destination are both {source}"),
            }));
        }

        let mut links = cfg.wormholes.clone();
        if links.is_empty() && cfg.auto_wormholes > 0 {
            links = sample_wormholes(&topo, cfg.auto_wormholes, cfg.seed, &[source, destination]);
        }
        let endpoints = resolve_endpoints(&topo, &links)?;
        for terminal in [source, destination] {
            if endpoints.contains_key(&terminal) {
                return Err(SetupError::TerminalEndpoint(terminal));
            }
        }

        let masters = generate_masters(cfg.seed, topo.node_ids());
        let keys = provision(&topo, &masters)?;
        let nodes = topo.node_ids().map(|id| (id, NodeState::default())).collect();
        let energy = EnergyLedger::new(cfg.tx_cost, cfg.rx_cost);
        let loss_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6c6f_7373_6472_6177); // "lossdraw"

        Ok(Engine {
            cfg,
            topo,
            keys,
            source,
            destination,
            links,
            endpoints,
            nodes,
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            next_request_id: 0,
            loss_rng,
            trace: Trace::default(),
            energy,
            route_path: Vec::new(),
            rrep_emit_time: None,
            collection_times: Vec::new(),
            verdicts: Vec::new(),
            detection_count: 0,
            false_positive_count: 0,
            route_established: false,
            outcome: None,
            end_time: 0.0,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn key_table(&self) -> &KeyTable {
        &self.keys
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    /// Whether `node`'s forward log holds the discovery triple.
    pub fn has_forwarded(
        &self,
        node: NodeId,
        source: NodeId,
        destination: NodeId,
        request_id: u64,
    ) -> bool {
        let key = RouteKey {
            source,
            destination,
            request_id,
        };
        self.nodes
            .get(&node)
            .map_or(false, |st| st.routing.forward_log.has_forwarded(&key))
    }

    /// Runs one route discovery from the configured source to the
    /// configured destination and returns the collected metrics and trace.
    pub fn run(&mut self) -> (Metrics, Trace) {
        let rid = self
            .start_discovery(self.source, self.destination)
            .expect("terminals were validated at setup");
        debug_assert_eq!(rid, 0);
        self.drain();
        (self.metrics(), self.trace.clone())
    }

    /// Broadcasts a fresh RREQ from `source` and returns its request id.
    pub fn start_discovery(&mut self, source: NodeId, destination: NodeId) -> Result<u64, SetupError> {
        if !self.topo.contains(source) {
            return Err(SetupError::UnknownSource(source));
        }
        if !self.topo.contains(destination) {
            return Err(SetupError::UnknownDestination(destination));
        }
        if source == destination {
            return Err(SetupError::Scenario(ScenarioError::Invalid {
                field: "destination",
                msg: format!("source and destination are both {source}"),
            }));
        }
        let request_id = self.next_request_id;
        self.next_request_id += 1;
        let key = RouteKey {
            source,
            destination,
            request_id,
        };
        self.trace(source, EventKind::DiscoveryStart, format!("{key}"));
        // the source never rebroadcasts its own flood
        self.nodes
            .get_mut(&source)
            .unwrap()
            .routing
            .mark_seen(source, request_id, self.now);
        let pkt = Packet::Rreq(RreqPacket {
            key,
            hop_count: 0,
            path_predecessor: source,
        });
        self.broadcast(source, source, pkt);
        Ok(request_id)
    }

    fn drain(&mut self) {
        while let Some(Reverse(ev)) = self.queue.pop() {
            if self.outcome.is_some() {
                return;
            }
            if ev.time > self.cfg.sim_time_limit {
                self.finish_timeout();
                return;
            }
            debug_assert!(ev.time >= self.now, "event causality violated");
            self.now = ev.time;
            self.dispatch(ev.action);
        }
        if self.outcome.is_none() {
            self.finish_timeout();
        }
    }

    fn finish_timeout(&mut self) {
        self.outcome = Some(Outcome::Timeout);
        self.end_time = self.cfg.sim_time_limit;
        self.trace(
            self.source,
            EventKind::Timeout,
            format!("limit {}", self.cfg.sim_time_limit),
        );
    }

    fn metrics(&self) -> Metrics {
        let outcome = self.outcome.expect("run() completed");
        let rrep_total_time = match outcome {
            Outcome::RouteEstablished | Outcome::AttackDetected => Some(self.end_time),
            Outcome::Timeout => self.rrep_emit_time.map(|_| self.end_time),
        };
        Metrics {
            outcome,
            route_established: self.route_established,
            rrep_total_time,
            route_path: self.route_path.clone(),
            route_hops: self
                .route_established
                .then(|| (self.route_path.len() - 1) as u32),
            probe_ack_collection_times: self.collection_times.clone(),
            energy: self.energy.clone(),
            verdicts: self.verdicts.clone(),
            detection_count: self.detection_count,
            false_positive_count: self.false_positive_count,
            end_time: self.end_time,
        }
    }

    fn schedule(&mut self, time: f64, action: Action) {
        let ev = Event {
            time,
            seq: self.seq,
            action,
        };
        self.seq += 1;
        self.queue.push(Reverse(ev));
    }

    fn trace(&mut self, node: NodeId, kind: EventKind, details: String) {
        self.trace.push(self.now, node, kind, details);
    }

    // ------------------------------------------------------------------
    // radio

    fn send_kind(pkt: &Packet) -> EventKind {
        match pkt {
            Packet::Rreq(_) => EventKind::RreqSend,
            Packet::Rrep(_) => EventKind::RrepSend,
            Packet::Probe(_) => EventKind::ProbeSend,
            Packet::Ack(_) => EventKind::AckSend,
        }
    }

    fn send_details(pkt: &Packet, to: Option<NodeId>) -> String {
        let suffix = to.map_or(String::new(), |n| format!(" to {n}"));
        match pkt {
            Packet::Rreq(p) => format!("{} hop {}{suffix}", p.key, p.hop_count),
            Packet::Rrep(p) => format!("{}{suffix}", p.key),
            Packet::Probe(p) => format!("origin {} {} ttl {}{suffix}", p.origin, p.key, p.ttl),
            Packet::Ack(p) => format!(
                "responder {} tag {} origin {} {}{suffix}",
                p.responder, p.tag, p.origin, p.key
            ),
        }
    }

    fn recv_details(pkt: &Packet, from: NodeId) -> String {
        match pkt {
            Packet::Rreq(p) => format!("{} hop {} from {from}", p.key, p.hop_count),
            Packet::Rrep(p) => format!("{} from {from}", p.key),
            Packet::Probe(p) => format!("origin {} {} ttl {} from {from}", p.origin, p.key, p.ttl),
            Packet::Ack(p) => format!(
                "responder {} tag {} from {from} origin {} {}",
                p.responder, p.tag, p.origin, p.key
            ),
        }
    }

    /// Radio broadcast: reaches every one-hop neighbor after `hop_delay`.
    /// `apparent_from` is the identity receivers see; a hidden tunnel exit
    /// spoofs it, everyone else transmits as themselves.
    fn broadcast(&mut self, physical_from: NodeId, apparent_from: NodeId, pkt: Packet) {
        self.trace(physical_from, Self::send_kind(&pkt), Self::send_details(&pkt, None));
        self.energy.charge_tx(physical_from);
        let neighbors: Vec<NodeId> = self.topo.one_hop(physical_from).unwrap().iter().copied().collect();
        for to in neighbors {
            self.deliver_radio(to, apparent_from, pkt, Addressing::Broadcast);
        }
    }

    /// Radio unicast. Reaches the addressee iff it is a real neighbor;
    /// hidden wormhole endpoints in range of the transmitter additionally
    /// capture route-reply traffic. A unicast that neither reaches its
    /// addressee nor any tunnel is dropped with a trace warning.
    fn unicast(&mut self, physical_from: NodeId, apparent_from: NodeId, to: NodeId, pkt: Packet) {
        self.trace(
            physical_from,
            Self::send_kind(&pkt),
            Self::send_details(&pkt, Some(to)),
        );
        self.energy.charge_tx(physical_from);
        let mut reached = false;
        if self.topo.are_neighbors(physical_from, to) {
            self.deliver_radio(to, apparent_from, pkt, Addressing::Unicast(to));
            reached = true;
        }
        if matches!(pkt, Packet::Rrep(_)) {
            let taps: Vec<NodeId> = self
                .endpoints
                .iter()
                .filter(|(&e, st)| {
                    st.mode.is_hidden()
                        && e != to
                        && e != physical_from
                        && self.topo.are_neighbors(physical_from, e)
                })
                .map(|(&e, _)| e)
                .collect();
            for e in taps {
                self.deliver_radio(e, apparent_from, pkt, Addressing::Overheard(to));
                reached = true;
            }
        }
        if !reached {
            self.trace(
                physical_from,
                EventKind::UnicastFail,
                format!("{} to {to}", pkt.kind_name()),
            );
        }
    }

    fn deliver_radio(&mut self, to: NodeId, from: NodeId, pkt: Packet, addressing: Addressing) {
        if self.cfg.loss_probability > 0.0
            && self.loss_rng.gen::<f64>() < self.cfg.loss_probability
        {
            self.trace(
                to,
                EventKind::Loss,
                format!("{} from {from}", pkt.kind_name()),
            );
            return;
        }
        self.schedule(
            self.now + self.cfg.hop_delay,
            Action::Deliver {
                to,
                from,
                pkt,
                addressing,
            },
        );
    }

    // ------------------------------------------------------------------
    // dispatch

    fn dispatch(&mut self, action: Action) {
        match action {
            Action::Deliver {
                to,
                from,
                pkt,
                addressing,
            } => {
                let kind = if matches!(addressing, Addressing::Overheard(_)) {
                    EventKind::Overhear
                } else {
                    match pkt {
                        Packet::Rreq(_) => EventKind::RreqRecv,
                        Packet::Rrep(_) => EventKind::RrepRecv,
                        Packet::Probe(_) => EventKind::ProbeRecv,
                        Packet::Ack(_) => EventKind::AckRecv,
                    }
                };
                self.trace(to, kind, Self::recv_details(&pkt, from));
                self.energy.charge_rx(to);
                if self.endpoints.contains_key(&to) {
                    self.on_endpoint_delivery(to, from, pkt, addressing);
                } else {
                    match pkt {
                        Packet::Rreq(p) => self.on_rreq(to, p),
                        Packet::Rrep(p) => self.on_rrep(to, p),
                        Packet::Probe(p) => self.on_probe(to, from, p),
                        Packet::Ack(p) => self.on_ack(to, from, p),
                    }
                }
            }
            Action::RreqResolve { node, key } => self.on_rreq_resolve(node, key),
            Action::TunnelArrive { exit, pkt, addressee } => {
                self.on_tunnel_arrive(exit, pkt, addressee)
            }
            Action::AckFlush { endpoint } => self.on_ack_flush(endpoint),
            Action::CheckExpire { node, key } => self.on_check_expire(node, key),
        }
    }

    // ------------------------------------------------------------------
    // honest handlers

    fn on_rreq(&mut self, node: NodeId, pkt: RreqPacket) {
        let arrival = self
            .nodes
            .get_mut(&node)
            .unwrap()
            .routing
            .note_rreq(&pkt, self.now);
        match arrival {
            RreqArrival::First => {
                self.schedule(self.now, Action::RreqResolve { node, key: pkt.key });
            }
            RreqArrival::SameTimeTie => {}
            RreqArrival::Duplicate => {
                self.trace(
                    node,
                    EventKind::RreqDup,
                    format!("{} from {}", pkt.key, pkt.path_predecessor),
                );
            }
        }
    }

    fn on_rreq_resolve(&mut self, node: NodeId, key: RouteKey) {
        let (predecessor, hop_count) = {
            let st = self.nodes.get_mut(&node).unwrap();
            let p = st
                .routing
                .rreq_first
                .get_mut(&(key.source, key.request_id))
                .expect("resolve without arrival");
            p.resolved = true;
            (p.best_predecessor, p.hop_count)
        };
        let st = self.nodes.get_mut(&node).unwrap();
        st.routing.reverse.insert(key, predecessor);
        if node == key.destination {
            // reply to the first flood arrival only
            if st.routing.replied.insert((key.source, key.request_id)) {
                st.routing.forward_log.record(key);
                self.rrep_emit_time.get_or_insert(self.now);
                self.route_path.push(node);
                let rrep = RrepPacket {
                    key,
                    forwarder: node,
                };
                self.unicast(node, node, predecessor, Packet::Rrep(rrep));
            }
        } else {
            let fwd = RreqPacket {
                key,
                hop_count: hop_count + 1,
                path_predecessor: node,
            };
            self.broadcast(node, node, Packet::Rreq(fwd));
        }
    }

    fn on_rrep(&mut self, node: NodeId, pkt: RrepPacket) {
        let key = pkt.key;
        {
            let st = self.nodes.get(&node).unwrap();
            if st.checks.contains_key(&key) || st.routing.forward_log.has_forwarded(&key) {
                self.trace(node, EventKind::RrepDrop, format!("{key} duplicate"));
                return;
            }
        }
        if node == key.source {
            self.route_path.push(node);
            if self.cfg.prevention_enabled && pkt.forwarder != key.destination {
                self.start_check(node, pkt);
            } else {
                self.establish(key);
            }
            return;
        }
        if !self.nodes[&node].routing.reverse.contains_key(&key) {
            self.trace(node, EventKind::RrepDrop, format!("{key} no reverse entry"));
            return;
        }
        self.route_path.push(node);
        if !self.cfg.prevention_enabled || pkt.forwarder == key.destination {
            // replies straight from the destination are exempt from the check
            self.forward_rrep(node, pkt);
        } else {
            self.start_check(node, pkt);
        }
    }

    fn forward_rrep(&mut self, node: NodeId, pkt: RrepPacket) {
        let key = pkt.key;
        let predecessor = self.nodes[&node].routing.reverse[&key];
        self.nodes
            .get_mut(&node)
            .unwrap()
            .routing
            .forward_log
            .record(key);
        let fwd = RrepPacket {
            key,
            forwarder: node,
        };
        self.unicast(node, node, predecessor, Packet::Rrep(fwd));
    }

    fn establish(&mut self, key: RouteKey) {
        self.route_established = true;
        self.outcome = Some(Outcome::RouteEstablished);
        self.end_time = self.now;
        let hops = self.route_path.len() - 1;
        self.trace(
            key.source,
            EventKind::RouteEstablished,
            format!("{key} hops {hops}"),
        );
    }

    fn start_check(&mut self, node: NodeId, rrep: RrepPacket) {
        let key = rrep.key;
        self.trace(
            node,
            EventKind::CheckStart,
            format!(
                "{key} forwarder {} window {}",
                rrep.forwarder, self.cfg.ack_window
            ),
        );
        self.nodes
            .get_mut(&node)
            .unwrap()
            .checks
            .insert(key, CheckState::new(rrep, self.now));
        let probe = ProbeMsg {
            origin: node,
            key,
            ttl: 2,
        };
        self.broadcast(node, node, Packet::Probe(probe));
        self.schedule(self.now + self.cfg.ack_window, Action::CheckExpire { node, key });
    }

    fn on_probe(&mut self, node: NodeId, from: NodeId, probe: ProbeMsg) {
        if node == probe.origin {
            return;
        }
        if probe.ttl >= 2 {
            // direct copy: this node is a one-hop relay
            let relayed = ProbeMsg {
                ttl: probe.ttl - 1,
                ..probe
            };
            self.broadcast(node, node, Packet::Probe(relayed));
            return;
        }
        // relayed copy: one-hop neighbors of the origin relay, never answer
        if self.topo.are_neighbors(probe.origin, node) {
            return;
        }
        let ack = answer_probe(
            node,
            &self.nodes[&node].routing.forward_log,
            &probe,
            from,
        );
        self.unicast(node, node, from, Packet::Ack(ack));
    }

    fn on_ack(&mut self, node: NodeId, from: NodeId, ack: ProbeAck) {
        if node == ack.origin {
            let st = self.nodes.get_mut(&node).unwrap();
            match st.checks.get_mut(&ack.key) {
                Some(check) => {
                    check.acks.insert(ack.responder, from, ack.tag);
                    check.last_ack_time = Some(self.now);
                }
                None => {
                    self.trace(
                        node,
                        EventKind::AckLate,
                        format!("responder {} from {from} {}", ack.responder, ack.key),
                    );
                }
            }
        } else {
            // relay leg back toward the checking node
            self.unicast(node, node, ack.origin, Packet::Ack(ack));
        }
    }

    fn on_check_expire(&mut self, node: NodeId, key: RouteKey) {
        let check = self
            .nodes
            .get_mut(&node)
            .unwrap()
            .checks
            .remove(&key)
            .expect("check expired twice");
        let verdict = evaluate(node, &check.acks, &self.keys);
        self.collection_times.push(check.collection_time());
        self.verdicts.push(VerdictRecord {
            time: self.now,
            node,
            kind: verdict.kind,
            acks: check.acks.summary(),
            single_relay_responders: verdict.single_relay_responders.iter().copied().collect(),
            collection_time: check.collection_time(),
        });
        self.trace(
            node,
            EventKind::Verdict,
            format!("{} {key} acks {}", verdict.kind, check.acks.summary()),
        );
        if verdict.kind == VerdictKind::Valid {
            if node == key.source {
                self.establish(key);
            } else {
                self.forward_rrep(node, check.rrep);
            }
        } else {
            self.trace(
                node,
                EventKind::Alarm,
                format!(
                    "{} | {} {} {}",
                    verdict.kind, key.source, key.destination, key.request_id
                ),
            );
            if self.links.is_empty() {
                self.false_positive_count += 1;
            } else {
                self.detection_count += 1;
            }
            // the suspended reply is killed; the discovery is over
            self.outcome = Some(Outcome::AttackDetected);
            self.end_time = self.now;
        }
    }

    // ------------------------------------------------------------------
    // wormhole endpoints

    fn on_endpoint_delivery(
        &mut self,
        endpoint: NodeId,
        from: NodeId,
        pkt: Packet,
        addressing: Addressing,
    ) {
        let mode = self.endpoints[&endpoint].mode;
        match mode {
            WormholeMode::HiddenPassive | WormholeMode::HiddenActive => match pkt {
                Packet::Rreq(_) => self.tunnel(endpoint, pkt, None),
                Packet::Rrep(_) => {
                    let addressee = match addressing {
                        Addressing::Unicast(to) | Addressing::Overheard(to) => Some(to),
                        Addressing::Broadcast => None,
                    };
                    self.tunnel(endpoint, pkt, addressee);
                }
                Packet::Probe(p) => {
                    if mode == WormholeMode::HiddenActive && p.ttl >= 2 {
                        // pose as an ordinary one-hop relay to get at the acks
                        let relayed = ProbeMsg { ttl: p.ttl - 1, ..p };
                        self.broadcast(endpoint, endpoint, Packet::Probe(relayed));
                    } else if p.ttl >= 2 {
                        self.trace(endpoint, EventKind::TunnelDrop, "probe".to_string());
                    }
                }
                Packet::Ack(a) => {
                    if mode == WormholeMode::HiddenActive
                        && matches!(addressing, Addressing::Unicast(to) if to == endpoint)
                    {
                        let st = self.endpoints.get_mut(&endpoint).unwrap();
                        st.ack_buffer.push(a);
                        self.schedule(self.now, Action::AckFlush { endpoint });
                    } else {
                        self.trace(endpoint, EventKind::TunnelDrop, "ack".to_string());
                    }
                }
            },
            WormholeMode::ExposedPassive => match pkt {
                Packet::Rreq(p) => {
                    self.tunnel(endpoint, pkt, None);
                    self.on_rreq(endpoint, p);
                }
                Packet::Rrep(p) => {
                    if matches!(addressing, Addressing::Unicast(to) if to == endpoint) {
                        // shortcut the reply through the tunnel instead of
                        // forwarding it honestly; relaying it counts as a
                        // forward in this end's log
                        self.nodes
                            .get_mut(&endpoint)
                            .unwrap()
                            .routing
                            .forward_log
                            .record(p.key);
                        self.tunnel(endpoint, pkt, None);
                    }
                }
                Packet::Probe(p) => {
                    if p.ttl >= 2 {
                        self.tunnel(endpoint, pkt, None);
                    }
                    self.on_probe(endpoint, from, p);
                }
                Packet::Ack(a) => self.on_ack(endpoint, from, a),
            },
        }
    }

    fn tunnel(&mut self, entrance: NodeId, pkt: Packet, addressee: Option<NodeId>) {
        let fingerprint = format!("{pkt:?}|{addressee:?}");
        let (peer, delay) = {
            let st = self.endpoints.get_mut(&entrance).unwrap();
            if !st.tunneled.insert(fingerprint) {
                return;
            }
            (st.peer, st.tunnel_delay)
        };
        self.trace(
            entrance,
            EventKind::TunnelCross,
            format!("to {peer} {} {}", pkt.kind_name(), pkt.key()),
        );
        self.schedule(
            self.now + delay,
            Action::TunnelArrive {
                exit: peer,
                pkt,
                addressee,
            },
        );
    }

    fn on_tunnel_arrive(&mut self, exit: NodeId, pkt: Packet, addressee: Option<NodeId>) {
        let mode = self.endpoints[&exit].mode;
        match (mode, pkt) {
            (WormholeMode::HiddenPassive | WormholeMode::HiddenActive, Packet::Rreq(p)) => {
                // re-emit with the original forwarder identity, hop count frozen
                self.broadcast(exit, p.path_predecessor, Packet::Rreq(p));
            }
            (WormholeMode::HiddenPassive | WormholeMode::HiddenActive, Packet::Rrep(p)) => {
                match addressee {
                    Some(to) => self.unicast(exit, p.forwarder, to, Packet::Rrep(p)),
                    None => self.trace(
                        exit,
                        EventKind::RrepDrop,
                        format!("{} tunneled without addressee", p.key),
                    ),
                }
            }
            (WormholeMode::ExposedPassive, Packet::Rreq(mut p)) => {
                // re-emit under own identity; suppress a later duplicate
                // rebroadcast when the honest flood arrives by radio
                self.nodes
                    .get_mut(&exit)
                    .unwrap()
                    .routing
                    .mark_seen(p.key.source, p.key.request_id, self.now);
                p.path_predecessor = exit;
                self.broadcast(exit, exit, Packet::Rreq(p));
            }
            (WormholeMode::ExposedPassive, Packet::Rrep(mut p)) => {
                let reverse = self.nodes[&exit].routing.reverse.get(&p.key).copied();
                match reverse {
                    Some(predecessor) => {
                        self.nodes
                            .get_mut(&exit)
                            .unwrap()
                            .routing
                            .forward_log
                            .record(p.key);
                        p.forwarder = exit;
                        self.unicast(exit, exit, predecessor, Packet::Rrep(p));
                    }
                    None => self.trace(
                        exit,
                        EventKind::RrepDrop,
                        format!("{} no reverse entry at tunnel exit", p.key),
                    ),
                }
            }
            (WormholeMode::ExposedPassive, Packet::Probe(p)) => {
                // answer honestly under own identity; the answer crosses
                // back and the entrance hands it to the checking node
                let entrance = self.endpoints[&exit].peer;
                let ack = answer_probe(
                    exit,
                    &self.nodes[&exit].routing.forward_log,
                    &p,
                    entrance,
                );
                self.tunnel(exit, Packet::Ack(ack), Some(p.origin));
            }
            (WormholeMode::ExposedPassive, Packet::Ack(a)) => {
                self.unicast(exit, exit, a.origin, Packet::Ack(a));
            }
            (_, pkt) => {
                self.trace(
                    exit,
                    EventKind::TunnelDrop,
                    format!("{} at exit", pkt.kind_name()),
                );
            }
        }
    }

    /// Same-time flush of acks a hidden-active endpoint relays: at most one
    /// tag 0 across the whole check is flipped to 1, lowest responder id
    /// first, everything else passes unmodified.
    fn on_ack_flush(&mut self, endpoint: NodeId) {
        let mut buffered = std::mem::take(&mut self.endpoints.get_mut(&endpoint).unwrap().ack_buffer);
        if buffered.is_empty() {
            return;
        }
        buffered.sort_by_key(|a| (a.responder, a.relay, a.tag));
        for mut ack in buffered {
            let check_id = (ack.origin, ack.key);
            let flip = {
                let st = self.endpoints.get_mut(&endpoint).unwrap();
                ack.tag == 0 && !st.flipped.contains(&check_id) && {
                    st.flipped.insert(check_id);
                    true
                }
            };
            if flip {
                ack.tag = 1;
                self.trace(
                    endpoint,
                    EventKind::Tamper,
                    format!(
                        "ack responder {} tag 0->1 origin {} {}",
                        ack.responder, ack.origin, ack.key
                    ),
                );
            }
            self.unicast(endpoint, endpoint, ack.origin, Packet::Ack(ack));
        }
    }
}

/// Seeded placement of `k` tunnels over non-adjacent node pairs, avoiding
/// the flow terminals and reusing no endpoint. Fewer than `k` are placed
/// when the topology runs out of eligible pairs.
fn sample_wormholes(topo: &Topology, k: usize, seed: u64, exclude: &[NodeId]) -> Vec<WormholeLink> {
    let ids: Vec<NodeId> = topo
        .node_ids()
        .filter(|id| !exclude.contains(id))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x776f_726d_686f_6c65); // "wormhole"
    let mut used: BTreeSet<NodeId> = BTreeSet::new();
    let mut links = Vec::new();
    if ids.len() < 2 {
        return links;
    }
    for _ in 0..k {
        let mut found = None;
        for _ in 0..2000 {
            let a = ids[rng.gen_range(0..ids.len())];
            let b = ids[rng.gen_range(0..ids.len())];
            if a == b || used.contains(&a) || used.contains(&b) || topo.are_neighbors(a, b) {
                continue;
            }
            found = Some((a.min(b), a.max(b)));
            break;
        }
        match found {
            Some((a, b)) => {
                used.insert(a);
                used.insert(b);
                links.push(WormholeLink::new(a, b, WormholeMode::HiddenPassive));
            }
            None => break,
        }
    }
    links
}

/// Builds an engine from a scenario and runs the single configured
/// discovery.
pub fn run_scenario(cfg: ScenarioConfig) -> Result<(Metrics, Trace), SetupError> {
    let mut engine = Engine::new(cfg)?;
    Ok(engine.run())
}

/// Paired overhead measurement: the same scenario with the check phase off
/// and on. The two runs share placement, keys and attack state.
#[derive(Debug, Clone, PartialEq)]
pub struct OverheadComparison {
    pub baseline: Metrics,
    pub prevention: Metrics,
}

impl OverheadComparison {
    pub const CSV_HEADER: &'static str = "hops,baseline_outcome,prevention_outcome,\
baseline_rrep_time,prevention_rrep_time,baseline_energy,prevention_energy,max_ack_collection_time";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.baseline
                .route_hops
                .map_or(String::new(), |h| h.to_string()),
            self.baseline.outcome.as_str(),
            self.prevention.outcome.as_str(),
            self.baseline
                .rrep_total_time
                .map_or(String::new(), |t| format!("{t}")),
            self.prevention
                .rrep_total_time
                .map_or(String::new(), |t| format!("{t}")),
            self.baseline.energy.total(),
            self.prevention.energy.total(),
            self.prevention.max_collection_time(),
        )
    }
}

/// Runs the (baseline, prevention) pair. The configs must be identical
/// except for `prevention_enabled`, baseline off and prevention on.
pub fn measure_overhead(
    baseline: &ScenarioConfig,
    prevention: &ScenarioConfig,
) -> Result<OverheadComparison, SetupError> {
    if baseline.prevention_enabled
        || !prevention.prevention_enabled
        || baseline.with_prevention(true) != *prevention
    {
        return Err(SetupError::ComparisonMismatch);
    }
    let (base_metrics, _) = run_scenario(baseline.clone())?;
    let (prev_metrics, _) = run_scenario(prevention.clone())?;
    Ok(OverheadComparison {
        baseline: base_metrics,
        prevention: prev_metrics,
    })
}
