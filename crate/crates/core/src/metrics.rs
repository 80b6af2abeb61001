//! Energy ledger and per-run metrics.

use std::collections::BTreeMap;

use crate::prevention::VerdictKind;
use crate::topology::NodeId;

/// Per-node packet counters under a constant-cost energy model:
/// every transmission costs `tx_cost`, every receipt `rx_cost`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeEnergy {
    pub tx_count: u64,
    pub rx_count: u64,
    pub consumed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub tx_cost: f64,
    pub rx_cost: f64,
    nodes: BTreeMap<NodeId, NodeEnergy>,
}

impl EnergyLedger {
    pub fn new(tx_cost: f64, rx_cost: f64) -> Self {
        EnergyLedger {
            tx_cost,
            rx_cost,
            nodes: BTreeMap::new(),
        }
    }

    pub fn charge_tx(&mut self, node: NodeId) {
        let e = self.nodes.entry(node).or_default();
        e.tx_count += 1;
        e.consumed += self.tx_cost;
    }

    pub fn charge_rx(&mut self, node: NodeId) {
        let e = self.nodes.entry(node).or_default();
        e.rx_count += 1;
        e.consumed += self.rx_cost;
    }

    pub fn node(&self, node: NodeId) -> NodeEnergy {
        self.nodes.get(&node).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeEnergy)> + '_ {
        self.nodes.iter().map(|(&n, &e)| (n, e))
    }

    pub fn total(&self) -> f64 {
        self.nodes.values().map(|e| e.consumed).sum()
    }

    pub fn total_tx(&self) -> u64 {
        self.nodes.values().map(|e| e.tx_count).sum()
    }

    pub fn total_rx(&self) -> u64 {
        self.nodes.values().map(|e| e.rx_count).sum()
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    RouteEstablished,
    AttackDetected,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RouteEstablished => "route_established",
            Outcome::AttackDetected => "attack_detected",
            Outcome::Timeout => "timeout",
        }
    }
}

/// One completed check, as recorded in the metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRecord {
    pub time: f64,
    pub node: NodeId,
    pub kind: VerdictKind,
    /// `AckSet::summary()` snapshot of what the node saw.
    pub acks: String,
    pub single_relay_responders: Vec<NodeId>,
    pub collection_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub outcome: Outcome,
    pub route_established: bool,
    /// Discovery start to route establishment or reply kill. Absent when no
    /// reply was ever emitted (e.g. a disconnected pair timing out).
    pub rrep_total_time: Option<f64>,
    /// Nodes the winning reply passed through, destination first.
    pub route_path: Vec<NodeId>,
    /// `route_path` link count.
    pub route_hops: Option<u32>,
    pub probe_ack_collection_times: Vec<f64>,
    pub energy: EnergyLedger,
    pub verdicts: Vec<VerdictRecord>,
    pub detection_count: u32,
    pub false_positive_count: u32,
    pub end_time: f64,
}

impl Metrics {
    pub fn max_collection_time(&self) -> f64 {
        self.probe_ack_collection_times
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn alarms(&self) -> usize {
        self.verdicts.iter().filter(|v| v.kind.is_illegal()).count()
    }

    pub const CSV_HEADER: &'static str = "outcome,route_established,rrep_total_time,route_hops,\
total_energy,tx_total,rx_total,checks,max_ack_collection_time,alarms,detections,false_positives";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.outcome.as_str(),
            self.route_established,
            self.rrep_total_time.map_or(String::new(), |t| format!("{t}")),
            self.route_hops.map_or(String::new(), |h| h.to_string()),
            self.energy.total(),
            self.energy.total_tx(),
            self.energy.total_rx(),
            self.probe_ack_collection_times.len(),
            self.max_collection_time(),
            self.alarms(),
            self.detection_count,
            self.false_positive_count,
        )
    }
}
