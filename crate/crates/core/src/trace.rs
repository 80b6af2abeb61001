//! Structured event trace with a stable text rendering.
//!
//! Every line is `time | node | event_kind | details`, with time printed to
//! six decimals. Alarm lines additionally pin the verdict kind as its own
//! field: `time | node | ALARM | verdict_kind | source dest request_id`.
//! Tests and the CLI both consume this format, so treat it as an interface.
//!
//! Energy accounting maps 1:1 onto trace kinds: every `*_SEND` line is one
//! tx charge to that node, every `*_RECV` or `OVERHEAR` line one rx charge.

use std::fmt;

use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    DiscoveryStart,
    RreqSend,
    RreqRecv,
    RreqDup,
    RrepSend,
    RrepRecv,
    RrepDrop,
    ProbeSend,
    ProbeRecv,
    AckSend,
    AckRecv,
    AckLate,
    Overhear,
    TunnelCross,
    TunnelDrop,
    Tamper,
    UnicastFail,
    Loss,
    CheckStart,
    Verdict,
    Alarm,
    RouteEstablished,
    Timeout,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DiscoveryStart => "DISCOVERY_START",
            EventKind::RreqSend => "RREQ_SEND",
            EventKind::RreqRecv => "RREQ_RECV",
            EventKind::RreqDup => "RREQ_DUP",
            EventKind::RrepSend => "RREP_SEND",
            EventKind::RrepRecv => "RREP_RECV",
            EventKind::RrepDrop => "RREP_DROP",
            EventKind::ProbeSend => "PROBE_SEND",
            EventKind::ProbeRecv => "PROBE_RECV",
            EventKind::AckSend => "ACK_SEND",
            EventKind::AckRecv => "ACK_RECV",
            EventKind::AckLate => "ACK_LATE",
            EventKind::Overhear => "OVERHEAR",
            EventKind::TunnelCross => "TUNNEL_CROSS",
            EventKind::TunnelDrop => "TUNNEL_DROP",
            EventKind::Tamper => "TAMPER",
            EventKind::UnicastFail => "UNICAST_FAIL",
            EventKind::Loss => "LOSS",
            EventKind::CheckStart => "CHECK_START",
            EventKind::Verdict => "VERDICT",
            EventKind::Alarm => "ALARM",
            EventKind::RouteEstablished => "ROUTE_ESTABLISHED",
            EventKind::Timeout => "TIMEOUT",
        }
    }

    /// Transmission kinds, charged tx_cost to the tracing node.
    pub fn is_send(self) -> bool {
        matches!(
            self,
            EventKind::RreqSend | EventKind::RrepSend | EventKind::ProbeSend | EventKind::AckSend
        )
    }

    /// Receipt kinds, charged rx_cost to the tracing node.
    pub fn is_recv(self) -> bool {
        matches!(
            self,
            EventKind::RreqRecv
                | EventKind::RrepRecv
                | EventKind::ProbeRecv
                | EventKind::AckRecv
                | EventKind::Overhear
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub node: NodeId,
    pub kind: EventKind,
    pub details: String,
}

impl TraceEvent {
    pub fn render(&self) -> String {
        format!(
            "{:.6} | {} | {} | {}",
            self.time, self.node, self.kind, self.details
        )
    }
}

/// Append-only run log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, time: f64, node: NodeId, kind: EventKind, details: String) {
        self.events.push(TraceEvent {
            time,
            node,
            kind,
            details,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.render());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format_is_stable() {
        let mut trace = Trace::default();
        trace.push(0.0125, NodeId(3), EventKind::RreqSend, "src 0 dst 9 rid 0 hop 1".into());
        assert_eq!(
            trace.render(),
            "0.012500 | 3 | RREQ_SEND | src 0 dst 9 rid 0 hop 1\n"
        );
    }

    #[test]
    fn alarm_line_carries_verdict_field() {
        let mut trace = Trace::default();
        trace.push(
            2.05,
            NodeId(1),
            EventKind::Alarm,
            "IllegalNoForwarder | 0 14 0".into(),
        );
        assert_eq!(
            trace.render(),
            "2.050000 | 1 | ALARM | IllegalNoForwarder | 0 14 0\n"
        );
    }
}
