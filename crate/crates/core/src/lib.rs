//! Deterministic discrete-event simulation of on-demand route discovery in
//! a wireless sensor network, under out-of-band wormhole attacks, with a
//! two-hop-neighbor validation protocol gating route-reply forwarding.
//!
//! The pieces:
//!
//! * [`topology`] - unit-disc connectivity, one-hop/two-hop neighbor sets;
//! * [`keying`] - per-node keys derived over two-hop neighbor id sets;
//! * [`routing`] - RREQ flood / RREP reverse-path discovery state;
//! * [`prevention`] - the probe/ack check and its verdict logic;
//! * [`wormhole`] - tunnel injection with hidden/exposed, passive/active
//!   endpoint behaviors;
//! * [`engine`] - the event loop, radio model, energy ledger and metrics;
//! * [`scenario`] - run configuration and its text format;
//! * [`fixture`] - the hand-placed 15-node reference topology.
//!
//! Everything is seeded and ordered: the same [`scenario::ScenarioConfig`]
//! produces byte-identical traces and metrics on every run.

pub mod engine;
pub mod fixture;
pub mod keying;
pub mod metrics;
pub mod prevention;
pub mod routing;
pub mod scenario;
pub mod topology;
pub mod trace;
pub mod wormhole;

pub use engine::{measure_overhead, run_scenario, Engine, OverheadComparison, SetupError};
pub use keying::{derive_key, derive_local_key, provision, KeyTable, MasterKey, NodeKey};
pub use metrics::{EnergyLedger, Metrics, Outcome};
pub use prevention::{evaluate, AckSet, Verdict, VerdictKind};
pub use routing::{RouteKey, RrepPacket, RreqPacket};
pub use scenario::{ScenarioConfig, ScenarioError};
pub use topology::{NodeId, Position, Topology, TopologyError};
pub use trace::{EventKind, Trace};
pub use wormhole::{WormholeLink, WormholeMode};
