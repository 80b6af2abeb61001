//! Hand-placed 15-node reference topology (nodes A through O) used by the
//! canonical check scenarios and the `fixtures` CLI subcommand.
//!
//! The placement realizes, at range 100:
//!
//! * `two_hop(I) = {C, E, G, K, O}` with the honest route A-B-C-F-I-N-O,
//!   so I's check sees exactly one forwarder (the destination O);
//! * `two_hop(B) = {D, F, H}`, with F reachable from B through both relays
//!   C and E - the dual-relay coverage the tag-conflict rule needs;
//! * a C-L tunnel that is 6 honest hops long, far outside B's two-hop set.
//!
//! Coordinates are an implementation artifact; the tests recompute the
//! neighbor sets from them rather than trusting this table.

use crate::scenario::ScenarioConfig;
use crate::topology::{NodeId, Position, Topology};
use crate::wormhole::{WormholeLink, WormholeMode};

pub const RANGE: f64 = 100.0;

/// Maps `'A'..='O'` onto node ids 0..=14.
pub fn node(letter: char) -> NodeId {
    assert!(
        ('A'..='O').contains(&letter),
        "fixture nodes are A..=O, got {letter:?}"
    );
    NodeId(letter as u32 - 'A' as u32)
}

/// Inverse of [`node`] for ids 0..=14.
pub fn letter(id: NodeId) -> Option<char> {
    (id.0 < 15).then(|| char::from(b'A' + id.0 as u8))
}

pub fn placements() -> Vec<(NodeId, Position)> {
    [
        ('A', 0.0, 200.0),
        ('B', 95.0, 200.0),
        ('C', 160.0, 260.0),
        ('D', 105.0, 65.0),
        ('E', 160.0, 140.0),
        ('F', 225.0, 200.0),
        ('G', 255.0, 360.0),
        ('H', 215.0, 65.0),
        ('I', 320.0, 200.0),
        ('J', 320.0, 295.0),
        ('K', 385.0, 360.0),
        ('L', 700.0, 200.0),
        ('M', 605.0, 200.0),
        ('N', 415.0, 200.0),
        ('O', 510.0, 200.0),
    ]
    .into_iter()
    .map(|(l, x, y)| (node(l), Position::new(x, y)))
    .collect()
}

pub fn topology() -> Topology {
    Topology::build(placements(), RANGE).expect("fixture placement is valid")
}

/// Discovery A -> O over the fixture, prevention on, optionally with the
/// C-L tunnel in the given mode.
pub fn scenario(attack: Option<WormholeMode>) -> ScenarioConfig {
    ScenarioConfig {
        placements: Some(placements()),
        range: RANGE,
        source: Some(node('A')),
        destination: Some(node('O')),
        prevention_enabled: true,
        wormholes: attack
            .map(|mode| vec![WormholeLink::new(node('C'), node('L'), mode)])
            .unwrap_or_default(),
        auto_wormholes: 0,
        ..ScenarioConfig::default()
    }
}

/// The node whose check the canonical case inspects: I when there is no
/// tunnel, B under each attack mode.
pub fn canonical_checker(attack: Option<WormholeMode>) -> NodeId {
    match attack {
        None => node('I'),
        Some(_) => node('B'),
    }
}
