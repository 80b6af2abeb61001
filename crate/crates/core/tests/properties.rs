//! Property tests over the structural invariants: unit-disc adjacency,
//! two-hop set algebra, key derivation, and verdict totality.

use std::collections::BTreeSet;

use proptest::collection::vec;
use proptest::prelude::*;

use wormsim_core::keying::{derive_key, MasterKey};
use wormsim_core::prevention::{evaluate, AckSet, VerdictKind};
use wormsim_core::topology::{NodeId, Position, Topology};
use wormsim_core::{provision, ScenarioConfig};

fn n(id: u32) -> NodeId {
    NodeId(id)
}

fn random_topo(seed: u64, nodes: usize) -> Topology {
    Topology::random(seed, nodes, (600.0, 600.0), 250.0).unwrap()
}

// Independent distance-2 oracle: full BFS, nothing shared with the
// adjacency-composition implementation under test.
fn bfs_two_hop(topo: &Topology, root: NodeId) -> BTreeSet<NodeId> {
    let mut depth = std::collections::BTreeMap::from([(root, 0u32)]);
    let mut frontier = vec![root];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for u in frontier {
            let du = depth[&u];
            for &v in topo.one_hop(u).unwrap() {
                if !depth.contains_key(&v) {
                    depth.insert(v, du + 1);
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    depth
        .into_iter()
        .filter(|&(_, d)| d == 2)
        .map(|(id, _)| id)
        .collect()
}

proptest! {
    #[test]
    fn adjacency_is_symmetric_and_irreflexive(seed in 0u64..500, nodes in 2usize..40) {
        let topo = random_topo(seed, nodes);
        for a in topo.node_ids() {
            prop_assert!(!topo.are_neighbors(a, a));
            for b in topo.node_ids() {
                prop_assert_eq!(topo.are_neighbors(a, b), topo.are_neighbors(b, a));
            }
        }
    }

    #[test]
    fn two_hop_is_disjoint_from_self_and_one_hop(seed in 0u64..500, nodes in 2usize..40) {
        let topo = random_topo(seed, nodes);
        for a in topo.node_ids() {
            let one = topo.one_hop(a).unwrap().clone();
            let two = topo.two_hop(a).unwrap();
            prop_assert!(!two.contains(&a));
            prop_assert!(two.is_disjoint(&one));
        }
    }

    #[test]
    fn two_hop_relation_is_symmetric(seed in 0u64..300, nodes in 2usize..30) {
        let topo = random_topo(seed, nodes);
        for a in topo.node_ids() {
            for b in topo.two_hop(a).unwrap() {
                prop_assert!(topo.two_hop(b).unwrap().contains(&a), "{a} <-> {b}");
            }
        }
    }

    #[test]
    fn two_hop_matches_the_bfs_oracle(seed in 0u64..300, nodes in 2usize..31) {
        let topo = random_topo(seed, nodes);
        for a in topo.node_ids() {
            prop_assert_eq!(topo.two_hop(a).unwrap(), bfs_two_hop(&topo, a));
        }
    }

    #[test]
    fn derive_key_ignores_presentation_order(
        master in any::<u64>(),
        ids in vec(0u32..1000, 0..12),
    ) {
        let forward = derive_key(MasterKey(master), ids.iter().copied().map(n));
        let mut reversed = ids.clone();
        reversed.reverse();
        let backward = derive_key(MasterKey(master), reversed.into_iter().map(n));
        prop_assert_eq!(forward, backward);
        // shuffled through a set is the same again
        let as_set: BTreeSet<u32> = ids.iter().copied().collect();
        let canonical = derive_key(MasterKey(master), as_set.into_iter().map(n));
        prop_assert_eq!(forward, canonical);
    }

    #[test]
    fn evaluation_is_total_and_pure(
        entries in vec((0u32..8, 100u32..104, 0u8..2), 0..16),
        master in any::<u64>(),
    ) {
        // an arbitrary key table: node 0 provisioned over an arbitrary set
        let topo = random_topo(7, 12);
        let masters = topo.node_ids().map(|id| (id, MasterKey(master ^ u64::from(id.0)))).collect();
        let keys = provision(&topo, &masters).unwrap();

        let mut acks = AckSet::default();
        for (responder, relay, tag) in entries {
            acks.insert(n(responder), n(relay), tag);
        }
        let first = evaluate(n(0), &acks, &keys);
        let second = evaluate(n(0), &acks, &keys);
        prop_assert_eq!(&first, &second);
        prop_assert!(matches!(
            first.kind,
            VerdictKind::Valid
                | VerdictKind::IllegalNoForwarder
                | VerdictKind::IllegalKeyMismatch
                | VerdictKind::IllegalTagConflict
                | VerdictKind::IllegalMultipleForwarders
        ));
    }

    #[test]
    fn provisioned_keys_agree_with_recomputation_everywhere(seed in 0u64..100) {
        let topo = random_topo(seed, 20);
        let masters = wormsim_core::keying::generate_masters(seed, topo.node_ids());
        let keys = provision(&topo, &masters).unwrap();
        for id in topo.node_ids() {
            let lk = derive_key(keys.master(id).unwrap(), topo.two_hop(id).unwrap());
            prop_assert_eq!(lk, keys.provisioned(id).unwrap());
        }
    }

    #[test]
    fn scenario_text_round_trips(seed in any::<u64>(), nodes in 2usize..50, prevention in any::<bool>()) {
        let cfg = ScenarioConfig {
            seed,
            node_count: nodes,
            prevention_enabled: prevention,
            ..ScenarioConfig::default()
        };
        let parsed = ScenarioConfig::parse_str(&cfg.dump()).unwrap();
        prop_assert_eq!(cfg, parsed);
    }
}
