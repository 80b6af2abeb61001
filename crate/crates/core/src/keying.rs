//! Key generation: per-node master keys, the derivation function over
//! two-hop neighbor id sets, and local-key recomputation during checks.
//!
//! The derivation folds the sorted id list into the master key through a
//! fixed 64-bit mixer, so equal (master, id set) pairs give bit-identical
//! keys on every platform. The mixer is deliberately not a cryptographic
//! PRF; the simulator needs determinism and set sensitivity, not secrecy.
//! Swap `mix64` for a keyed PRF if that ever changes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::{NodeId, Topology, TopologyError};

/// Per-node master key material, fixed for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MasterKey(pub u64);

/// A key derived from a master key and an id set: the provisioned K_mu or a
/// locally recomputed LK.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeKey(pub u64);

impl fmt::LowerHex for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Fixed 64-bit finalizer (all arithmetic mod 2^64).
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Derives a key from `master` over an id set. Ids are canonicalized to
/// ascending order (and deduplicated), so presentation order never matters.
/// The empty set yields the raw master value.
pub fn derive_key(master: MasterKey, ids: impl IntoIterator<Item = NodeId>) -> NodeKey {
    let sorted: BTreeSet<NodeId> = ids.into_iter().collect();
    let mut acc = master.0;
    for id in sorted {
        acc = mix64(acc ^ u64::from(id.0));
    }
    NodeKey(acc)
}

/// Recomputes a local key LK from an observed responder set. Identical
/// algorithm to [`derive_key`]; named separately because its input is what a
/// check observed, not what deployment provisioned.
pub fn derive_local_key(master: MasterKey, responders: impl IntoIterator<Item = NodeId>) -> NodeKey {
    derive_key(master, responders)
}

#[derive(Debug, Error, PartialEq)]
pub enum KeyingError {
    #[error("no master key for node {0}")]
    MissingMaster(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone)]
struct KeyEntry {
    master: MasterKey,
    provisioned: NodeKey,
    provisioned_set: BTreeSet<NodeId>,
}

/// Per-node key state as loaded at deployment: master key, provisioned key
/// K_mu, and the two-hop id set it was derived from. Immutable after
/// provisioning.
#[derive(Debug, Clone, Default)]
pub struct KeyTable {
    entries: BTreeMap<NodeId, KeyEntry>,
}

impl KeyTable {
    pub fn master(&self, n: NodeId) -> Option<MasterKey> {
        self.entries.get(&n).map(|e| e.master)
    }

    /// The provisioned key K_mu.
    pub fn provisioned(&self, n: NodeId) -> Option<NodeKey> {
        self.entries.get(&n).map(|e| e.provisioned)
    }

    /// The two-hop id set captured at deployment.
    pub fn provisioned_set(&self, n: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.entries.get(&n).map(|e| &e.provisioned_set)
    }

    /// Debug dump: `id master_hex kmu_hex id,id,...` per line. Not consumed
    /// by any protocol path.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (id, e) in &self.entries {
            let ids: Vec<String> = e.provisioned_set.iter().map(|n| n.to_string()).collect();
            out.push_str(&format!(
                "{} {:016x} {:016x} {}\n",
                id,
                e.master.0,
                e.provisioned.0,
                if ids.is_empty() { "-".to_string() } else { ids.join(",") }
            ));
        }
        out
    }
}

/// Trusted setup: computes every node's K_mu over its realized two-hop set
/// and loads it before the run starts.
pub fn provision(
    topo: &Topology,
    masters: &BTreeMap<NodeId, MasterKey>,
) -> Result<KeyTable, KeyingError> {
    let mut entries = BTreeMap::new();
    for n in topo.node_ids() {
        let &master = masters.get(&n).ok_or(KeyingError::MissingMaster(n))?;
        let provisioned_set = topo.two_hop(n)?;
        let provisioned = derive_key(master, provisioned_set.iter().copied());
        entries.insert(
            n,
            KeyEntry {
                master,
                provisioned,
                provisioned_set,
            },
        );
    }
    Ok(KeyTable { entries })
}

/// Seeded generation of distinct per-node master keys, one draw per node in
/// ascending id order.
pub fn generate_masters(
    seed: u64,
    ids: impl IntoIterator<Item = NodeId>,
) -> BTreeMap<NodeId, MasterKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7374_6572_6b65); // "masterke"
    ids.into_iter()
        .map(|id| (id, MasterKey(rng.next_u64())))
        .collect()
}
