//! Unit-disc connectivity graph over node positions, with one-hop and
//! two-hop neighbor queries.
//!
//! Links are deterministic and loss-free at this layer: two nodes are
//! neighbors iff their euclidean distance is `<= range` (boundary ties are
//! in-range). Two-hop neighbors are nodes at graph distance exactly 2,
//! disjoint from the one-hop set and from the node itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Identity of a sensor node. Unique within a topology, totally ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("transmission range must be positive, got {0}")]
    NonPositiveRange(f64),
    #[error("topology needs at least one node")]
    Empty,
    #[error("random topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Immutable connectivity graph: positions, transmission range, and the
/// derived symmetric adjacency. Safe to share read-only across threads.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: BTreeMap<NodeId, Position>,
    range: f64,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    /// Builds the unit-disc graph from explicit placements.
    pub fn build(
        positions: impl IntoIterator<Item = (NodeId, Position)>,
        range: f64,
    ) -> Result<Self, TopologyError> {
        if !range.is_finite() || range <= 0.0 {
            return Err(TopologyError::NonPositiveRange(range));
        }
        let mut nodes = BTreeMap::new();
        for (id, pos) in positions {
            if nodes.insert(id, pos).is_some() {
                return Err(TopologyError::DuplicateNode(id));
            }
        }
        if nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.keys().map(|&id| (id, BTreeSet::new())).collect();
        let ids: Vec<NodeId> = nodes.keys().copied().collect();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if nodes[&a].distance(&nodes[&b]) <= range {
                    adjacency.get_mut(&a).unwrap().insert(b);
                    adjacency.get_mut(&b).unwrap().insert(a);
                }
            }
        }
        Ok(Topology {
            nodes,
            range,
            adjacency,
        })
    }

    /// Seeded uniform placement of `n` nodes over `area`. The same seed
    /// always yields the same topology.
    pub fn random(
        seed: u64,
        n: usize,
        area: (f64, f64),
        range: f64,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewNodes(n));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = (0..n).map(|i| {
            let x = rng.gen_range(0.0..=area.0);
            let y = rng.gen_range(0.0..=area.1);
            (NodeId(i as u32), Position::new(x, y))
        });
        // gen_range draws happen lazily; collect first so build sees them in order
        let positions: Vec<_> = positions.collect();
        Self::build(positions, range)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.contains_key(&n)
    }

    pub fn position(&self, n: NodeId) -> Option<Position> {
        self.nodes.get(&n).copied()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(&a).map_or(false, |s| s.contains(&b))
    }

    /// One-hop neighbor set of `n`.
    pub fn one_hop(&self, n: NodeId) -> Result<&BTreeSet<NodeId>, TopologyError> {
        self.adjacency.get(&n).ok_or(TopologyError::UnknownNode(n))
    }

    /// Nodes at graph distance exactly 2 from `n`: neighbors of neighbors,
    /// minus the one-hop set and `n` itself.
    pub fn two_hop(&self, n: NodeId) -> Result<BTreeSet<NodeId>, TopologyError> {
        let one = self.one_hop(n)?;
        let mut two = BTreeSet::new();
        for &m in one {
            for &k in &self.adjacency[&m] {
                if k != n && !one.contains(&k) {
                    two.insert(k);
                }
            }
        }
        Ok(two)
    }

    /// BFS hop distance, `None` if disconnected.
    pub fn hop_distance(&self, from: NodeId, to: NodeId) -> Option<u32> {
        self.bfs_tree(from).get(&to).map(|&(d, _)| d)
    }

    /// One shortest path `from..=to` (BFS with lowest-id parent tie-break),
    /// `None` if disconnected.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        if from == to {
            return self.contains(from).then(|| vec![from]);
        }
        let tree = self.bfs_tree(from);
        tree.get(&to)?;
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = tree[&cur].1?;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    fn bfs_tree(&self, root: NodeId) -> BTreeMap<NodeId, (u32, Option<NodeId>)> {
        let mut seen: BTreeMap<NodeId, (u32, Option<NodeId>)> = BTreeMap::new();
        if !self.contains(root) {
            return seen;
        }
        seen.insert(root, (0, None));
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let du = seen[&u].0;
            for &v in &self.adjacency[&u] {
                seen.entry(v).or_insert_with(|| {
                    queue.push_back(v);
                    (du + 1, Some(u))
                });
            }
        }
        seen
    }

    /// Plain-text form: header `range <meters>`, then one `id x y` line per
    /// node in ascending id order.
    pub fn to_text(&self) -> String {
        let mut out = format!("range {}\n", self.range);
        for (id, pos) in &self.nodes {
            out.push_str(&format!("{} {} {}\n", id, pos.x, pos.y));
        }
        out
    }

    /// Parses the `to_text` format. Reports the offending line on error.
    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let mut range: Option<f64> = None;
        let mut positions: Vec<(NodeId, Position)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            match fields.as_slice() {
                ["range", value] => {
                    range = Some(value.parse().map_err(|_| TopologyError::Parse {
                        line,
                        msg: format!("bad range value `{value}`"),
                    })?);
                }
                [id, x, y] => {
                    let id: u32 = id.parse().map_err(|_| TopologyError::Parse {
                        line,
                        msg: format!("bad node id `{id}`"),
                    })?;
                    let x: f64 = x.parse().map_err(|_| TopologyError::Parse {
                        line,
                        msg: format!("bad x coordinate `{x}`"),
                    })?;
                    let y: f64 = y.parse().map_err(|_| TopologyError::Parse {
                        line,
                        msg: format!("bad y coordinate `{y}`"),
                    })?;
                    positions.push((NodeId(id), Position::new(x, y)));
                }
                _ => {
                    return Err(TopologyError::Parse {
                        line,
                        msg: format!("expected `range <meters>` or `id x y`, got `{trimmed}`"),
                    })
                }
            }
        }
        let range = range.ok_or(TopologyError::Parse {
            line: 0,
            msg: "missing `range <meters>` header".into(),
        })?;
        Self::build(positions, range)
    }
}
