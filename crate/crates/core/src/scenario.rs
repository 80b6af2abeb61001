//! Scenario configuration: defaults, validation, and the flat key-value
//! text format the CLI loads.
//!
//! Format: one `key = value` pair per line, `#` comments and blank lines
//! ignored. An empty file is a valid scenario and runs with the defaults
//! below. Keys:
//!
//! ```text
//! seed = 1                   # master seed (placement, keys, attack placement, loss)
//! nodes = 30                 # node count for random placement
//! area = 600 600             # placement area, meters
//! range = 250                # transmission range, meters
//! hop_delay = 0.01           # per-hop delivery latency, time units
//! ack_window = 1.0           # probe answer collection window, time units
//! tx_cost = 2                # energy per transmission
//! rx_cost = 1                # energy per receipt
//! prevention = on            # on/off, true/false
//! source = 0                 # defaults to lowest node id
//! destination = 29           # defaults to highest node id
//! time_limit = 30            # simulation time limit, time units
//! loss = 0.0                 # uniform per-delivery loss probability
//! wormholes = 3              # count of seeded-random hidden_passive tunnels
//! wormhole = 2 11 hidden_passive 0.0   # explicit tunnel (a b mode [delay]);
//!                                      # explicit lines replace the random count
//! node = 0 15.5 20.0         # explicit placement (repeatable, overrides random)
//! topology = nodes.txt       # placement from a topology file (`range` header, `id x y` lines)
//! ```
//!
//! `topology` file references are resolved by the CLI relative to the
//! scenario file; the parser here only records the path.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::topology::{NodeId, Position};
use crate::wormhole::{WormholeLink, WormholeMode};

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub node_count: usize,
    pub area: (f64, f64),
    pub range: f64,
    pub hop_delay: f64,
    pub ack_window: f64,
    pub tx_cost: f64,
    pub rx_cost: f64,
    pub prevention_enabled: bool,
    /// Explicit tunnels. When empty, `auto_wormholes` seeded-random
    /// hidden-passive tunnels are injected instead.
    pub wormholes: Vec<WormholeLink>,
    pub auto_wormholes: usize,
    pub source: Option<NodeId>,
    pub destination: Option<NodeId>,
    pub sim_time_limit: f64,
    pub loss_probability: f64,
    /// Explicit node placement; `None` means seeded-random placement.
    pub placements: Option<Vec<(NodeId, Position)>>,
    /// Topology file reference from a scenario file, if any. The CLI loads
    /// it into `placements` + `range` before running.
    pub topology_file: Option<String>,
}

impl Default for ScenarioConfig {
    /// 30 nodes over 600x600 at range 250 with 3 wormholes, a 0.01 hop
    /// delay, a 1.0-unit ack window and a 30-unit time limit. The time
    /// limit is the nominal 0.3-unit discovery budget rescaled by the
    /// 0.01 hop-delay calibration so that prevention-enabled runs (one
    /// full ack window per checked hop) can finish.
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            node_count: 30,
            area: (600.0, 600.0),
            range: 250.0,
            hop_delay: 0.01,
            ack_window: 1.0,
            tx_cost: 2.0,
            rx_cost: 1.0,
            prevention_enabled: true,
            wormholes: Vec::new(),
            auto_wormholes: 3,
            source: None,
            destination: None,
            sim_time_limit: 30.0,
            loss_probability: 0.0,
            placements: None,
            topology_file: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl ScenarioConfig {
    /// Attack-free variant of `self`.
    pub fn without_wormholes(&self) -> Self {
        let mut cfg = self.clone();
        cfg.wormholes.clear();
        cfg.auto_wormholes = 0;
        cfg
    }

    pub fn with_prevention(&self, enabled: bool) -> Self {
        let mut cfg = self.clone();
        cfg.prevention_enabled = enabled;
        cfg
    }

    fn positive(field: &'static str, value: f64) -> Result<(), ScenarioError> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid {
                field,
                msg: format!("must be positive and finite, got {value}"),
            })
        }
    }

    fn non_negative(field: &'static str, value: f64) -> Result<(), ScenarioError> {
        if value >= 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid {
                field,
                msg: format!("must be non-negative and finite, got {value}"),
            })
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        Self::positive("range", self.range)?;
        Self::positive("hop_delay", self.hop_delay)?;
        Self::non_negative("ack_window", self.ack_window)?;
        Self::non_negative("tx_cost", self.tx_cost)?;
        Self::non_negative("rx_cost", self.rx_cost)?;
        Self::positive("time_limit", self.sim_time_limit)?;
        Self::positive("area", self.area.0)?;
        Self::positive("area", self.area.1)?;
        if !(0.0..1.0).contains(&self.loss_probability) {
            return Err(ScenarioError::Invalid {
                field: "loss",
                msg: format!("must be in [0, 1), got {}", self.loss_probability),
            });
        }
        if self.placements.is_none() && self.node_count < 2 {
            return Err(ScenarioError::Invalid {
                field: "nodes",
                msg: format!("random placement needs at least 2 nodes, got {}", self.node_count),
            });
        }
        if let Some(placements) = &self.placements {
            if placements.is_empty() {
                return Err(ScenarioError::Invalid {
                    field: "node",
                    msg: "explicit placement given but no nodes listed".into(),
                });
            }
            let mut seen = BTreeSet::new();
            for (id, _) in placements {
                if !seen.insert(*id) {
                    return Err(ScenarioError::Invalid {
                        field: "node",
                        msg: format!("duplicate node id {id}"),
                    });
                }
            }
        }
        for link in &self.wormholes {
            if !(link.tunnel_delay >= 0.0 && link.tunnel_delay.is_finite()) {
                return Err(ScenarioError::Invalid {
                    field: "wormhole",
                    msg: format!("tunnel delay must be non-negative, got {}", link.tunnel_delay),
                });
            }
        }
        if let (Some(s), Some(d)) = (self.source, self.destination) {
            if s == d {
                return Err(ScenarioError::Invalid {
                    field: "destination",
                    msg: format!("source and destination are both {s}"),
                });
            }
        }
        Ok(())
    }

    /// Parses the scenario text format. Unknown keys, malformed values and
    /// duplicate singleton keys are parse errors carrying the line number;
    /// semantic problems surface from `validate` with the field name.
    pub fn parse_str(text: &str) -> Result<Self, ScenarioError> {
        let mut cfg = ScenarioConfig::default();
        let mut explicit_nodes: Vec<(NodeId, Position)> = Vec::new();
        let mut seen: BTreeSet<&'static str> = BTreeSet::new();

        fn parse_as<T: std::str::FromStr>(
            line: usize,
            key: &str,
            value: &str,
        ) -> Result<T, ScenarioError> {
            value.parse().map_err(|_| ScenarioError::Parse {
                line,
                msg: format!("bad value `{value}` for `{key}`"),
            })
        }

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ScenarioError::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();

            let mut once = |name: &'static str| -> Result<(), ScenarioError> {
                if !seen.insert(name) {
                    return Err(ScenarioError::Parse {
                        line,
                        msg: format!("`{name}` given more than once"),
                    });
                }
                Ok(())
            };

            match key {
                "seed" => {
                    once("seed")?;
                    cfg.seed = parse_as(line, key, value)?;
                }
                "nodes" => {
                    once("nodes")?;
                    cfg.node_count = parse_as(line, key, value)?;
                }
                "area" => {
                    once("area")?;
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(ScenarioError::Parse {
                            line,
                            msg: format!("`area` needs two values, got `{value}`"),
                        });
                    }
                    cfg.area = (parse_as(line, key, parts[0])?, parse_as(line, key, parts[1])?);
                }
                "range" => {
                    once("range")?;
                    cfg.range = parse_as(line, key, value)?;
                }
                "hop_delay" => {
                    once("hop_delay")?;
                    cfg.hop_delay = parse_as(line, key, value)?;
                }
                "ack_window" => {
                    once("ack_window")?;
                    cfg.ack_window = parse_as(line, key, value)?;
                }
                "tx_cost" => {
                    once("tx_cost")?;
                    cfg.tx_cost = parse_as(line, key, value)?;
                }
                "rx_cost" => {
                    once("rx_cost")?;
                    cfg.rx_cost = parse_as(line, key, value)?;
                }
                "prevention" => {
                    once("prevention")?;
                    cfg.prevention_enabled = match value {
                        "on" | "true" | "1" => true,
                        "off" | "false" | "0" => false,
                        other => {
                            return Err(ScenarioError::Parse {
                                line,
                                msg: format!("`prevention` must be on/off, got `{other}`"),
                            })
                        }
                    };
                }
                "source" => {
                    once("source")?;
                    cfg.source = Some(NodeId(parse_as(line, key, value)?));
                }
                "destination" => {
                    once("destination")?;
                    cfg.destination = Some(NodeId(parse_as(line, key, value)?));
                }
                "time_limit" => {
                    once("time_limit")?;
                    cfg.sim_time_limit = parse_as(line, key, value)?;
                }
                "loss" => {
                    once("loss")?;
                    cfg.loss_probability = parse_as(line, key, value)?;
                }
                "wormholes" => {
                    once("wormholes")?;
                    cfg.auto_wormholes = parse_as(line, key, value)?;
                }
                "wormhole" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if !(parts.len() == 3 || parts.len() == 4) {
                        return Err(ScenarioError::Parse {
                            line,
                            msg: format!("`wormhole` needs `a b mode [delay]`, got `{value}`"),
                        });
                    }
                    let a = NodeId(parse_as(line, key, parts[0])?);
                    let b = NodeId(parse_as(line, key, parts[1])?);
                    let mode: WormholeMode =
                        parts[2].parse().map_err(|e| ScenarioError::Parse { line, msg: e })?;
                    let mut link = WormholeLink::new(a, b, mode);
                    if parts.len() == 4 {
                        link.tunnel_delay = parse_as(line, key, parts[3])?;
                    }
                    cfg.wormholes.push(link);
                }
                "node" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(ScenarioError::Parse {
                            line,
                            msg: format!("`node` needs `id x y`, got `{value}`"),
                        });
                    }
                    let id = NodeId(parse_as(line, key, parts[0])?);
                    let x = parse_as(line, key, parts[1])?;
                    let y = parse_as(line, key, parts[2])?;
                    explicit_nodes.push((id, Position::new(x, y)));
                }
                "topology" => {
                    once("topology")?;
                    cfg.topology_file = Some(value.to_string());
                }
                other => {
                    return Err(ScenarioError::Parse {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }

        if !explicit_nodes.is_empty() {
            if cfg.topology_file.is_some() {
                return Err(ScenarioError::Parse {
                    line: 0,
                    msg: "give either `node` lines or `topology`, not both".into(),
                });
            }
            cfg.placements = Some(explicit_nodes);
        }
        // explicit tunnels replace the seeded-random count
        if !cfg.wormholes.is_empty() {
            cfg.auto_wormholes = 0;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders a config back into the text format; `parse_str` of the dump
    /// reproduces an equal config.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("nodes = {}\n", self.node_count));
        out.push_str(&format!("area = {} {}\n", self.area.0, self.area.1));
        out.push_str(&format!("range = {}\n", self.range));
        out.push_str(&format!("hop_delay = {}\n", self.hop_delay));
        out.push_str(&format!("ack_window = {}\n", self.ack_window));
        out.push_str(&format!("tx_cost = {}\n", self.tx_cost));
        out.push_str(&format!("rx_cost = {}\n", self.rx_cost));
        out.push_str(&format!(
            "prevention = {}\n",
            if self.prevention_enabled { "on" } else { "off" }
        ));
        if let Some(s) = self.source {
            out.push_str(&format!("source = {s}\n"));
        }
        if let Some(d) = self.destination {
            out.push_str(&format!("destination = {d}\n"));
        }
        out.push_str(&format!("time_limit = {}\n", self.sim_time_limit));
        out.push_str(&format!("loss = {}\n", self.loss_probability));
        if self.wormholes.is_empty() {
            out.push_str(&format!("wormholes = {}\n", self.auto_wormholes));
        } else {
            for w in &self.wormholes {
                out.push_str(&format!(
                    "wormhole = {} {} {} {}\n",
                    w.end_a, w.end_b, w.mode, w.tunnel_delay
                ));
            }
        }
        if let Some(file) = &self.topology_file {
            out.push_str(&format!("topology = {file}\n"));
        }
        if let Some(placements) = &self.placements {
            for (id, pos) in placements {
                out.push_str(&format!("node = {} {} {}\n", id, pos.x, pos.y));
            }
        }
        out
    }
}
