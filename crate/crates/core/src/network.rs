//! Range-limited mesh between agents and static relays.
//!
//! Links exist between nodes on the same floor within radio range, and
//! between relay pairs declared as floor bridges. In multi-hop mode the
//! adjacency is the reachability relation of that link graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::world::{Pose, Scan};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("communication range must be positive, got {0}")]
    NonpositiveRange(f64),
    #[error("broadcast sender {0} is not a node of the snapshot")]
    UnknownSender(NodeId),
    #[error("loss probability must lie in [0, 1), got {0}")]
    InvalidLossProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Agent(u32),
    Relay(u32),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Agent(id) => write!(f, "a{id}"),
            NodeId::Relay(id) => write!(f, "r{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkMode {
    SingleHop,
    #[default]
    MultiHop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodePlacement {
    pub id: NodeId,
    pub position: Vec2,
    pub floor: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayNode {
    pub id: u32,
    pub position: Vec2,
    pub floor_id: u32,
    /// Relay on another floor this one is wired to.
    pub bridge: Option<u32>,
    pub appear_time: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivitySnapshot {
    pub tick: u64,
    nodes: Vec<NodeId>,
    adjacency: Vec<bool>,
}

impl ConnectivitySnapshot {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    /// `a_ij`; false when either node is absent.
    pub fn connected(&self, a: NodeId, b: NodeId) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.adjacency[i * self.nodes.len() + j],
            _ => false,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.nodes.len() + j]
    }

    /// Unordered connected pairs `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let n = self.nodes.len();
        (0..n).flat_map(move |i| {
            (i + 1..n)
                .filter(move |&j| self.adjacency[i * n + j])
                .map(move |j| (self.nodes[i], self.nodes[j]))
        })
    }
}

/// Builds `a_ij` for one tick. `bridges` lists relay pairs that are linked
/// regardless of floor and distance.
pub fn compute_connectivity(
    tick: u64,
    placements: &[NodePlacement],
    bridges: &[(NodeId, NodeId)],
    comm_range: f64,
    mode: LinkMode,
) -> Result<ConnectivitySnapshot, NetworkError> {
    if !(comm_range > 0.0) {
        return Err(NetworkError::NonpositiveRange(comm_range));
    }
    let mut sorted: Vec<&NodePlacement> = placements.iter().collect();
    sorted.sort_by_key(|p| p.id);
    let nodes: Vec<NodeId> = sorted.iter().map(|p| p.id).collect();
    let n = nodes.len();
    let mut link = vec![false; n * n];
    for i in 0..n {
        link[i * n + i] = true;
        for j in i + 1..n {
            let (a, b) = (sorted[i], sorted[j]);
            let linked = (a.floor == b.floor && (a.position - b.position).norm() <= comm_range)
                || bridges
                    .iter()
                    .any(|&(u, v)| (u, v) == (a.id, b.id) || (v, u) == (a.id, b.id));
            link[i * n + j] = linked;
            link[j * n + i] = linked;
        }
    }
    let adjacency = match mode {
        LinkMode::SingleHop => link,
        LinkMode::MultiHop => {
            let mut component = vec![usize::MAX; n];
            for start in 0..n {
                if component[start] != usize::MAX {
                    continue;
                }
                component[start] = start;
                let mut queue = VecDeque::from([start]);
                while let Some(u) = queue.pop_front() {
                    for v in 0..n {
                        if link[u * n + v] && component[v] == usize::MAX {
                            component[v] = start;
                            queue.push_back(v);
                        }
                    }
                }
            }
            (0..n * n)
                .map(|k| component[k / n] == component[k % n])
                .collect()
        }
    };
    Ok(ConnectivitySnapshot {
        tick,
        nodes,
        adjacency,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateBroadcast {
    pub sender: u32,
    pub tick: u64,
    pub pose: Pose,
    pub scan: Scan,
    pub waypoint: Option<Vec2>,
}

pub type Inboxes = BTreeMap<u32, Vec<StateBroadcast>>;

/// Routes each broadcast to every connected agent. Every connected
/// (sender, receiver) pair consumes one uniform draw, in ascending
/// (sender, receiver) order; the message is dropped when the draw falls
/// below `loss_prob`. Relays relay but never receive.
pub fn deliver_broadcasts<R: Rng + ?Sized>(
    snapshot: &ConnectivitySnapshot,
    outbox: &[StateBroadcast],
    loss_prob: f64,
    rng: &mut R,
) -> Result<Inboxes, NetworkError> {
    if !(0.0..1.0).contains(&loss_prob) {
        return Err(NetworkError::InvalidLossProbability(loss_prob));
    }
    let receivers: Vec<(usize, u32)> = snapshot
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match n {
            NodeId::Agent(id) => Some((i, *id)),
            NodeId::Relay(_) => None,
        })
        .collect();
    let mut inboxes: Inboxes = receivers.iter().map(|&(_, id)| (id, Vec::new())).collect();
    let mut order: Vec<&StateBroadcast> = outbox.iter().collect();
    order.sort_by_key(|b| b.sender);
    for b in order {
        let sender = NodeId::Agent(b.sender);
        let si = snapshot
            .index_of(sender)
            .ok_or(NetworkError::UnknownSender(sender))?;
        for &(ri, rid) in &receivers {
            if rid == b.sender || !snapshot.at(ri, si) {
                continue;
            }
            let draw: f64 = rng.gen();
            if draw >= loss_prob {
                inboxes.get_mut(&rid).expect("receiver inbox").push(b.clone());
            }
        }
    }
    Ok(inboxes)
}

/// Identity of a scan within the collection an agent has integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScanKey {
    pub source: u32,
    pub tick: u64,
}

impl ScanKey {
    pub fn of(scan: &Scan) -> Self {
        Self {
            source: scan.source_agent,
            tick: scan.timestamp,
        }
    }
}

/// Keys of every scan an agent has integrated so far.
pub type SensedLog = BTreeSet<ScanKey>;

/// Adds the agent's own scan and every delivered scan. Returns how many keys
/// were new.
pub fn append_sensed_log<'a, I>(log: &mut SensedLog, own: Option<&Scan>, inbox: I) -> usize
where
    I: IntoIterator<Item = &'a StateBroadcast>,
{
    let before = log.len();
    if let Some(scan) = own {
        log.insert(ScanKey::of(scan));
    }
    for b in inbox {
        log.insert(ScanKey::of(&b.scan));
    }
    log.len() - before
}
