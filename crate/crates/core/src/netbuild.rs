//! The layered network: walls become layers, tiles become nodes and every
//! line-of-sight power transfer between consecutive walls becomes a link.
//!
//! The transmitter feeds the first layer through input links, the last layer
//! feeds the receiver through output links. Links only ever join consecutive
//! layers.

use std::fmt;

use thiserror::Error;

use crate::geometry::{los_visible, unit_dir, Tile, Vec2, WallSegment};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("disconnected layer {0}: no tile is reachable from the transmitter and reaches the receiver")]
    DisconnectedLayer(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub layer: usize,
    pub index: usize,
}

impl NodeId {
    pub const fn new(layer: usize, index: usize) -> Self {
        Self { layer, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.layer, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Tx,
    Node(NodeId),
    Rx,
}

/// A directed power transfer. `dir` points from the source to the sink, so it
/// is the outgoing direction `o` at the source and the impinging direction `d`
/// at the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: Endpoint,
    pub to: Endpoint,
    pub dir: Vec2,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileNode {
    pub tile: Tile,
    /// Link ids, in construction order.
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredNet {
    pub layers: Vec<Vec<TileNode>>,
    pub links: Vec<Link>,
    /// Tx -> first layer, one per first-layer node in node order.
    pub input_links: Vec<usize>,
    /// `inter_links[k]` joins layer `k` to layer `k + 1`.
    pub inter_links: Vec<Vec<usize>>,
    /// Last layer -> Rx, one per last-layer node in node order.
    pub output_links: Vec<usize>,
    pub tx: Vec2,
    pub rx: Vec2,
    /// Obstacles used for the line-of-sight check.
    pub walls: Vec<WallSegment>,
}

impl LayeredNet {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn node(&self, id: NodeId) -> &TileNode {
        &self.layers[id.layer][id.index]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, layer)| (0..layer.len()).map(move |l| NodeId::new(k, l)))
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn node_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    /// Outgoing directions of a node, in outgoing-link order.
    pub fn outgoing_dirs(&self, id: NodeId) -> Vec<Vec2> {
        self.node(id).outgoing.iter().map(|&j| self.links[j].dir).collect()
    }
}

/// Builds the network for `scenario`.
///
/// Tiles that cannot be reached from the transmitter, or cannot pass power on
/// toward the receiver, are left out; a layer left empty is an error.
pub fn build_layered_net(scenario: &Scenario) -> Result<LayeredNet, BuildError> {
    let problems = scenario.validate();
    if !problems.is_empty() {
        return Err(BuildError::Scenario(problems.join("; ")));
    }
    let walls = scenario.wall_segments();
    let tx = scenario.transmitter().expect("validated").position;
    let rx = scenario.receiver().expect("validated").position;

    let candidates: Vec<Vec<Tile>> =
        scenario.layer_order.iter().map(|&id| walls[id].tiles(id)).collect();
    let depth = candidates.len();

    let visible = |p: Vec2, q: Vec2| p != q && los_visible(p, q, &walls);

    // A layer no power can enter is the one to report, before pruning empties its neighbors.
    for k in 0..depth {
        let entered = if k == 0 {
            candidates[0].iter().any(|t| visible(tx, t.center))
        } else {
            candidates[k - 1]
                .iter()
                .any(|p| candidates[k].iter().any(|t| visible(p.center, t.center)))
        };
        if !entered {
            return Err(BuildError::DisconnectedLayer(k));
        }
    }
    if !candidates[depth - 1].iter().any(|t| visible(t.center, rx)) {
        return Err(BuildError::DisconnectedLayer(depth - 1));
    }

    // keep[k][i]: candidate i of layer k survives pruning
    let mut keep: Vec<Vec<bool>> = candidates
        .iter()
        .enumerate()
        .map(|(k, layer)| {
            layer
                .iter()
                .map(|t| {
                    (k > 0 || visible(tx, t.center)) && (k + 1 < depth || visible(t.center, rx))
                })
                .collect()
        })
        .collect();

    // Iterate to a fixed point: a node needs a kept predecessor and a kept successor.
    loop {
        let mut changed = false;
        for k in 0..depth {
            for i in 0..candidates[k].len() {
                if !keep[k][i] {
                    continue;
                }
                let c = candidates[k][i].center;
                let has_pred = k == 0
                    || (0..candidates[k - 1].len())
                        .any(|p| keep[k - 1][p] && visible(candidates[k - 1][p].center, c));
                let has_succ = k + 1 == depth
                    || (0..candidates[k + 1].len())
                        .any(|s| keep[k + 1][s] && visible(c, candidates[k + 1][s].center));
                if !(has_pred && has_succ) {
                    keep[k][i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut layers: Vec<Vec<TileNode>> = Vec::with_capacity(depth);
    for (k, layer) in candidates.into_iter().enumerate() {
        let nodes: Vec<TileNode> = layer
            .into_iter()
            .zip(&keep[k])
            .filter(|(_, &kept)| kept)
            .map(|(tile, _)| TileNode { tile, incoming: Vec::new(), outgoing: Vec::new() })
            .collect();
        if nodes.is_empty() {
            return Err(BuildError::DisconnectedLayer(k));
        }
        layers.push(nodes);
    }

    let mut links = Vec::new();
    let push = |links: &mut Vec<Link>, from: Endpoint, to: Endpoint, p: Vec2, q: Vec2| {
        let (dir, distance) = unit_dir(p, q).expect("distinct points");
        links.push(Link { from, to, dir, distance });
        links.len() - 1
    };

    let mut input_links = Vec::with_capacity(layers[0].len());
    for l in 0..layers[0].len() {
        let id = push(&mut links, Endpoint::Tx, Endpoint::Node(NodeId::new(0, l)), tx, layers[0][l].tile.center);
        layers[0][l].incoming.push(id);
        input_links.push(id);
    }

    let mut inter_links = Vec::with_capacity(depth.saturating_sub(1));
    for k in 0..depth.saturating_sub(1) {
        let mut pair = Vec::new();
        for u in 0..layers[k].len() {
            for v in 0..layers[k + 1].len() {
                let (p, q) = (layers[k][u].tile.center, layers[k + 1][v].tile.center);
                if !visible(p, q) {
                    continue;
                }
                let id = push(
                    &mut links,
                    Endpoint::Node(NodeId::new(k, u)),
                    Endpoint::Node(NodeId::new(k + 1, v)),
                    p,
                    q,
                );
                layers[k][u].outgoing.push(id);
                layers[k + 1][v].incoming.push(id);
                pair.push(id);
            }
        }
        inter_links.push(pair);
    }

    let last = depth - 1;
    let mut output_links = Vec::with_capacity(layers[last].len());
    for l in 0..layers[last].len() {
        let id = push(&mut links, Endpoint::Node(NodeId::new(last, l)), Endpoint::Rx, layers[last][l].tile.center, rx);
        layers[last][l].outgoing.push(id);
        output_links.push(id);
    }

    Ok(LayeredNet { layers, links, input_links, inter_links, output_links, tx, rx, walls })
}

/// Checks every structural invariant of `net`; returns one message per violation.
pub fn validate_net(net: &LayeredNet) -> Vec<String> {
    let mut out = Vec::new();
    let depth = net.layers.len();
    if depth == 0 {
        out.push("net has no layers".to_string());
        return out;
    }
    let layer_of = |e: Endpoint| -> Option<isize> {
        match e {
            Endpoint::Tx => Some(-1),
            Endpoint::Node(id) => Some(id.layer as isize),
            Endpoint::Rx => Some(depth as isize),
        }
    };
    let endpoint_pos = |e: Endpoint| -> Option<Vec2> {
        match e {
            Endpoint::Tx => Some(net.tx),
            Endpoint::Rx => Some(net.rx),
            Endpoint::Node(id) => net.layers.get(id.layer)?.get(id.index).map(|n| n.tile.center),
        }
    };

    for (i, link) in net.links.iter().enumerate() {
        if let (Some(a), Some(b)) = (layer_of(link.from), layer_of(link.to)) {
            if b != a + 1 {
                out.push(format!("non-consecutive link {i}: layer {a} -> layer {b}"));
            }
        }
        if !link.dir.is_unit() {
            out.push(format!("link {i}: direction is not a unit vector"));
        }
        match (endpoint_pos(link.from), endpoint_pos(link.to)) {
            (Some(p), Some(q)) => {
                if p == q || !los_visible(p, q, &net.walls) {
                    out.push(format!("link {i}: endpoints are not in line of sight"));
                }
            }
            _ => out.push(format!("link {i}: endpoint does not exist")),
        }
    }

    for id in net.node_ids() {
        let node = net.node(id);
        if node.incoming.is_empty() {
            out.push(format!("node {id} has no incoming links"));
        }
        if node.outgoing.is_empty() {
            out.push(format!("node {id} has no outgoing links"));
        }
        for &j in &node.incoming {
            if net.links.get(j).map(|l| l.to) != Some(Endpoint::Node(id)) {
                out.push(format!("node {id}: incoming link {j} does not end at the node"));
            }
        }
        for &j in &node.outgoing {
            if net.links.get(j).map(|l| l.from) != Some(Endpoint::Node(id)) {
                out.push(format!("node {id}: outgoing link {j} does not start at the node"));
            }
        }
    }
    out
}
