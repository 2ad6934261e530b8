//! Per-tile functions for the ray tracer.
//!
//! Three ways to configure an environment: read the functions straight off a
//! trained network, leave every tile as a plain mirror, or route each
//! transmitter ray greedily with one function per tile.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::learner::{tile_weights, NetState, Omegas};
use crate::netbuild::{Endpoint, LayeredNet, NodeId};
use crate::raytracer::{emit_rays, first_tile_hit, TraceError};
use crate::scenario::{InactiveFunction, Scenario};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("routing failure: no free tile for rays {stranded:?}")]
    RoutingFailure { stranded: Vec<usize> },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Tile `tile` of wall `wall`; serialized as `"wall:tile"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileKey {
    pub wall: usize,
    pub tile: usize,
}

impl TileKey {
    pub const fn new(wall: usize, tile: usize) -> Self {
        Self { wall, tile }
    }
}

impl fmt::Display for TileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.wall, self.tile)
    }
}

impl FromStr for TileKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (w, t) = s.split_once(':').ok_or_else(|| format!("bad tile key {s:?}"))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad tile key {s:?}: {e}"));
        Ok(Self::new(parse(w)?, parse(t)?))
    }
}

impl Serialize for TileKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TileKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TileFunction {
    Steer,
    CollimateSteer,
    Absorb,
    Specular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteTarget {
    Tile(TileKey),
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOut {
    pub dir: Vec2,
    pub fraction: f64,
    pub target: RouteTarget,
}

/// What a tile does with a wave arriving along `incoming`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub incoming: Vec2,
    pub outgoing: Vec<RouteOut>,
}

impl Route {
    pub fn single(incoming: Vec2, dir: Vec2, target: RouteTarget) -> Self {
        Self { incoming, outgoing: vec![RouteOut { dir, fraction: 1.0, target }] }
    }

    pub fn fraction_sum(&self) -> f64 {
        self.outgoing.iter().map(|o| o.fraction).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileConfig {
    pub function: TileFunction,
    #[serde(default)]
    pub routes: Vec<Route>,
    pub active: bool,
}

impl TileConfig {
    pub fn absorb() -> Self {
        Self { function: TileFunction::Absorb, routes: Vec::new(), active: false }
    }

    pub fn specular() -> Self {
        Self { function: TileFunction::Specular, routes: Vec::new(), active: false }
    }

    pub fn steer(routes: Vec<Route>) -> Self {
        Self { function: TileFunction::Steer, routes, active: true }
    }

    fn inactive(kind: InactiveFunction) -> Self {
        match kind {
            InactiveFunction::Absorb => Self::absorb(),
            InactiveFunction::Specular => Self::specular(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvironmentConfig {
    pub scheme_name: String,
    pub tiles: BTreeMap<TileKey, TileConfig>,
}

impl EnvironmentConfig {
    pub fn active_count(&self) -> usize {
        self.tiles.values().filter(|t| t.active).count()
    }

    /// Active tiles on each wall of `layer_order`.
    pub fn active_per_layer(&self, layer_order: &[usize]) -> Vec<usize> {
        layer_order
            .iter()
            .map(|&w| self.tiles.iter().filter(|(k, t)| k.wall == w && t.active).count())
            .collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn coated_keys(walls: &[crate::geometry::WallSegment]) -> impl Iterator<Item = TileKey> + '_ {
    walls
        .iter()
        .enumerate()
        .filter(|(_, w)| w.coated)
        .flat_map(|(id, w)| (0..w.tile_count).map(move |t| TileKey::new(id, t)))
}

fn node_key(net: &LayeredNet, id: NodeId) -> TileKey {
    let t = &net.node(id).tile;
    TileKey::new(t.wall_id, t.index_in_wall)
}

fn target_of(net: &LayeredNet, to: Endpoint) -> RouteTarget {
    match to {
        Endpoint::Node(id) => RouteTarget::Tile(node_key(net, id)),
        _ => RouteTarget::Receiver,
    }
}

/// Reads the per-tile functions off a trained network.
///
/// A node carrying at least `activity_threshold` of the total input becomes a
/// collimating steerer whose routes are its link weights for every powered
/// incoming direction; every other coated tile gets `inactive`.
pub fn interpret_trained_net(
    net: &LayeredNet,
    omegas: &Omegas,
    state: &NetState,
    activity_threshold: f64,
    inactive: InactiveFunction,
) -> Result<EnvironmentConfig, ConfigError> {
    if !omegas.matches(net) || state.link_power.len() != net.links.len() {
        return Err(ConfigError::Contract("state does not belong to this net".into()));
    }
    let mut tiles: BTreeMap<TileKey, TileConfig> =
        coated_keys(&net.walls).map(|k| (k, TileConfig::inactive(inactive))).collect();
    let total_in = state.total_input(net);

    for id in net.node_ids() {
        let node = net.node(id);
        let impinging = state.impinging(net, id);
        if impinging < activity_threshold * total_in {
            continue;
        }
        let outs = net.outgoing_dirs(id);
        let routes = node
            .incoming
            .iter()
            .filter(|&&i| state.link_power[i] > 0.0)
            .map(|&i| {
                let d = net.links[i].dir;
                let w = tile_weights(node.tile.base_normal, omegas[id], d, &outs);
                Route {
                    incoming: d,
                    outgoing: node
                        .outgoing
                        .iter()
                        .zip(w)
                        .map(|(&j, fraction)| RouteOut {
                            dir: net.links[j].dir,
                            fraction,
                            target: target_of(net, net.links[j].to),
                        })
                        .collect(),
                }
            })
            .collect();
        tiles.insert(
            node_key(net, id),
            TileConfig { function: TileFunction::CollimateSteer, routes, active: true },
        );
    }
    Ok(EnvironmentConfig { scheme_name: "nnconfig".into(), tiles })
}

/// Every coated tile is a plain mirror.
pub fn regular_config(scenario: &Scenario) -> EnvironmentConfig {
    let walls = scenario.wall_segments();
    EnvironmentConfig {
        scheme_name: "regular".into(),
        tiles: coated_keys(&walls).map(|k| (k, TileConfig::specular())).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpRouting {
    pub config: EnvironmentConfig,
    /// Rays whose first hit is not a tile of the first layer.
    pub unreachable: Vec<usize>,
    /// Tile chain of every routed ray, first layer first.
    pub paths: BTreeMap<usize, Vec<TileKey>>,
}

/// Simplified greedy ray router: one route per tile, every ray routed on its
/// own chain of tiles from the first layer to the receiver.
///
/// Each transmitter ray claims the first-layer tile it hits. From there it is
/// sent to the free next-layer tile whose link is closest in angle to the
/// ray's mirror reflection, and so on; last-layer tiles steer to the receiver.
pub fn kp_config(scenario: &Scenario, net: &LayeredNet) -> Result<KpRouting, ConfigError> {
    let tx = scenario.transmitter().ok_or(TraceError::MissingUser("transmitter"))?;
    let rays = emit_rays(tx, scenario.physics.ray_count, 1.0)?;
    let walls = &net.walls;
    let first_wall = net.layers[0][0].tile.wall_id;

    let mut tiles: BTreeMap<TileKey, TileConfig> =
        coated_keys(walls).map(|k| (k, TileConfig::absorb())).collect();
    let mut used: Vec<Vec<bool>> = net.layers.iter().map(|l| vec![false; l.len()]).collect();
    let mut unreachable = Vec::new();
    let mut stranded = Vec::new();
    let mut paths = BTreeMap::new();

    'rays: for (ray_id, ray) in rays.iter().enumerate() {
        let hit = first_tile_hit(ray.origin, ray.direction, walls);
        let start = hit.and_then(|(wall, tile)| {
            (wall == first_wall)
                .then(|| net.layers[0].iter().position(|n| n.tile.index_in_wall == tile))
                .flatten()
        });
        let Some(start) = start else {
            unreachable.push(ray_id);
            continue;
        };
        if used[0][start] {
            stranded.push(ray_id);
            continue;
        }

        // pick the chain first, commit only if it reaches the receiver
        let mut chain = vec![NodeId::new(0, start)];
        let mut claimed = used.clone();
        claimed[0][start] = true;
        let mut incoming = ray.direction;
        let mut hops: Vec<(Vec2, usize)> = Vec::new();
        for _ in 0..net.depth() {
            let here = *chain.last().expect("non-empty");
            let node = net.node(here);
            let mirror = crate::geometry::reflect_unchecked(incoming, node.tile.base_normal);
            let pick = node
                .outgoing
                .iter()
                .filter(|&&j| match net.links[j].to {
                    Endpoint::Node(n) => !claimed[n.layer][n.index],
                    _ => true,
                })
                .min_by(|&&a, &&b| {
                    let ca = net.links[a].dir.dot(mirror);
                    let cb = net.links[b].dir.dot(mirror);
                    cb.total_cmp(&ca)
                });
            let Some(&j) = pick else {
                stranded.push(ray_id);
                continue 'rays;
            };
            hops.push((incoming, j));
            incoming = net.links[j].dir;
            match net.links[j].to {
                Endpoint::Node(n) => {
                    claimed[n.layer][n.index] = true;
                    chain.push(n);
                }
                _ => break,
            }
        }
        used = claimed;
        for (&node, &(incoming, j)) in chain.iter().zip(&hops) {
            let link = &net.links[j];
            tiles.insert(
                node_key(net, node),
                TileConfig::steer(vec![Route::single(incoming, link.dir, target_of(net, link.to))]),
            );
        }
        paths.insert(ray_id, chain.iter().map(|&n| node_key(net, n)).collect());
    }

    if !stranded.is_empty() {
        return Err(ConfigError::RoutingFailure { stranded });
    }
    Ok(KpRouting { config: EnvironmentConfig { scheme_name: "kpconfig".into(), tiles }, unreachable, paths })
}
