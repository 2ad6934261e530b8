//! Helpers shared by the integration tests.

#![allow(dead_code)]

use pwe::geometry::{unit_dir, Tile};
use pwe::learner::{Omegas, Targets};
use pwe::netbuild::{Endpoint, Link, TileNode};
use pwe::{LayeredNet, NodeId, Vec2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A fully connected net of `sizes.len()` layers whose tiles alternate
/// between a floor at y = 0 (facing up) and a ceiling at y = 3 (facing down),
/// so that power zig-zags from a transmitter on the left to a receiver on the
/// right. Positions are jittered by `rng`.
pub fn zigzag_net(sizes: &[usize], rng: &mut ChaCha8Rng) -> LayeredNet {
    const HEIGHT: f64 = 3.0;
    let on_floor = |k: usize| k.is_multiple_of(2);
    let mut layers: Vec<Vec<TileNode>> = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let (y, normal) = if on_floor(k) { (0.0, Vec2::new(0.0, 1.0)) } else { (HEIGHT, Vec2::new(0.0, -1.0)) };
            (0..n)
                .map(|l| TileNode {
                    tile: Tile {
                        center: Vec2::new(3.0 * k as f64 + l as f64 + rng.random_range(-0.3..=0.3), y),
                        width: 1.0,
                        wall_id: k,
                        index_in_wall: l,
                        base_normal: normal,
                    },
                    incoming: Vec::new(),
                    outgoing: Vec::new(),
                })
                .collect()
        })
        .collect();
    let depth = sizes.len();
    let tx = Vec2::new(-3.0, HEIGHT);
    let rx = Vec2::new(3.0 * depth as f64 + 1.0, if on_floor(depth) { 0.0 } else { HEIGHT });

    let mut links = Vec::new();
    let mut connect = |layers: &mut Vec<Vec<TileNode>>, from: Endpoint, to: Endpoint| {
        let at = |e: Endpoint| match e {
            Endpoint::Tx => tx,
            Endpoint::Rx => rx,
            Endpoint::Node(id) => layers[id.layer][id.index].tile.center,
        };
        let (dir, distance) = unit_dir(at(from), at(to)).expect("distinct points");
        links.push(Link { from, to, dir, distance });
        let id = links.len() - 1;
        if let Endpoint::Node(n) = from {
            layers[n.layer][n.index].outgoing.push(id);
        }
        if let Endpoint::Node(n) = to {
            layers[n.layer][n.index].incoming.push(id);
        }
        id
    };

    let input_links = (0..sizes[0]).map(|l| connect(&mut layers, Endpoint::Tx, Endpoint::Node(NodeId::new(0, l)))).collect();
    let mut inter_links = Vec::new();
    for k in 0..depth - 1 {
        let mut these = Vec::new();
        for l in 0..sizes[k] {
            for m in 0..sizes[k + 1] {
                these.push(connect(&mut layers, Endpoint::Node(NodeId::new(k, l)), Endpoint::Node(NodeId::new(k + 1, m))));
            }
        }
        inter_links.push(these);
    }
    let output_links =
        (0..sizes[depth - 1]).map(|l| connect(&mut layers, Endpoint::Node(NodeId::new(depth - 1, l)), Endpoint::Rx)).collect();

    LayeredNet { layers, links, input_links, inter_links, output_links, tx, rx, walls: Vec::new() }
}

/// Random net with 1 to 3 layers of 1 to 3 nodes each.
pub fn random_small_net(rng: &mut ChaCha8Rng) -> LayeredNet {
    let depth = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
    zigzag_net(&sizes, rng)
}

/// Angles drawn uniformly from `(-limit, limit)` radians.
pub fn random_omegas(net: &LayeredNet, limit: f64, rng: &mut ChaCha8Rng) -> Omegas {
    Omegas(net.layers.iter().map(|l| (0..l.len()).map(|_| rng.random_range(-limit..limit)).collect()).collect())
}

/// Random positive inputs and ideals, each summing to one.
pub fn random_targets(net: &LayeredNet, rng: &mut ChaCha8Rng) -> Targets {
    let mut draw = |n: usize| {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / sum).collect::<Vec<_>>()
    };
    let inputs = draw(net.layers[0].len());
    let ideal = draw(net.layers[net.depth() - 1].len());
    Targets { inputs, ideal }
}
