//! 2D ray tracer used to check a configuration physically.
//!
//! Rays leave the transmitter following a single-lobe sinusoidal pattern,
//! bounce off tiles according to their configured function, and deposit power
//! when they pass through the receiver aperture. Programmed tiles emit
//! collimated beams; everything else spreads with `1/r^2` over the unfolded
//! path. Every watt emitted ends up in exactly one ledger entry of the result.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::configurators::{EnvironmentConfig, TileFunction, TileKey};
use crate::geometry::{reflect_unchecked, unit_dir, Vec2, WallSegment};
use crate::scenario::{Scenario, User};

/// Minimum cosine between a ray and a stored route direction.
pub const ROUTE_MATCH_COS: f64 = 0.9;
/// Live rays allowed per source ray before the weakest are pruned.
pub const MAX_LIVE_RAYS: usize = 64;
/// Reference distance of the spreading law, meters.
pub const SPREADING_REF_M: f64 = 1.0;
const HIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("ray count must be at least 1")]
    NoRays,
    #[error("lobe width {0} deg outside (0, 180]")]
    BadLobe(f64),
    #[error("no configuration for coated tile {0}")]
    ConfigGap(TileKey),
    #[error("scenario has no {0}")]
    MissingUser(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    pub direction: Vec2,
    pub power_w: f64,
    pub collimated: bool,
    /// Unfolded length travelled so far, meters.
    pub path_len_m: f64,
    pub bounces: usize,
    /// Power the ray would carry without any per-bounce loss.
    pub lossless_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub ray_id: usize,
    pub from: Vec2,
    pub to: Vec2,
    pub power_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Received,
    Absorbed,
    BounceLimit,
    Escaped,
    Pruned,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TraceResult {
    pub segments: Vec<Segment>,
    pub emitted_w: f64,
    /// Power deposited at the receiver, after spreading.
    pub received_w: f64,
    /// Power that reached the receiver aperture, before spreading.
    pub intercepted_w: f64,
    /// `intercepted_w` with the per-bounce losses undone.
    pub intercepted_lossless_w: f64,
    pub absorbed_w: f64,
    pub bounce_loss_w: f64,
    pub spreading_loss_w: f64,
    /// Power dropped at the bounce limit or by pruning.
    pub truncated_w: f64,
    pub escaped_w: f64,
    pub terminations: BTreeMap<Termination, usize>,
}

impl TraceResult {
    pub fn absorbed_fraction(&self) -> f64 {
        if self.emitted_w > 0.0 {
            self.absorbed_w / self.emitted_w
        } else {
            0.0
        }
    }

    /// Sum of every ledger entry; equals `emitted_w` up to rounding.
    pub fn accounted_w(&self) -> f64 {
        self.received_w
            + self.spreading_loss_w
            + self.absorbed_w
            + self.bounce_loss_w
            + self.truncated_w
            + self.escaped_w
    }
}

/// Received power level; zero power has no dBm value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalLevel {
    Dbm(f64),
    NoSignal,
}

impl SignalLevel {
    pub fn dbm(self) -> Option<f64> {
        match self {
            SignalLevel::Dbm(v) => Some(v),
            SignalLevel::NoSignal => None,
        }
    }
}

impl fmt::Display for SignalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalLevel::Dbm(v) => write!(f, "{v:.2}"),
            SignalLevel::NoSignal => f.write_str("no signal"),
        }
    }
}

pub fn w_to_dbm(watts: f64) -> SignalLevel {
    if watts > 0.0 {
        SignalLevel::Dbm(10.0 * (watts * 1000.0).log10())
    } else {
        SignalLevel::NoSignal
    }
}

pub fn received_power_dbm(result: &TraceResult) -> SignalLevel {
    w_to_dbm(result.received_w)
}

/// Antenna gain of the single-lobe pattern at `offset_deg` from boresight.
pub fn lobe_gain(offset_deg: f64, lobe_deg: f64) -> f64 {
    (std::f64::consts::PI * offset_deg / lobe_deg).cos()
}

/// `n` rays evenly spaced across the transmitter lobe (half-step inset from
/// the edges), each carrying its share of `p_total` by antenna gain.
pub fn emit_rays(tx: &User, n: usize, p_total: f64) -> Result<Vec<Ray>, TraceError> {
    if n == 0 {
        return Err(TraceError::NoRays);
    }
    let alpha = tx.lobe_deg;
    if !(alpha > 0.0 && alpha <= 180.0) {
        return Err(TraceError::BadLobe(alpha));
    }
    let step = alpha / n as f64;
    let offsets: Vec<f64> = (0..n).map(|i| -alpha / 2.0 + (i as f64 + 0.5) * step).collect();
    let gains: Vec<f64> = offsets.iter().map(|&psi| lobe_gain(psi, alpha)).collect();
    let total: f64 = gains.iter().sum();
    Ok(offsets
        .iter()
        .zip(&gains)
        .map(|(&psi, &g)| {
            let power = p_total * g / total;
            Ray {
                origin: tx.position,
                direction: Vec2::from_angle((tx.boresight_deg + psi).to_radians()),
                power_w: power,
                collimated: false,
                path_len_m: 0.0,
                bounces: 0,
                lossless_w: power,
            }
        })
        .collect())
}

struct Hit {
    t: f64,
    wall: usize,
    point: Vec2,
    /// Position along the wall, 0 at `a`, 1 at `b`.
    s: f64,
}

fn nearest_hit(origin: Vec2, dir: Vec2, walls: &[WallSegment]) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, w) in walls.iter().enumerate() {
        let e = w.b - w.a;
        let denom = dir.cross(e);
        if denom.abs() < 1e-15 {
            continue;
        }
        let ao = w.a - origin;
        let t = ao.cross(e) / denom;
        let s = ao.cross(dir) / denom;
        if t > HIT_EPS && (-1e-12..=1.0 + 1e-12).contains(&s) && best.as_ref().is_none_or(|b| t < b.t) {
            best = Some(Hit { t, wall: i, point: origin + dir * t, s: s.clamp(0.0, 1.0) });
        }
    }
    best
}

/// Wall and tile index of the first coated tile front face hit, if the first
/// wall along the ray is one.
pub fn first_tile_hit(origin: Vec2, dir: Vec2, walls: &[WallSegment]) -> Option<(usize, usize)> {
    let hit = nearest_hit(origin, dir, walls)?;
    let wall = &walls[hit.wall];
    let tile = wall.tile_at(hit.s).filter(|_| dir.dot(wall.base_normal) < 0.0)?;
    Some((hit.wall, tile))
}

struct Scene<'a> {
    walls: Vec<WallSegment>,
    config: &'a EnvironmentConfig,
    rx: &'a User,
    aperture_half: f64,
    bounce_keep: f64,
    max_bounces: usize,
    rx_gate: bool,
}

impl Scene<'_> {
    /// Ray parameter at which the ray passes through the receiver aperture.
    fn rx_crossing(&self, ray: &Ray) -> Option<f64> {
        let to_rx = self.rx.position - ray.origin;
        let t = to_rx.dot(ray.direction);
        if t <= HIT_EPS {
            return None;
        }
        if to_rx.cross(ray.direction).abs() > self.aperture_half {
            return None;
        }
        if self.rx_gate {
            let arrival = (-ray.direction).angle().to_degrees();
            let mut off = (arrival - self.rx.boresight_deg).rem_euclid(360.0);
            if off > 180.0 {
                off = 360.0 - off;
            }
            if off > self.rx.lobe_deg / 2.0 {
                return None;
            }
        }
        Some(t)
    }
}

/// Traces `rays` through the floorplan of `scenario` configured by `config`.
pub fn trace(scenario: &Scenario, config: &EnvironmentConfig, rays: &[Ray]) -> Result<TraceResult, TraceError> {
    let rx = scenario.receiver().ok_or(TraceError::MissingUser("receiver"))?;
    let scene = Scene {
        walls: scenario.wall_segments(),
        config,
        rx,
        aperture_half: scenario.physics.rx_aperture_m / 2.0,
        bounce_keep: 1.0 - scenario.physics.bounce_loss,
        max_bounces: scenario.physics.max_bounces,
        rx_gate: scenario.physics.rx_lobe_gate,
    };
    for (id, w) in scene.walls.iter().enumerate() {
        for t in 0..w.tile_count {
            let key = TileKey::new(id, t);
            if w.coated && !config.tiles.contains_key(&key) {
                return Err(TraceError::ConfigGap(key));
            }
        }
    }

    let mut res = TraceResult::default();
    for (ray_id, ray) in rays.iter().enumerate() {
        res.emitted_w += ray.power_w;
        trace_source(&scene, ray_id, ray.clone(), &mut res);
    }
    Ok(res)
}

fn bump(res: &mut TraceResult, why: Termination) {
    *res.terminations.entry(why).or_insert(0) += 1;
}

fn trace_source(scene: &Scene, ray_id: usize, source: Ray, res: &mut TraceResult) {
    if source.power_w <= 0.0 {
        return;
    }
    let mut live = vec![source];
    while let Some(ray) = live.pop() {
        if ray.power_w <= 0.0 {
            continue;
        }
        let hit = nearest_hit(ray.origin, ray.direction, &scene.walls);
        let rx_t = scene.rx_crossing(&ray).filter(|&t| hit.as_ref().is_none_or(|h| t < h.t));

        if let Some(t) = rx_t {
            let end = ray.origin + ray.direction * t;
            res.segments.push(Segment { ray_id, from: ray.origin, to: end, power_w: ray.power_w });
            let spread = if ray.collimated {
                1.0
            } else {
                let r = (ray.path_len_m + t).max(SPREADING_REF_M);
                (SPREADING_REF_M / r).powi(2)
            };
            res.received_w += ray.power_w * spread;
            res.spreading_loss_w += ray.power_w * (1.0 - spread);
            res.intercepted_w += ray.power_w;
            res.intercepted_lossless_w += ray.lossless_w;
            bump(res, Termination::Received);
            continue;
        }

        let Some(hit) = hit else {
            res.segments.push(Segment {
                ray_id,
                from: ray.origin,
                to: ray.origin + ray.direction * 20.0,
                power_w: ray.power_w,
            });
            res.escaped_w += ray.power_w;
            bump(res, Termination::Escaped);
            continue;
        };
        res.segments.push(Segment { ray_id, from: ray.origin, to: hit.point, power_w: ray.power_w });

        let wall = &scene.walls[hit.wall];
        // uncoated surfaces, and the back of tiles, absorb
        let tile = wall.tile_at(hit.s).filter(|_| ray.direction.dot(wall.base_normal) < 0.0);
        let Some(tile) = tile else {
            res.absorbed_w += ray.power_w;
            bump(res, Termination::Absorbed);
            continue;
        };
        let cfg = &scene.config.tiles[&TileKey::new(hit.wall, tile)];
        if cfg.function == TileFunction::Absorb {
            res.absorbed_w += ray.power_w;
            bump(res, Termination::Absorbed);
            continue;
        }
        if ray.bounces >= scene.max_bounces {
            res.truncated_w += ray.power_w;
            bump(res, Termination::BounceLimit);
            continue;
        }

        let kept = ray.power_w * scene.bounce_keep;
        res.bounce_loss_w += ray.power_w - kept;
        let path_len_m = ray.path_len_m + hit.t;
        let bounces = ray.bounces + 1;

        match cfg.function {
            TileFunction::Specular => live.push(Ray {
                origin: hit.point,
                direction: reflect_unchecked(ray.direction, wall.base_normal),
                power_w: kept,
                collimated: ray.collimated,
                path_len_m,
                bounces,
                lossless_w: ray.lossless_w,
            }),
            TileFunction::Steer | TileFunction::CollimateSteer => {
                let route = cfg
                    .routes
                    .iter()
                    .map(|r| (r.incoming.dot(ray.direction), r))
                    .filter(|(c, _)| *c >= ROUTE_MATCH_COS)
                    .max_by(|a, b| a.0.total_cmp(&b.0));
                let Some((_, route)) = route else {
                    res.absorbed_w += kept;
                    bump(res, Termination::Absorbed);
                    continue;
                };
                let center = wall.tiles(hit.wall)[tile].center;
                let mut sent = 0.0;
                for out in &route.outgoing {
                    if out.fraction <= 0.0 {
                        continue;
                    }
                    let p = kept * out.fraction;
                    sent += p;
                    live.push(Ray {
                        origin: center,
                        direction: out.dir,
                        power_w: p,
                        collimated: true,
                        path_len_m,
                        bounces,
                        lossless_w: ray.lossless_w * out.fraction,
                    });
                }
                if kept - sent > 0.0 {
                    res.absorbed_w += kept - sent;
                }
                if sent == 0.0 {
                    bump(res, Termination::Absorbed);
                }
            }
            TileFunction::Absorb => unreachable!(),
        }

        if live.len() > MAX_LIVE_RAYS {
            live.sort_by(|a, b| b.power_w.total_cmp(&a.power_w));
            for pruned in live.drain(MAX_LIVE_RAYS..) {
                res.truncated_w += pruned.power_w;
                bump(res, Termination::Pruned);
            }
        }
    }
}

/// Direction and distance from a point to the receiver, for aiming routes.
pub fn aim(from: Vec2, to: Vec2) -> Vec2 {
    unit_dir(from, to).map(|(d, _)| d).unwrap_or(Vec2::new(1.0, 0.0))
}
