//! 2D vector math, the reflection law, and line-of-sight tests over a wall set.
//!
//! Positions are meters; directions are unit vectors. Angles are radians
//! and rotate counterclockwise.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for `| |v| - 1 |` on direction vectors.
pub const UNIT_TOL: f64 = 1e-9;
/// Collinearity tolerance of the orientation predicate.
pub const ORIENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{what} is not a unit vector (norm {norm})")]
    NotUnit { what: &'static str, norm: f64 },
    #[error("normal angle {0} rad outside the open interval (-pi/2, pi/2)")]
    AngleOutOfRange(f64),
    #[error("coincident points {0}")]
    CoincidentPoints(Vec2),
}

/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() < UNIT_TOL
    }

    pub fn distance(self, other: Self) -> f64 {
        (other - self).norm()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self::new(x, y)
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

fn check_unit(v: Vec2, what: &'static str) -> Result<(), GeometryError> {
    if v.is_unit() {
        Ok(())
    } else {
        Err(GeometryError::NotUnit { what, norm: v.norm() })
    }
}

/// Mirror reflection of the travel direction `d` about the surface normal `n`:
/// `d - 2 (d . n) n`.
pub fn reflect(d: Vec2, n: Vec2) -> Result<Vec2, GeometryError> {
    check_unit(d, "incident direction")?;
    check_unit(n, "surface normal")?;
    Ok(reflect_unchecked(d, n))
}

#[inline]
pub(crate) fn reflect_unchecked(d: Vec2, n: Vec2) -> Vec2 {
    d - n * (2.0 * d.dot(n))
}

/// Virtual surface normal: `base_normal` rotated counterclockwise by `omega`.
pub fn normal_from_angle(base_normal: Vec2, omega: f64) -> Result<Vec2, GeometryError> {
    check_unit(base_normal, "base normal")?;
    if !(omega > -FRAC_PI_2 && omega < FRAC_PI_2) {
        return Err(GeometryError::AngleOutOfRange(omega));
    }
    if omega == 0.0 {
        return Ok(base_normal);
    }
    Ok(base_normal.rotated(omega))
}

/// Unit direction and distance from `from` to `to`.
pub fn unit_dir(from: Vec2, to: Vec2) -> Result<(Vec2, f64), GeometryError> {
    let v = to - from;
    let dist = v.norm();
    if dist == 0.0 {
        return Err(GeometryError::CoincidentPoints(from));
    }
    Ok((v * (1.0 / dist), dist))
}

/// Orientation of `c` relative to the directed line `a -> b`: +1 left, -1 right,
/// 0 collinear within [`ORIENT_EPS`].
fn orientation(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let v = (b - a).cross(c - a);
    if v > ORIENT_EPS {
        1
    } else if v < -ORIENT_EPS {
        -1
    } else {
        0
    }
}

/// True iff the open segment `(p, q)` crosses the closed segment `[a, b]`.
///
/// Touching at `p` or `q`, and collinear overlap, do not count as crossing.
pub fn open_segment_crosses(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> bool {
    let op = orientation(a, b, p);
    let oq = orientation(a, b, q);
    if op == 0 || oq == 0 || op == oq {
        return false;
    }
    let oa = orientation(p, q, a);
    let ob = orientation(p, q, b);
    oa == 0 || ob == 0 || oa != ob
}

/// A straight surface of the floorplan.
///
/// `coated == false` means a perfect absorber. Coated walls carry
/// `tile_count` equal-width tiles along `a -> b`.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSegment {
    pub a: Vec2,
    pub b: Vec2,
    pub base_normal: Vec2,
    pub coated: bool,
    pub tile_count: usize,
}

impl WallSegment {
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn tile_width(&self) -> f64 {
        if self.tile_count == 0 {
            self.length()
        } else {
            self.length() / self.tile_count as f64
        }
    }

    /// Tiles partitioning the wall, ordered from `a` to `b`.
    pub fn tiles(&self, wall_id: usize) -> Vec<Tile> {
        if !self.coated {
            return Vec::new();
        }
        let n = self.tile_count;
        let width = self.tile_width();
        (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) / n as f64;
                Tile {
                    center: self.a + (self.b - self.a) * t,
                    width,
                    wall_id,
                    index_in_wall: i,
                    base_normal: self.base_normal,
                }
            })
            .collect()
    }

    /// Index of the tile containing the point at parameter `t` in `[0, 1]` along `a -> b`.
    pub fn tile_at(&self, t: f64) -> Option<usize> {
        if !self.coated || self.tile_count == 0 {
            return None;
        }
        let i = (t * self.tile_count as f64).floor();
        Some((i.max(0.0) as usize).min(self.tile_count - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub center: Vec2,
    pub width: f64,
    pub wall_id: usize,
    pub index_in_wall: usize,
    pub base_normal: Vec2,
}

/// True iff nothing in `walls` blocks the open segment between `p` and `q`.
pub fn los_visible(p: Vec2, q: Vec2, walls: &[WallSegment]) -> bool {
    !walls.iter().any(|w| open_segment_crosses(p, q, w.a, w.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, SQRT_2};

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn wall(a: (f64, f64), b: (f64, f64), coated: bool) -> WallSegment {
        let a = Vec2::new(a.0, a.1);
        let b = Vec2::new(b.0, b.1);
        let (dir, _) = unit_dir(a, b).unwrap();
        WallSegment { a, b, base_normal: dir.perp(), coated, tile_count: 5 }
    }

    #[test]
    fn reflect_examples() {
        let up = Vec2::new(0.0, 1.0);
        assert!(close(reflect(Vec2::new(0.0, -1.0), up).unwrap(), up, 1e-15));
        assert!(close(reflect(Vec2::new(1.0, 0.0), up).unwrap(), Vec2::new(1.0, 0.0), 1e-15));
        let d = Vec2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2);
        let r = reflect(d, up).unwrap();
        assert!(close(r, Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2), 1e-15));
    }

    #[test]
    fn reflect_rejects_non_unit() {
        let err = reflect(Vec2::new(0.0, -2.0), Vec2::new(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, GeometryError::NotUnit { .. }));
        assert!(reflect(Vec2::new(0.0, -1.0), Vec2::new(0.0, 0.5)).is_err());
    }

    #[test]
    fn normal_from_angle_examples() {
        let up = Vec2::new(0.0, 1.0);
        assert_eq!(normal_from_angle(up, 0.0).unwrap(), up);
        let n = normal_from_angle(up, FRAC_PI_2 - 1e-9).unwrap();
        assert!(close(n, Vec2::new(-1.0, 0.0), 1e-8));
        let n = normal_from_angle(Vec2::new(1.0, 0.0), -FRAC_PI_4).unwrap();
        assert!(close(n, Vec2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2), 1e-15));
    }

    #[test]
    fn normal_from_angle_domain() {
        let up = Vec2::new(0.0, 1.0);
        assert_eq!(normal_from_angle(up, FRAC_PI_2), Err(GeometryError::AngleOutOfRange(FRAC_PI_2)));
        assert!(normal_from_angle(up, -FRAC_PI_2).is_err());
        assert!(normal_from_angle(up, f64::NAN).is_err());
    }

    #[test]
    fn unit_dir_examples() {
        let (d, l) = unit_dir(Vec2::new(0.0, 0.0), Vec2::new(0.0, 2.0)).unwrap();
        assert!(close(d, Vec2::new(0.0, 1.0), 1e-15));
        assert_eq!(l, 2.0);
        let (d, l) = unit_dir(Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)).unwrap();
        assert!(close(d, Vec2::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2), 1e-15));
        assert!((l - SQRT_2).abs() < 1e-15);
        // default user positions
        let (d, l) = unit_dir(Vec2::new(2.5, 7.5), Vec2::new(7.5, 7.5)).unwrap();
        assert_eq!(d, Vec2::new(1.0, 0.0));
        assert_eq!(l, 5.0);
        assert!(matches!(
            unit_dir(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)),
            Err(GeometryError::CoincidentPoints(_))
        ));
    }

    #[test]
    fn los_examples() {
        let w = vec![wall((5.0, 0.0), (5.0, 10.0), false)];
        assert!(!los_visible(Vec2::new(2.0, 5.0), Vec2::new(8.0, 5.0), &w));
        assert!(los_visible(Vec2::new(2.0, 5.0), Vec2::new(8.0, 5.0), &[]));
        // endpoints on a wall do not block
        assert!(los_visible(Vec2::new(5.0, 5.0), Vec2::new(8.0, 5.0), &w));
        // passing through a wall endpoint blocks
        assert!(!los_visible(Vec2::new(4.0, 9.0), Vec2::new(6.0, 11.0), &w));
    }

    /// Independent crossing test: sample the open segment densely and look
    /// for a sign change of the signed distance to the wall line that lands
    /// inside the wall's extent.
    fn brute_force_blocked(p: Vec2, q: Vec2, walls: &[WallSegment]) -> bool {
        const N: usize = 20_000;
        walls.iter().any(|w| {
            let (t_dir, len) = unit_dir(w.a, w.b).unwrap();
            let n = t_dir.perp();
            let side = |x: Vec2| (x - w.a).dot(n);
            let along = |x: Vec2| (x - w.a).dot(t_dir);
            let mut prev = p + (q - p) * (1.0 / N as f64);
            for i in 2..N {
                let cur = p + (q - p) * (i as f64 / N as f64);
                let (s0, s1) = (side(prev), side(cur));
                if (s0 < 0.0 && s1 >= 0.0) || (s0 > 0.0 && s1 <= 0.0) {
                    let hit = prev + (cur - prev) * (s0 / (s0 - s1));
                    let a = along(hit);
                    if a >= -1e-9 && a <= len + 1e-9 {
                        return true;
                    }
                }
                prev = cur;
            }
            false
        })
    }

    #[test]
    fn los_along_wall_blocked_by_perpendicular_wall() {
        // tiles on the floor y = 0; a vertical wall stands between them
        let walls = vec![
            wall((0.0, 0.0), (10.0, 0.0), true),
            wall((5.0, -1.0), (5.0, 3.0), false),
        ];
        let tiles = walls[0].tiles(0);
        let (p, q) = (tiles[1].center, tiles[3].center);
        // p and q lie on the floor wall itself; the crossing is the vertical one
        let p = p + Vec2::new(0.0, 0.5);
        let q = q + Vec2::new(0.0, 0.5);
        assert_eq!(los_visible(p, q, &walls), !brute_force_blocked(p, q, &walls));
        assert!(!los_visible(p, q, &walls));
        // exactly along the surface: collinear with the floor, still crosses the vertical wall
        let (p0, q0) = (tiles[1].center, tiles[3].center);
        assert!(!los_visible(p0, q0, &walls));
        let (p1, q1) = (tiles[0].center, tiles[1].center);
        assert!(los_visible(p1, q1, &walls));
    }

    #[test]
    fn tiles_partition_wall() {
        let w = wall((10.0, 5.0), (10.0, 10.0), true);
        let tiles = w.tiles(3);
        assert_eq!(tiles.len(), 5);
        for (i, t) in tiles.iter().enumerate() {
            assert_eq!(t.width, 1.0);
            assert_eq!(t.index_in_wall, i);
            assert_eq!(t.wall_id, 3);
            assert!(close(t.center, Vec2::new(10.0, 5.5 + i as f64), 1e-12));
        }
        for pair in tiles.windows(2) {
            assert!((pair[0].center.distance(pair[1].center) - 1.0).abs() < 1e-12);
        }
        assert_eq!(w.tile_at(0.0), Some(0));
        assert_eq!(w.tile_at(0.999), Some(4));
        assert_eq!(w.tile_at(1.0), Some(4));
        assert!(wall((0.0, 0.0), (1.0, 0.0), false).tiles(0).is_empty());
    }

    fn unit_vec() -> impl Strategy<Value = Vec2> {
        (-std::f64::consts::PI..std::f64::consts::PI).prop_map(Vec2::from_angle)
    }

    fn point() -> impl Strategy<Value = Vec2> {
        (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y)| Vec2::new(x, y))
    }

    proptest! {
        #[test]
        fn reflect_is_involution(d in unit_vec(), n in unit_vec()) {
            let r = reflect(d, n).unwrap();
            prop_assert!(r.is_unit());
            prop_assert!(close(reflect(r, n).unwrap(), d, 1e-12));
        }

        #[test]
        fn reflect_flips_normal_component(d in unit_vec(), n in unit_vec()) {
            let r = reflect(d, n).unwrap();
            let t = n.perp();
            prop_assert!((r.dot(t) - d.dot(t)).abs() < 1e-12);
            prop_assert!((r.dot(n) + d.dot(n)).abs() < 1e-12);
        }

        #[test]
        fn los_is_symmetric(p in point(), q in point(), segs in prop::collection::vec((point(), point()), 0..6)) {
            prop_assume!(p.distance(q) > 1e-6);
            let walls: Vec<WallSegment> = segs
                .into_iter()
                .filter(|(a, b)| a.distance(*b) > 1e-6)
                .map(|(a, b)| {
                    let (d, _) = unit_dir(a, b).unwrap();
                    WallSegment { a, b, base_normal: d.perp(), coated: false, tile_count: 0 }
                })
                .collect();
            prop_assert_eq!(los_visible(p, q, &walls), los_visible(q, p, &walls));
        }

        #[test]
        fn zero_angle_is_identity(n in unit_vec()) {
            prop_assert_eq!(normal_from_angle(n, 0.0).unwrap(), n);
        }
    }
}
