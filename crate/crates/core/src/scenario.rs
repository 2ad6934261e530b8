//! Scenario description: floorplan, users, physics and training parameters.
//!
//! A scenario is read from JSON. Every field of `physics` and `train` has a
//! default, so a minimal file needs only `walls`, `layer_order` and `users`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{unit_dir, Vec2, WallSegment};

/// Tolerance on fraction vectors summing to one.
pub const FRACTION_SUM_TOL: f64 = 1e-9;

/// The bundled reconstruction of the three-wall evaluation floorplan.
pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../scenarios/default.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario not found: {0}")]
    NotFound(String),
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalSide {
    /// Normal is the `a -> b` direction rotated +90 degrees.
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSpec {
    pub a: Vec2,
    pub b: Vec2,
    pub normal_side: NormalSide,
    #[serde(default)]
    pub coated: bool,
    #[serde(default)]
    pub tiles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Transmitter,
    Receiver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub position: Vec2,
    pub role: Role,
    /// Full lobe width alpha, degrees.
    pub lobe_deg: f64,
    /// Pointing direction theta, degrees counterclockwise from +x.
    pub boresight_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsParams {
    pub frequency_hz: f64,
    pub max_bounces: usize,
    /// Fraction of power lost at every bounce.
    pub bounce_loss: f64,
    pub ray_count: usize,
    /// Width of the receiving aperture, meters.
    pub rx_aperture_m: f64,
    /// Only accept rays arriving inside the receiver lobe.
    pub rx_lobe_gate: bool,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            frequency_hz: 2.4e9,
            max_bounces: 5,
            bounce_loss: 0.01,
            ray_count: 5,
            rx_aperture_m: 1.0,
            rx_lobe_gate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// All gradients from the pre-update angles, applied at once.
    #[default]
    Batch,
    /// Layers updated one at a time from last to first, re-evaluating in between.
    SequentialReverse,
}

/// How gradients of layers before the last two are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientRecursion {
    /// Each node's helping vector is the neighbor's weight row applied to the
    /// neighbor's own helping vector (exact chain rule).
    #[default]
    Exact,
    /// Neighbor helping vectors summed with the all-ones vector and scaled by
    /// the node's own outgoing weight.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InactiveFunction {
    #[default]
    Absorb,
    Specular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub eta: f64,
    pub rmse_target: f64,
    pub max_cycles: usize,
    pub seed: u64,
    pub init_range_deg: (f64, f64),
    /// Virtual input power per first-layer tile, by tile index on the wall.
    pub input_fractions: Vec<f64>,
    /// Ideal output power per last-layer tile, by tile index on the wall.
    pub ideal_fractions: Vec<f64>,
    pub update_mode: UpdateMode,
    pub gradient: GradientRecursion,
    /// Minimum share of the total input a tile must carry to stay active.
    pub activity_threshold: f64,
    pub inactive_function: InactiveFunction,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            eta: 0.95,
            rmse_target: 1e-3,
            max_cycles: 5000,
            seed: 42,
            init_range_deg: (-90.0, 90.0),
            input_fractions: vec![0.2; 5],
            ideal_fractions: vec![0.2; 5],
            update_mode: UpdateMode::Batch,
            gradient: GradientRecursion::Exact,
            activity_threshold: 0.01,
            inactive_function: InactiveFunction::Absorb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub walls: Vec<WallSpec>,
    /// Wall ids, transmitter-facing first.
    pub layer_order: Vec<usize>,
    pub users: Vec<User>,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default)]
    pub train: TrainParams,
}

impl Scenario {
    pub fn default_scenario() -> Self {
        Self::from_json_str(DEFAULT_SCENARIO_JSON).expect("bundled scenario is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let problems = scenario.validate();
        if problems.is_empty() {
            Ok(scenario)
        } else {
            Err(ScenarioError::Invalid(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                ScenarioError::NotFound(path.display().to_string())
            } else {
                ScenarioError::Io { path: path.display().to_string(), source }
            }
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn wall_segments(&self) -> Vec<WallSegment> {
        self.walls
            .iter()
            .map(|w| {
                let along = unit_dir(w.a, w.b).map(|(d, _)| d).unwrap_or(Vec2::new(1.0, 0.0));
                let base_normal = match w.normal_side {
                    NormalSide::Left => along.perp(),
                    NormalSide::Right => -along.perp(),
                };
                WallSegment {
                    a: w.a,
                    b: w.b,
                    base_normal,
                    coated: w.coated,
                    tile_count: if w.coated { w.tiles } else { 0 },
                }
            })
            .collect()
    }

    pub fn transmitter(&self) -> Option<&User> {
        self.users.iter().find(|u| u.role == Role::Transmitter)
    }

    pub fn receiver(&self) -> Option<&User> {
        self.users.iter().find(|u| u.role == Role::Receiver)
    }

    /// Transmit power in watts.
    pub fn tx_power_w(&self) -> f64 {
        let dbm = self.transmitter().and_then(|u| u.tx_power_dbm).unwrap_or(-30.0);
        dbm_to_w(dbm)
    }

    /// Human-readable invariant violations; empty when the scenario is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, w) in self.walls.iter().enumerate() {
            if w.a == w.b {
                out.push(format!("walls[{i}]: endpoints coincide"));
            }
            if w.coated && w.tiles == 0 {
                out.push(format!("walls[{i}]: coated wall needs tiles >= 1"));
            }
        }
        if self.layer_order.is_empty() {
            out.push("layer_order must name at least one wall".to_string());
        }
        for (pos, &id) in self.layer_order.iter().enumerate() {
            match self.walls.get(id) {
                None => out.push(format!("layer_order[{pos}]: no wall with id {id}")),
                Some(w) if !w.coated => {
                    out.push(format!("layer_order[{pos}]: wall {id} is not coated"))
                }
                _ => {}
            }
            if self.layer_order[..pos].contains(&id) {
                out.push(format!("layer_order[{pos}]: wall {id} listed twice"));
            }
        }

        let tx = self.users.iter().filter(|u| u.role == Role::Transmitter).count();
        let rx = self.users.iter().filter(|u| u.role == Role::Receiver).count();
        if tx != 1 || rx != 1 {
            out.push(format!(
                "users: need exactly one transmitter and one receiver (found {tx} and {rx})"
            ));
        }
        for (i, u) in self.users.iter().enumerate() {
            if !(u.lobe_deg > 0.0 && u.lobe_deg <= 180.0) {
                out.push(format!("users[{i}]: lobe_deg must be in (0, 180], got {}", u.lobe_deg));
            }
            if u.role == Role::Transmitter && u.tx_power_dbm.is_none() {
                out.push(format!("users[{i}]: transmitter needs tx_power_dbm"));
            }
        }
        if let (Some(t), Some(r)) = (self.transmitter(), self.receiver()) {
            if t.position == r.position {
                out.push("users: transmitter and receiver coincide".to_string());
            }
        }

        let p = &self.physics;
        if p.max_bounces < self.layer_order.len() {
            out.push(format!(
                "physics.max_bounces ({}) must be at least the number of layers ({})",
                p.max_bounces,
                self.layer_order.len()
            ));
        }
        if !(0.0..1.0).contains(&p.bounce_loss) {
            out.push(format!("physics.bounce_loss must be in [0, 1), got {}", p.bounce_loss));
        }
        if p.ray_count == 0 {
            out.push("physics.ray_count must be >= 1".to_string());
        }
        if p.rx_aperture_m.is_nan() || p.rx_aperture_m <= 0.0 {
            out.push("physics.rx_aperture_m must be positive".to_string());
        }

        let t = &self.train;
        if !(t.eta > 0.0 && t.eta <= 1.0) {
            out.push(format!("train.eta must be in (0, 1], got {}", t.eta));
        }
        if t.rmse_target.is_nan() || t.rmse_target <= 0.0 {
            out.push("train.rmse_target must be positive".to_string());
        }
        let (lo, hi) = t.init_range_deg;
        if !(lo <= hi && lo >= -90.0 && hi <= 90.0) {
            out.push(format!("train.init_range_deg must lie within [-90, 90], got ({lo}, {hi})"));
        }
        if !(0.0..=1.0).contains(&t.activity_threshold) {
            out.push("train.activity_threshold must be in [0, 1]".to_string());
        }
        let tiles_of = |layer: Option<&usize>| {
            layer.and_then(|&id| self.walls.get(id)).map(|w| w.tiles)
        };
        check_fractions(
            "virtual_input_fractions",
            &t.input_fractions,
            tiles_of(self.layer_order.first()),
            &mut out,
        );
        check_fractions(
            "ideal_output_fractions",
            &t.ideal_fractions,
            tiles_of(self.layer_order.last()),
            &mut out,
        );
        out
    }
}

fn check_fractions(name: &str, values: &[f64], expected_len: Option<usize>, out: &mut Vec<String>) {
    if let Some(n) = expected_len {
        if values.len() != n {
            out.push(format!("{name} has {} entries but the layer has {n} tiles", values.len()));
        }
    }
    if values.iter().any(|v| v.is_nan() || *v < 0.0) {
        out.push(format!("{name} entries must be non-negative"));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > FRACTION_SUM_TOL {
        out.push(format!("{name} must sum to 1 (got {sum})"));
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_clean() {
        let s = Scenario::default_scenario();
        assert!(s.validate().is_empty());
        assert_eq!(s.layer_order, vec![0, 1, 2]);
        assert_eq!(s.train.eta, 0.95);
        assert_eq!(s.physics.max_bounces, 5);
        assert_eq!(s.physics.bounce_loss, 0.01);
        assert_eq!(s.physics.frequency_hz, 2.4e9);
        assert_eq!(s.transmitter().unwrap().position, Vec2::new(2.5, 7.5));
        assert_eq!(s.receiver().unwrap().position, Vec2::new(7.5, 7.5));
    }

    #[test]
    fn tx_power_minus_30_dbm_is_one_microwatt() {
        let s = Scenario::default_scenario();
        assert!((s.tx_power_w() - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn wall_normals_follow_side() {
        let s = Scenario::default_scenario();
        let walls = s.wall_segments();
        assert_eq!(walls[0].base_normal, Vec2::new(-1.0, 0.0));
        assert_eq!(walls[1].base_normal, Vec2::new(0.0, 1.0));
        assert_eq!(walls[2].base_normal, Vec2::new(1.0, 0.0));
        for w in &walls {
            assert!(w.base_normal.dot(w.b - w.a).abs() < 1e-9);
        }
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let mut s = Scenario::default_scenario();
        s.train.input_fractions = vec![0.18; 5];
        let problems = s.validate();
        assert_eq!(problems.len(), 1);
        assert!(problems[0].contains("virtual_input_fractions must sum to 1"));
    }

    #[test]
    fn layer_order_checks() {
        let mut s = Scenario::default_scenario();
        s.layer_order = vec![0, 0, 3];
        let problems = s.validate();
        assert!(problems.iter().any(|p| p.contains("listed twice")));
        assert!(problems.iter().any(|p| p.contains("not coated")));
        s.layer_order.clear();
        assert!(s.validate().iter().any(|p| p.contains("at least one wall")));
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = Scenario::from_json_str("{\n  \"walls\": [\n  oops\n]}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let text = r#"{
            "walls": [{"a": [0, 0], "b": [1, 0], "normal_side": "left", "coated": true, "tiles": 1}],
            "layer_order": [0],
            "users": [
                {"position": [0.2, 1], "role": "transmitter", "lobe_deg": 40, "boresight_deg": -90, "tx_power_dbm": -30},
                {"position": [0.8, 1], "role": "receiver", "lobe_deg": 40, "boresight_deg": -90}
            ],
            "train": {"input_fractions": [1.0], "ideal_fractions": [1.0]}
        }"#;
        let s = Scenario::from_json_str(text).unwrap();
        assert_eq!(s.physics, PhysicsParams::default());
        assert_eq!(s.train.eta, 0.95);
        assert_eq!(s.train.update_mode, UpdateMode::Batch);
    }

    #[test]
    fn missing_file() {
        let err = Scenario::load(Path::new("/nonexistent/scenario.json")).unwrap_err();
        assert!(err.to_string().starts_with("scenario not found"));
    }
}
