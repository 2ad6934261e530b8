//! Feed-forward / back-propagation over the layered tile network.
//!
//! Each tile reflects an impinging direction `d` about its virtual normal
//! (the wall normal rotated by the tile's angle omega) and shares the power
//! among its outgoing links in proportion to the clamped projection of the
//! reflected direction on each link. Training adjusts every omega with a
//! delta rule scaled by the tile's significance: its output error on the last
//! layer, the total power impinging on it elsewhere.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Index, IndexMut};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{normal_from_angle, reflect_unchecked, Vec2};
use crate::netbuild::{Endpoint, LayeredNet, NodeId};
use crate::scenario::{GradientRecursion, TrainParams, UpdateMode};

/// Below this sum of clamped projections a tile absorbs the impinging direction.
pub const WEIGHT_EPS: f64 = 1e-12;
/// Angles are kept this far inside `(-pi/2, pi/2)`.
pub const OMEGA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnerError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// One angle per node, laid out like `LayeredNet::layers`.
#[derive(Debug, Clone, PartialEq)]
pub struct Omegas(pub Vec<Vec<f64>>);

impl Omegas {
    pub fn zeros(net: &LayeredNet) -> Self {
        Self(net.layers.iter().map(|l| vec![0.0; l.len()]).collect())
    }

    pub fn filled(net: &LayeredNet, omega: f64) -> Self {
        Self(net.layers.iter().map(|l| vec![omega; l.len()]).collect())
    }

    /// Uniform draw in `range_deg` per node, in node order.
    pub fn random(net: &LayeredNet, range_deg: (f64, f64), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = range_deg;
        Self(
            net.layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|_| {
                            let deg = if lo < hi { rng.random_range(lo..=hi) } else { lo };
                            clamp_omega(deg.to_radians())
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn matches(&self, net: &LayeredNet) -> bool {
        self.0.len() == net.layers.len()
            && self.0.iter().zip(&net.layers).all(|(a, l)| a.len() == l.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.0.iter().enumerate().flat_map(|(k, layer)| {
            layer.iter().enumerate().map(move |(l, &w)| (NodeId::new(k, l), w))
        })
    }
}

impl Index<NodeId> for Omegas {
    type Output = f64;
    fn index(&self, id: NodeId) -> &f64 {
        &self.0[id.layer][id.index]
    }
}

impl IndexMut<NodeId> for Omegas {
    fn index_mut(&mut self, id: NodeId) -> &mut f64 {
        &mut self.0[id.layer][id.index]
    }
}

pub fn clamp_omega(omega: f64) -> f64 {
    omega.clamp(-FRAC_PI_2 + OMEGA_MARGIN, FRAC_PI_2 - OMEGA_MARGIN)
}

/// Virtual input powers (per first-layer node) and ideal output powers (per
/// last-layer node).
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub inputs: Vec<f64>,
    pub ideal: Vec<f64>,
}

impl Targets {
    /// Maps the per-tile fractions of `params` onto the surviving nodes.
    pub fn from_params(net: &LayeredNet, params: &TrainParams) -> Self {
        let pick = |fractions: &[f64], layer: usize| -> Vec<f64> {
            net.layers[layer]
                .iter()
                .map(|n| fractions.get(n.tile.index_in_wall).copied().unwrap_or(0.0))
                .collect()
        };
        Self {
            inputs: pick(&params.input_fractions, 0),
            ideal: pick(&params.ideal_fractions, net.depth() - 1),
        }
    }

    pub fn uniform(net: &LayeredNet) -> Self {
        let first = net.layers[0].len();
        let last = net.layers[net.depth() - 1].len();
        Self { inputs: vec![1.0 / first as f64; first], ideal: vec![1.0 / last as f64; last] }
    }
}

/// Everything one feed-forward / back-propagation cycle produces.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    /// Power on every link: `P_i` at the sink node, `rho_j` at the source node.
    pub link_power: Vec<f64>,
    /// `ideal - achieved`, per last-layer node.
    pub delta: Vec<f64>,
    /// Half the sum of squared `delta`.
    pub deviation: f64,
    /// Per node, per outgoing link: output error reachable through that link,
    /// weighted by the link-weight products along the way.
    pub a_vec: Vec<Vec<Vec<f64>>>,
    /// Per node derivative of the deviation with respect to its angle.
    pub grad: Vec<Vec<f64>>,
}

impl NetState {
    pub fn node_in_power(&self, net: &LayeredNet, id: NodeId) -> Vec<f64> {
        net.node(id).incoming.iter().map(|&i| self.link_power[i]).collect()
    }

    pub fn node_out_power(&self, net: &LayeredNet, id: NodeId) -> Vec<f64> {
        net.node(id).outgoing.iter().map(|&j| self.link_power[j]).collect()
    }

    /// Total power impinging on a node.
    pub fn impinging(&self, net: &LayeredNet, id: NodeId) -> f64 {
        net.node(id).incoming.iter().map(|&i| self.link_power[i]).sum()
    }

    pub fn outputs(&self, net: &LayeredNet) -> Vec<f64> {
        net.output_links.iter().map(|&j| self.link_power[j]).collect()
    }

    pub fn total_input(&self, net: &LayeredNet) -> f64 {
        net.input_links.iter().map(|&j| self.link_power[j]).sum()
    }

    pub fn rmse(&self) -> f64 {
        if self.delta.is_empty() {
            return 0.0;
        }
        (self.delta.iter().map(|d| d * d).sum::<f64>() / self.delta.len() as f64).sqrt()
    }
}

/// Clamped, normalized projections of the reflected direction on `outs`,
/// with their derivatives with respect to `omega`.
pub(crate) fn weights_and_slopes(
    base_normal: Vec2,
    omega: f64,
    d: Vec2,
    outs: &[Vec2],
) -> (Vec<f64>, Vec<f64>) {
    let n = base_normal.rotated(omega);
    let dn = n.perp();
    let r = reflect_unchecked(d, n);
    let dr = (n * d.dot(dn) + dn * d.dot(n)) * -2.0;

    let mut u = Vec::with_capacity(outs.len());
    let mut du = Vec::with_capacity(outs.len());
    for &o in outs {
        let p = r.dot(o);
        if p > 0.0 {
            u.push(p);
            du.push(dr.dot(o));
        } else {
            u.push(0.0);
            du.push(0.0);
        }
    }
    let sum: f64 = u.iter().sum();
    if sum <= WEIGHT_EPS {
        return (vec![0.0; outs.len()], vec![0.0; outs.len()]);
    }
    let dsum: f64 = du.iter().sum();
    let w: Vec<f64> = u.iter().map(|x| x / sum).collect();
    let dw = du.iter().zip(&w).map(|(dx, wx)| (dx - wx * dsum) / sum).collect();
    (w, dw)
}

/// Power fractions a tile with normal angle `omega` sends over links with
/// directions `outs` for a wave travelling along `d`.
///
/// The fractions sum to one, or are all zero when the reflection faces away
/// from every link.
pub fn tile_weights(base_normal: Vec2, omega: f64, d: Vec2, outs: &[Vec2]) -> Vec<f64> {
    weights_and_slopes(base_normal, omega, d, outs).0
}

/// [`tile_weights`] for node `id` of `net`, over its outgoing links.
pub fn link_weights(net: &LayeredNet, id: NodeId, omega: f64, d: Vec2) -> Result<Vec<f64>, LearnerError> {
    let node = net.node(id);
    if node.outgoing.is_empty() {
        return Err(LearnerError::Contract(format!("node {id} has no outgoing links")));
    }
    normal_from_angle(node.tile.base_normal, omega).map_err(|e| LearnerError::Domain(e.to_string()))?;
    Ok(tile_weights(node.tile.base_normal, omega, d, &net.outgoing_dirs(id)))
}

fn check_shapes(net: &LayeredNet, omegas: &Omegas, targets: &Targets) -> Result<(), LearnerError> {
    if !omegas.matches(net) {
        return Err(LearnerError::Contract("angle vector does not match the net".into()));
    }
    if targets.inputs.len() != net.input_links.len() {
        return Err(LearnerError::Contract(format!(
            "{} input powers for {} input links",
            targets.inputs.len(),
            net.input_links.len()
        )));
    }
    if targets.ideal.len() != net.output_links.len() {
        return Err(LearnerError::Contract(format!(
            "{} ideal outputs for {} output links",
            targets.ideal.len(),
            net.output_links.len()
        )));
    }
    if targets.inputs.iter().chain(&targets.ideal).any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(LearnerError::Contract("powers must be finite and non-negative".into()));
    }
    if omegas.iter().any(|(_, w)| !w.is_finite()) {
        return Err(LearnerError::Contract("angles must be finite".into()));
    }
    Ok(())
}

/// Distributes the input powers layer by layer and evaluates the deviation.
pub fn feed_forward(net: &LayeredNet, omegas: &Omegas, targets: &Targets) -> Result<NetState, LearnerError> {
    check_shapes(net, omegas, targets)?;
    let mut link_power = vec![0.0; net.links.len()];
    for (&j, &p) in net.input_links.iter().zip(&targets.inputs) {
        link_power[j] = p;
    }
    for (k, layer) in net.layers.iter().enumerate() {
        for (l, node) in layer.iter().enumerate() {
            let id = NodeId::new(k, l);
            let outs = net.outgoing_dirs(id);
            for &i in &node.incoming {
                let p = link_power[i];
                if p == 0.0 {
                    continue;
                }
                let w = tile_weights(node.tile.base_normal, omegas[id], net.links[i].dir, &outs);
                for (&j, wj) in node.outgoing.iter().zip(w) {
                    link_power[j] += wj * p;
                }
            }
        }
    }
    let delta: Vec<f64> = net
        .output_links
        .iter()
        .zip(&targets.ideal)
        .map(|(&j, ideal)| ideal - link_power[j])
        .collect();
    let deviation = 0.5 * delta.iter().map(|d| d * d).sum::<f64>();
    Ok(NetState {
        link_power,
        delta,
        deviation,
        a_vec: net.layers.iter().map(|l| vec![Vec::new(); l.len()]).collect(),
        grad: net.layers.iter().map(|l| vec![0.0; l.len()]).collect(),
    })
}

/// Fills `state.a_vec` and `state.grad` from the powers of the last feed-forward.
///
/// The last layer's helping vector holds its output error. A node on layer
/// `k < last` gets, per outgoing link, the downstream error reachable through
/// that link; its gradient is minus the dot product of that vector with the
/// slopes of its outgoing powers.
pub fn backprop_gradients(
    net: &LayeredNet,
    omegas: &Omegas,
    state: &mut NetState,
    recursion: GradientRecursion,
) -> Result<(), LearnerError> {
    if !omegas.matches(net) || state.link_power.len() != net.links.len() {
        return Err(LearnerError::Contract("state does not belong to this net".into()));
    }
    let last = net.depth() - 1;
    for k in (0..=last).rev() {
        for l in 0..net.layers[k].len() {
            let id = NodeId::new(k, l);
            let node = net.node(id);
            let a: Vec<f64> = node
                .outgoing
                .iter()
                .map(|&j| match net.links[j].to {
                    Endpoint::Rx => state.delta[l],
                    Endpoint::Node(next) => {
                        let next_a = &state.a_vec[next.layer][next.index];
                        match recursion {
                            GradientRecursion::Exact => {
                                let next_node = net.node(next);
                                let w = tile_weights(
                                    next_node.tile.base_normal,
                                    omegas[next],
                                    net.links[j].dir,
                                    &net.outgoing_dirs(next),
                                );
                                w.iter().zip(next_a).map(|(w, a)| w * a).sum()
                            }
                            GradientRecursion::AsPrinted => {
                                let total = state.impinging(net, id);
                                let own = if total > 0.0 { state.link_power[j] / total } else { 0.0 };
                                own * next_a.iter().sum::<f64>()
                            }
                        }
                    }
                    Endpoint::Tx => 0.0,
                })
                .collect();

            // e_j = d rho_j / d omega
            let outs = net.outgoing_dirs(id);
            let mut e = vec![0.0; outs.len()];
            for &i in &node.incoming {
                let p = state.link_power[i];
                if p == 0.0 {
                    continue;
                }
                let (_, dw) = weights_and_slopes(node.tile.base_normal, omegas[id], net.links[i].dir, &outs);
                for (ej, dwj) in e.iter_mut().zip(dw) {
                    *ej += p * dwj;
                }
            }
            state.grad[k][l] = -e.iter().zip(&a).map(|(e, a)| e * a).sum::<f64>();
            state.a_vec[k][l] = a;
        }
    }
    Ok(())
}

/// Update scale of a node: signed output error on the last layer, total
/// impinging power elsewhere.
pub fn significance(net: &LayeredNet, state: &NetState, id: NodeId) -> f64 {
    if id.layer + 1 == net.depth() {
        state.delta[id.index]
    } else {
        state.impinging(net, id)
    }
}

/// Delta-rule step `omega - eta * grad * S` for every node (or only the nodes
/// of `only_layer`), clamped into the open angle domain.
pub fn apply_updates(
    net: &LayeredNet,
    state: &NetState,
    omegas: &Omegas,
    eta: f64,
    only_layer: Option<usize>,
) -> Omegas {
    let mut next = omegas.clone();
    for id in net.node_ids() {
        if only_layer.is_some_and(|k| k != id.layer) {
            continue;
        }
        let step = eta * state.grad[id.layer][id.index] * significance(net, state, id);
        next[id] = clamp_omega(omegas[id] - step);
    }
    next
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finite-difference derivative of the deviation with respect to one angle,
/// re-running the full feed-forward on each side.
pub fn fd_gradient(
    net: &LayeredNet,
    omegas: &Omegas,
    targets: &Targets,
    id: NodeId,
    h: f64,
) -> Result<f64, LearnerError> {
    if h.is_nan() || h <= 0.0 {
        return Err(LearnerError::Domain(format!("step must be positive, got {h}")));
    }
    let w = omegas[id];
    if !(w - h > -FRAC_PI_2 && w + h < FRAC_PI_2) {
        return Err(LearnerError::Domain(format!("omega {w} +/- {h} leaves (-pi/2, pi/2)")));
    }
    check_shapes(net, omegas, targets)?;
    let mut probe = omegas.clone();
    let mut deviation_at = |x: f64| {
        probe[id] = x;
        feed_forward(net, &probe, targets).map(|s| s.deviation).expect("shapes checked")
    };
    let plus = deviation_at(w + h);
    let minus = deviation_at(w - h);
    Ok((plus - minus) / (2.0 * h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub rmse_target: f64,
    pub max_cycles: usize,
    pub init_range_deg: (f64, f64),
    pub seed: u64,
    pub update_mode: UpdateMode,
    pub recursion: GradientRecursion,
}

impl From<&TrainParams> for TrainConfig {
    fn from(p: &TrainParams) -> Self {
        Self {
            eta: p.eta,
            rmse_target: p.rmse_target,
            max_cycles: p.max_cycles,
            init_range_deg: p.init_range_deg,
            seed: p.seed,
            update_mode: p.update_mode,
            recursion: p.gradient,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(LearnerError::Config(format!("eta must be in (0, 1], got {}", self.eta)));
        }
        if self.rmse_target.is_nan() || self.rmse_target <= 0.0 {
            return Err(LearnerError::Config("rmse_target must be positive".into()));
        }
        let (lo, hi) = self.init_range_deg;
        if !(lo <= hi && lo >= -90.0 && hi <= 90.0) {
            return Err(LearnerError::Config(format!("init range ({lo}, {hi}) outside [-90, 90]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingResult {
    pub initial_omegas: Omegas,
    pub final_omegas: Omegas,
    /// RMSE of every evaluated cycle.
    pub rmse_curve: Vec<f64>,
    pub deviation_curve: Vec<f64>,
    pub cycles_run: usize,
    pub converged: bool,
    /// Feed-forward state of `final_omegas`.
    pub final_state: NetState,
}

/// Trains from angles drawn with `cfg.seed`.
pub fn train(net: &LayeredNet, targets: &Targets, cfg: &TrainConfig) -> Result<TrainingResult, LearnerError> {
    cfg.validate()?;
    let init = Omegas::random(net, cfg.init_range_deg, cfg.seed);
    train_from(net, targets, cfg, init)
}

/// Trains from the given starting angles.
///
/// Each cycle evaluates the net, records the RMSE, stops once it is below the
/// target, and otherwise back-propagates and updates the angles.
pub fn train_from(
    net: &LayeredNet,
    targets: &Targets,
    cfg: &TrainConfig,
    init: Omegas,
) -> Result<TrainingResult, LearnerError> {
    cfg.validate()?;
    check_shapes(net, &init, targets)?;
    let last = net.depth() - 1;
    let mut omegas = init.clone();
    let mut rmse_curve = Vec::new();
    let mut deviation_curve = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_cycles {
        let mut state = feed_forward(net, &omegas, targets)?;
        let rmse = state.rmse();
        rmse_curve.push(rmse);
        deviation_curve.push(state.deviation);
        if rmse < cfg.rmse_target {
            converged = true;
            break;
        }
        match cfg.update_mode {
            UpdateMode::Batch => {
                backprop_gradients(net, &omegas, &mut state, cfg.recursion)?;
                omegas = apply_updates(net, &state, &omegas, cfg.eta, None);
            }
            UpdateMode::SequentialReverse => {
                for k in (0..=last).rev() {
                    if k != last {
                        state = feed_forward(net, &omegas, targets)?;
                    }
                    backprop_gradients(net, &omegas, &mut state, cfg.recursion)?;
                    omegas = apply_updates(net, &state, &omegas, cfg.eta, Some(k));
                }
            }
        }
    }

    let final_state = feed_forward(net, &omegas, targets)?;
    Ok(TrainingResult {
        initial_omegas: init,
        final_omegas: omegas,
        cycles_run: rmse_curve.len(),
        rmse_curve,
        deviation_curve,
        converged,
        final_state,
    })
}
