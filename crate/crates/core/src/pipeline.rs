//! End-to-end runs shared by the command line and the tests.

use std::time::Instant;

use log::{debug, info, warn};
use thiserror::Error;

use crate::configurators::{interpret_trained_net, kp_config, regular_config, ConfigError, EnvironmentConfig};
use crate::learner::{train, LearnerError, Targets, TrainConfig, TrainingResult};
use crate::netbuild::{build_layered_net, BuildError, LayeredNet};
use crate::raytracer::{emit_rays, received_power_dbm, trace, Ray, SignalLevel, TraceError, TraceResult};
use crate::report::RunReport;
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

pub const SCHEMES: [&str; 3] = ["regular", "kpconfig", "nnconfig"];

/// Training run chosen from a seed sweep.
#[derive(Debug, Clone)]
pub struct NnRun {
    pub seed: u64,
    pub training: TrainingResult,
    pub seeds_tried: usize,
}

/// Trains with seeds `base.seed`, `base.seed + 1`, ... and keeps the first
/// run that converges, or else the one with the lowest final RMSE.
pub fn sweep_seeds(
    net: &LayeredNet,
    targets: &Targets,
    base: &TrainConfig,
    count: usize,
) -> Result<NnRun, LearnerError> {
    let mut runs = Vec::new();
    for i in 0..count.max(1) {
        let seed = base.seed.wrapping_add(i as u64);
        let training = train(net, targets, &TrainConfig { seed, ..base.clone() })?;
        debug!("seed {seed}: {} cycles, rmse {:.3e}, converged {}", training.cycles_run, training.final_state.rmse(), training.converged);
        let done = training.converged;
        runs.push((seed, training));
        if done {
            break;
        }
    }
    Ok(select_run(runs).expect("at least one seed"))
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub report: RunReport,
    pub config: Option<EnvironmentConfig>,
    pub trace: Option<TraceResult>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub net: LayeredNet,
    pub rays: Vec<Ray>,
    pub nn: NnRun,
    /// In the order of `SCHEMES`.
    pub schemes: Vec<SchemeOutcome>,
}

impl Comparison {
    pub fn scheme(&self, name: &str) -> &SchemeOutcome {
        self.schemes.iter().find(|s| s.report.scheme_name == name).expect("known scheme")
    }
}

fn traced(
    scenario: &Scenario,
    name: &str,
    config: EnvironmentConfig,
    rays: &[Ray],
    started: Instant,
) -> Result<SchemeOutcome, TraceError> {
    let t = trace(scenario, &config, rays)?;
    let level = received_power_dbm(&t);
    info!("{name}: received {level}");
    Ok(SchemeOutcome {
        report: RunReport {
            scheme_name: name.into(),
            received_dbm: level,
            active_per_layer: config.active_per_layer(&scenario.layer_order),
            cycles_run: None,
            rmse_final: None,
            wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
            note: None,
        },
        config: Some(config),
        trace: Some(t),
    })
}

fn run_regular(scenario: &Scenario, rays: &[Ray]) -> Result<SchemeOutcome, PipelineError> {
    let started = Instant::now();
    Ok(traced(scenario, "regular", regular_config(scenario), rays, started)?)
}

fn run_kp(scenario: &Scenario, net: &LayeredNet, rays: &[Ray]) -> Result<SchemeOutcome, PipelineError> {
    let started = Instant::now();
    match kp_config(scenario, net) {
        Ok(kp) => {
            let mut out = traced(scenario, "kpconfig", kp.config, rays, started)?;
            if !kp.unreachable.is_empty() {
                out.report.note = Some(format!("rays {:?} miss the first layer", kp.unreachable));
            }
            Ok(out)
        }
        Err(ConfigError::RoutingFailure { stranded }) => {
            warn!("kpconfig: routing failure for rays {stranded:?}");
            Ok(SchemeOutcome {
                report: RunReport {
                    scheme_name: "kpconfig".into(),
                    received_dbm: SignalLevel::NoSignal,
                    active_per_layer: vec![0; scenario.layer_order.len()],
                    cycles_run: None,
                    rmse_final: None,
                    wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
                    note: Some(format!("routing failure: rays {stranded:?} stranded")),
                },
                config: None,
                trace: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn run_nn(
    scenario: &Scenario,
    net: &LayeredNet,
    rays: &[Ray],
    nn: &NnRun,
    started: Instant,
) -> Result<SchemeOutcome, PipelineError> {
    let config = interpret_trained_net(
        net,
        &nn.training.final_omegas,
        &nn.training.final_state,
        scenario.train.activity_threshold,
        scenario.train.inactive_function,
    )?;
    let mut out = traced(scenario, "nnconfig", config, rays, started)?;
    out.report.cycles_run = Some(nn.training.cycles_run);
    out.report.rmse_final = Some(nn.training.final_state.rmse());
    let status = if nn.training.converged { "converged" } else { "not converged" };
    out.report.note = Some(format!("seed {} {status}", nn.seed));
    Ok(out)
}

fn shared_rays(scenario: &Scenario) -> Result<Vec<Ray>, TraceError> {
    let tx = scenario.transmitter().ok_or(TraceError::MissingUser("transmitter"))?;
    emit_rays(tx, scenario.physics.ray_count, scenario.tx_power_w())
}

/// Trains with `seeds` consecutive seeds, then runs the three schemes on the
/// same emitted rays.
///
/// With `parallel` the baselines run on their own threads while the network
/// trains; results are merged in the fixed order of `SCHEMES` either way.
pub fn run_comparison(scenario: &Scenario, seeds: usize, parallel: bool) -> Result<Comparison, PipelineError> {
    let net = build_layered_net(scenario)?;
    let rays = shared_rays(scenario)?;
    let train_nn = || -> Result<(NnRun, Instant), PipelineError> {
        let started = Instant::now();
        let targets = Targets::from_params(&net, &scenario.train);
        Ok((sweep_seeds(&net, &targets, &TrainConfig::from(&scenario.train), seeds)?, started))
    };

    let (regular, kp, trained) = if parallel {
        std::thread::scope(|s| {
            let r = s.spawn(|| run_regular(scenario, &rays));
            let k = s.spawn(|| run_kp(scenario, &net, &rays));
            let n = train_nn();
            (r.join().expect("regular thread"), k.join().expect("kpconfig thread"), n)
        })
    } else {
        (run_regular(scenario, &rays), run_kp(scenario, &net, &rays), train_nn())
    };
    let (nn, started) = trained?;
    let nn_outcome = run_nn(scenario, &net, &rays, &nn, started)?;
    Ok(Comparison { schemes: vec![regular?, kp?, nn_outcome], nn, net, rays })
}

/// Runs the three schemes with an already trained network.
pub fn compare_trained(scenario: &Scenario, nn: NnRun) -> Result<Comparison, PipelineError> {
    let net = build_layered_net(scenario)?;
    let rays = shared_rays(scenario)?;
    let regular = run_regular(scenario, &rays)?;
    let kp = run_kp(scenario, &net, &rays)?;
    let nn_outcome = run_nn(scenario, &net, &rays, &nn, Instant::now())?;
    Ok(Comparison { schemes: vec![regular, kp, nn_outcome], nn, net, rays })
}

/// The run `sweep_seeds` would keep out of `runs`, given in seed order.
pub fn select_run(runs: impl IntoIterator<Item = (u64, TrainingResult)>) -> Option<NnRun> {
    let mut best: Option<(u64, TrainingResult)> = None;
    let mut tried = 0;
    for (seed, training) in runs {
        tried += 1;
        let done = training.converged;
        if done || best.as_ref().is_none_or(|(_, b)| training.final_state.rmse() < b.final_state.rmse()) {
            best = Some((seed, training));
        }
        if done {
            break;
        }
    }
    best.map(|(seed, training)| NnRun { seed, training, seeds_tried: tried })
}
