use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use pwe::configurators::EnvironmentConfig;
use pwe::learner::{feed_forward, train, Targets, TrainConfig};
use pwe::netbuild::{build_layered_net, validate_net};
use pwe::pipeline::run_comparison;
use pwe::raytracer::{emit_rays, received_power_dbm, trace, TraceError};
use pwe::report::{omegas_json, reports_csv, reports_text, rmse_curve_csv, segments_csv, trace_summary_json};
use pwe::scenario::Scenario;
use pwe::svg::{floorplan_svg, network_svg};

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(name = "pwe", version, about = "Neural-network configurator for programmable wireless environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and the network built from it.
    Validate { scenario: PathBuf },
    /// Train the tile angles and write the curve, angles and network drawing.
    Train {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ray-trace a scenario under a saved tile configuration.
    Trace {
        scenario: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare regular propagation, greedy routing and the trained network.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of consecutive training seeds to try; the first converged
        /// run is kept, else the one with the lowest RMSE.
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Run the three schemes on separate threads.
        #[arg(long)]
        parallel: bool,
    },
}

/// An error caused by the user's input rather than by the run itself.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn load(path: &Path) -> Result<Scenario> {
    let scenario = Scenario::load(path).map_err(|e| input_err(e.to_string()))?;
    let problems = scenario.validate();
    if !problems.is_empty() {
        return Err(input_err(format!("invalid scenario:\n  {}", problems.join("\n  "))));
    }
    Ok(scenario)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn cmd_validate(path: &Path) -> Result<u8> {
    let scenario = match Scenario::load(path) {
        Ok(s) => s,
        Err(e) => {
            println!("error: {e}");
            return Ok(EXIT_INPUT);
        }
    };
    let mut problems = scenario.validate();
    if problems.is_empty() {
        match build_layered_net(&scenario) {
            Ok(net) => {
                problems.extend(validate_net(&net));
                if problems.is_empty() {
                    println!(
                        "ok: {} walls, layers {:?}, {} links",
                        scenario.walls.len(),
                        net.layer_sizes(),
                        net.links.len()
                    );
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    for p in &problems {
        println!("error: {p}");
    }
    Ok(if problems.is_empty() { 0 } else { EXIT_INPUT })
}

fn cmd_train(path: &Path, out: &Path, seed: Option<u64>) -> Result<u8> {
    let mut scenario = load(path)?;
    if let Some(seed) = seed {
        scenario.train.seed = seed;
    }
    let net = build_layered_net(&scenario).map_err(|e| input_err(e.to_string()))?;
    let targets = Targets::from_params(&net, &scenario.train);
    let cfg = TrainConfig::from(&scenario.train);
    let result = train(&net, &targets, &cfg).map_err(|e| input_err(e.to_string()))?;
    let untrained = feed_forward(&net, &result.initial_omegas, &targets)?;

    out_dir(out)?;
    write(out, "rmse_curve.csv", &rmse_curve_csv(&result))?;
    write(out, "omegas.json", &omegas_json(&net, &result.final_omegas))?;
    write(out, "network.svg", &network_svg(&net, &[("untrained", &untrained), ("trained", &result.final_state)]))?;

    println!(
        "seed {}: {} cycles, rmse {:.3e}, {}",
        cfg.seed,
        result.cycles_run,
        result.final_state.rmse(),
        if result.converged { "converged" } else { "not converged" }
    );
    Ok(if result.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_trace(path: &Path, config: &Path, out: &Path) -> Result<u8> {
    let scenario = load(path)?;
    let text = fs::read_to_string(config).map_err(|e| input_err(format!("cannot read {}: {e}", config.display())))?;
    let config = EnvironmentConfig::from_json_str(&text).map_err(|e| input_err(format!("bad config: {e}")))?;
    let tx = scenario.transmitter().ok_or_else(|| input_err("scenario has no transmitter"))?;
    let rays = emit_rays(tx, scenario.physics.ray_count, scenario.tx_power_w()).map_err(|e| input_err(e.to_string()))?;
    let result = match trace(&scenario, &config, &rays) {
        Ok(r) => r,
        Err(e @ (TraceError::ConfigGap(_) | TraceError::MissingUser(_))) => return Err(input_err(e.to_string())),
        Err(e) => return Err(e.into()),
    };

    out_dir(out)?;
    write(out, "segments.csv", &segments_csv(&result))?;
    write(out, "trace.json", &trace_summary_json(&result))?;
    write(out, "trace.svg", &floorplan_svg(&scenario, Some(&result), &config.scheme_name))?;
    println!("received: {}", received_power_dbm(&result));
    Ok(0)
}

fn cmd_compare(path: &Path, out: &Path, seeds: usize, seed: Option<u64>, parallel: bool) -> Result<u8> {
    let mut scenario = load(path)?;
    if let Some(seed) = seed {
        scenario.train.seed = seed;
    }
    let cmp = run_comparison(&scenario, seeds, parallel).map_err(|e| input_err(e.to_string()))?;
    let reports: Vec<_> = cmp.schemes.iter().map(|s| s.report.clone()).collect();

    out_dir(out)?;
    write(out, "results.csv", &reports_csv(&reports))?;
    write(out, "results.txt", &reports_text(&reports))?;
    write(out, "omegas.json", &omegas_json(&cmp.net, &cmp.nn.training.final_omegas))?;
    write(out, "rmse_curve.csv", &rmse_curve_csv(&cmp.nn.training))?;
    for s in &cmp.schemes {
        let name = &s.report.scheme_name;
        if let Some(config) = &s.config {
            write(out, &format!("config_{name}.json"), &config.to_json_pretty())?;
        }
        if let Some(t) = &s.trace {
            write(out, &format!("segments_{name}.csv"), &segments_csv(t))?;
        }
        write(out, &format!("rays_{name}.svg"), &floorplan_svg(&scenario, s.trace.as_ref(), name))?;
    }
    print!("{}", reports_text(&reports));
    Ok(if cmp.nn.training.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PWE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Train { scenario, out, seed } => cmd_train(&scenario, &out, seed),
        Command::Trace { scenario, config, out } => cmd_trace(&scenario, &config, &out),
        Command::Compare { scenario, out, seeds, seed, parallel } => cmd_compare(&scenario, &out, seeds, seed, parallel),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<InputError>() { EXIT_INPUT } else { 3 })
        }
    }
}
