//! The five subcommands.

use std::path::Path;

use moran_assort::critical::{critical_points, hypotheses};
use moran_assort::moran::{simulate, RunPlan};
use moran_assort::sde::{sde_replicas, BoundaryEvents, SdeConfig, SdeMetadata};
use moran_assort::stationary::{density_grid, normalisation_drift, StationaryDensity, QUADRATURE_MAX_LOCI};
use moran_assort::trajectory::{all_pair_masks, Trajectory};
use moran_assort::verify::{run_suite, Suite, SuiteReport};
use moran_assort::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{core, runtime, usage, CliError, CliResult};
use crate::output::{OutputDir, SeedLineage};

pub const QUADRATURE_ORDER: usize = 48;

/// Outcome of a command that completed and wrote its artifacts.
pub enum Status {
    Ok,
    VerificationFailed,
}

/// CLI overrides applied on top of the configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
}

impl Overrides {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            config.run.seed = s;
        }
        if let Some(r) = self.replicas {
            config.run.replicas = r;
        }
    }
}

fn echo(config: &ExperimentConfig) -> CliResult<serde_json::Value> {
    serde_json::to_value(config).map_err(runtime)
}

fn csv_bytes(traj: &Trajectory) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(runtime)?;
    Ok(buf)
}

pub fn cmd_simulate(mut config: ExperimentConfig, out: &Path, over: &Overrides) -> CliResult<Status> {
    over.apply(&mut config);
    let params = config.model_params()?;
    let pop = params.pop();
    let run = &config.run;
    let lineage = SeedLineage::new(run.seed, over.seed.is_some(), run.replicas);
    let steps = match (run.steps, run.time_horizon) {
        (Some(s), _) => s,
        (None, Some(t)) => (t * (pop * pop) as f64).ceil() as u64,
        (None, None) => return Err(CliError::Usage("simulate needs run.steps or run.time_horizon".into())),
    };
    let plan = RunPlan {
        steps,
        record_every: run.record_every.unwrap_or(pop),
        y_masks: run.y_masks.clone().unwrap_or_else(|| all_pair_masks(config.n)),
    };
    let init = config.initial_population(pop)?;
    let mut dir = OutputDir::create(out)?;
    if run.replicas > 0 {
        let trajs = simulate(&params, &init, &plan, run.seed, run.replicas).map_err(core)?;
        for (r, t) in trajs.iter().enumerate() {
            dir.write(&format!("trajectory_r{r:03}.csv"), &csv_bytes(t)?)?;
        }
    }
    dir.finish("simulate", echo(&config)?, Some(lineage))?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SdeSummary {
    metadata: SdeMetadata,
    x0: Vec<f64>,
    boundary_events: Vec<BoundaryEvents>,
}

pub fn cmd_sde(mut config: ExperimentConfig, out: &Path, over: &Overrides) -> CliResult<Status> {
    over.apply(&mut config);
    if config.population_size.is_some() {
        return Err(CliError::Usage("sde runs take no population_size; use simulate for the Moran chain".into()));
    }
    let spec = config.diffusion_spec()?;
    let run = &config.run;
    let dt = run.dt.ok_or_else(|| CliError::Usage("sde needs run.dt".into()))?;
    let steps = match (run.steps, run.time_horizon) {
        (Some(s), _) => s,
        (None, Some(t)) => (t / dt).ceil() as u64,
        (None, None) => return Err(CliError::Usage("sde needs run.steps or run.time_horizon".into())),
    };
    let sde = SdeConfig {
        dt,
        steps,
        record_every: run.record_every.unwrap_or(((0.01 / dt).round() as u64).max(1)),
        policy: run.policy,
        seed: run.seed,
    };
    let x0 = config.initial_point()?;
    let lineage = SeedLineage::new(run.seed, over.seed.is_some(), run.replicas);
    let runs = sde_replicas(&spec, &sde, &x0, run.replicas).map_err(core)?;
    let mut dir = OutputDir::create(out)?;
    if run.replicas > 0 {
        for (r, result) in runs.iter().enumerate() {
            dir.write(&format!("sde_r{r:03}.csv"), &csv_bytes(&result.trajectory)?)?;
        }
        let summary = SdeSummary {
            metadata: SdeMetadata::new(&sde, sde.policy.resolve(spec.mu0(), spec.mu1())),
            x0,
            boundary_events: runs.into_iter().map(|r| r.events).collect(),
        };
        dir.write_json("sde_summary.json", &summary)?;
    }
    dir.finish("sde", echo(&config)?, Some(lineage))?;
    Ok(Status::Ok)
}

fn default_grid(n: usize) -> usize {
    if n <= 2 {
        101
    } else {
        41
    }
}

pub fn cmd_density(config: ExperimentConfig, out: &Path, grid: Option<usize>) -> CliResult<Status> {
    let n = config.n;
    if n > QUADRATURE_MAX_LOCI {
        return Err(CliError::Usage(format!(
            "dense density grids are limited to n ≤ {QUADRATURE_MAX_LOCI} (got n = {n}); \
             estimate the normalising constant by Monte Carlo and evaluate the density at chosen points instead"
        )));
    }
    let grid = grid.unwrap_or_else(|| default_grid(n));
    if grid == 0 {
        return Err(CliError::Usage("--grid must be positive".into()));
    }
    let sd = StationaryDensity::new(config.diffusion_spec()?).map_err(usage)?;
    let drift = normalisation_drift(&sd, QUADRATURE_ORDER / 2).map_err(core)?;
    let sd = sd.normalised(QUADRATURE_ORDER).map_err(core)?;
    let mut text = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain(["h", "log_density", "density"].map(String::from)).collect();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in density_grid(&sd, grid) {
        let density = row[n + 1].exp();
        let fields: Vec<String> = row.iter().chain(std::iter::once(&density)).map(|v| v.to_string()).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    let mut dir = OutputDir::create(out)?;
    dir.write("density.csv", text.as_bytes())?;
    dir.write_json(
        "density_summary.json",
        &json!({
            "grid": grid,
            "axis": "cell centres (k + 1/2) / grid",
            "quadrature_order": QUADRATURE_ORDER,
            "log_c": sd.log_c(),
            "normalisation_drift": drift,
        }),
    )?;
    dir.finish("density", echo(&config)?, None)?;
    Ok(Status::Ok)
}

pub fn cmd_critical_points(config: ExperimentConfig, out: &Path) -> CliResult<Status> {
    let spec = config.diffusion_spec()?;
    let value = match critical_points(&spec) {
        Ok(report) => {
            let withheld = !report.hypotheses.monotone;
            let mut v = serde_json::to_value(&report).map_err(runtime)?;
            v["h_gaps"] = json!(report.h_gaps());
            v["claims_withheld"] = json!(withheld);
            v
        }
        Err(Error::Hypothesis(reason)) => json!({
            "n": spec.n(),
            "hypotheses": hypotheses(&spec),
            "claims_withheld": true,
            "reason": reason,
        }),
        Err(e) => return Err(core(e)),
    };
    if value["claims_withheld"] == json!(true) {
        eprintln!("note: analysis hypotheses do not hold; structural claims are withheld in the report");
    }
    let mut dir = OutputDir::create(out)?;
    dir.write_json("critical_points.json", &value)?;
    dir.finish("critical-points", echo(&config)?, None)?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct VerifySummary {
    seed: u64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

pub fn cmd_verify(names: &[String], out: &Path, seed: u64) -> CliResult<Status> {
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names.iter().map(|s| s.parse().map_err(usage)).collect::<CliResult<_>>()?
    };
    let mut reports = Vec::with_capacity(suites.len());
    for s in suites {
        let report = run_suite(s, seed).map_err(core)?;
        eprintln!("{} {}", if report.passed { "PASS" } else { "FAIL" }, report.suite);
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    let mut dir = OutputDir::create(out)?;
    dir.write_json("verify.json", &VerifySummary { seed, passed, suites: reports })?;
    dir.finish("verify", json!({ "suites": names, "seed": seed }), Some(SeedLineage::new(seed, true, 0)))?;
    Ok(if passed { Status::Ok } else { Status::VerificationFailed })
}
