use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use byrd_core::engine::{run_on_problem, Algorithm, Problem};
use byrd_core::ingest::{partition, Dataset};
use byrd_core::losses::estimate_constants;
use byrd_core::theory::{bound_report, BoundReport};
use byrd_core::ModelVector;

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const BOUNDS: &str = "bounds.csv";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: String,
    pub source_config: String,
    pub dataset: DatasetInfo,
    pub x_star_norm: f64,
    pub f_star: f64,
    pub bounds: Option<String>,
    pub outputs: Vec<OutputInfo>,
}

#[derive(Debug, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub sha256: String,
    pub samples: usize,
    pub dim: usize,
}

#[derive(Debug, Serialize)]
pub struct OutputInfo {
    pub file: String,
    pub rounds: usize,
    pub final_gap: Option<f64>,
    pub diverged_at: Option<u64>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub diverged: Vec<String>,
}

fn build_problem(cfg: &RunConfig) -> Result<(Problem, Dataset, Vec<u8>)> {
    let (data, bytes) = cfg.dataset.load(cfg.dim)?;
    let model = cfg.model(data.dim);
    let part = partition(&data, cfg.workers_honest, cfg.partition, cfg.seed)?;
    let problem = Problem::new(model, part, cfg.reference_tol)?;
    Ok((problem, data, bytes))
}

fn bounds_for(cfg: &RunConfig, problem: &Problem) -> Result<BoundReport> {
    let shards = problem.partition.distinct_shards();
    let probes = [ModelVector::zeros(problem.model.dim), problem.x_star.clone()];
    let constants = estimate_constants(&problem.model, &shards, &probes)?;
    Ok(bound_report(
        &constants,
        cfg.workers_honest + cfg.workers_byzantine,
        cfg.workers_byzantine,
        problem.partition.max_shard_len(),
        cfg.step_size(Algorithm::Saga),
        cfg.geomed_eps,
        Some(problem.x_star.norm_sq()),
    )?)
}

/// Computes the bound report for a config without running it.
pub fn bounds(cfg: &RunConfig) -> Result<BoundReport> {
    let (problem, _, _) = build_problem(cfg)?;
    bounds_for(cfg, &problem)
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Runs every grid cell, writing one CSV per cell plus `manifest.json` and
/// `bounds.csv` into `out`.
pub fn run(cfg: &RunConfig, source_config: &str, out: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (problem, data, bytes) = build_problem(cfg)?;

    let bounds_file = match bounds_for(cfg, &problem) {
        Ok(report) => {
            write_atomic(&out.join(BOUNDS), report.to_csv().as_bytes())?;
            Some(BOUNDS.to_string())
        }
        Err(e) => {
            eprintln!("warning: no bounds written: {e}");
            None
        }
    };

    let cells = cfg.cells();
    let outputs: Vec<OutputInfo> = cells
        .par_iter()
        .map(|(name, exp)| -> Result<OutputInfo> {
            let outcome = run_on_problem(exp, &problem).with_context(|| format!("cell {name}"))?;
            let file = format!("{name}.csv");
            write_atomic(&out.join(&file), outcome.csv().as_bytes())?;
            Ok(OutputInfo {
                file,
                rounds: outcome.records.len(),
                final_gap: outcome.records.last().map(|r| r.optimality_gap),
                diverged_at: outcome.divergence.map(|d| d.round),
            })
        })
        .collect::<Result<_>>()?;

    let diverged = outputs
        .iter()
        .filter(|o| o.diverged_at.is_some())
        .map(|o| o.file.clone())
        .collect();
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.render(),
        source_config: source_config.to_string(),
        dataset: DatasetInfo {
            name: data.name.clone(),
            sha256: hex::encode(Sha256::digest(&bytes)),
            samples: data.len(),
            dim: data.dim,
        },
        x_star_norm: problem.x_star.norm(),
        f_star: problem.f_star,
        bounds: bounds_file,
        outputs,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out.join(MANIFEST), json.as_bytes())?;
    Ok(RunSummary { manifest, diverged })
}

pub fn csv_paths(out: &Path, summary: &RunSummary) -> Vec<PathBuf> {
    summary.manifest.outputs.iter().map(|o| out.join(&o.file)).collect()
}
