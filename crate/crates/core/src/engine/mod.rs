//! Synchronous round loop.
//!
//! Each round the master broadcasts `x^k`, every honest worker produces a
//! message, the Byzantine workers observe those messages and add theirs, and
//! the master applies `x^{k+1} = x^k - γ · aggregate(messages)`.
//!
//! Everything random is drawn from [`stream::RandomStream`]s keyed by the
//! master seed, so a run is a pure function of its configuration and data.

mod metrics;
mod reference;
pub mod stream;

use std::time::Instant;

use rayon::prelude::*;

pub use metrics::{read_csv, strip_wall_time, to_csv_string, write_csv, MetricsRecord, CSV_HEADER};
pub use reference::{reference_optimum, DEFAULT_TOL};

use crate::aggregate::{self, AggregatorConfig};
use crate::attacks::{self, AttackKind, AttackSpec};
use crate::error::{Error, Result};
use crate::ingest::{partition, Dataset, Partition, PartitionMode};
use crate::losses::{global_gradient, global_loss, LossModel};
use crate::workers::{bsgd_step, sgd_step, SagaWorkerState, WorkerMessage};
use crate::ModelVector;
use stream::{RandomStream, StreamPurpose};

/// Iterate norm above which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sgd,
    Bsgd,
    Saga,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Self::Sgd, Self::Bsgd, Self::Saga];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd => "sgd",
            Self::Bsgd => "bsgd",
            Self::Saga => "saga",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    /// Mini-batch size for `bsgd`; clamped to each worker's shard size.
    pub batch_size: usize,
    pub aggregator: AggregatorConfig,
    pub attack: AttackSpec,
    pub honest_workers: usize,
    pub byzantine_workers: usize,
    pub step_size: f64,
    pub iterations: usize,
    pub master_seed: u64,
    pub partition: PartitionMode,
    /// Track SAGA anchor points so `S^k` can be reported.
    pub record_sk: bool,
    /// Permit `B ≥ W/2`, outside the regime where robust aggregation is
    /// guaranteed to work.
    pub allow_byzantine_majority: bool,
    pub reference_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Saga,
            batch_size: 50,
            aggregator: AggregatorConfig::default(),
            attack: AttackSpec::default(),
            honest_workers: 50,
            byzantine_workers: 20,
            step_size: 0.01,
            iterations: 1000,
            master_seed: 0,
            partition: PartitionMode::Even,
            record_sk: false,
            allow_byzantine_majority: false,
            reference_tol: DEFAULT_TOL,
        }
    }
}

impl ExperimentConfig {
    pub fn total_workers(&self) -> usize {
        self.honest_workers + self.byzantine_workers
    }

    /// Messages the master receives per round. A silent attack contributes
    /// nothing.
    pub fn messages_per_round(&self) -> usize {
        match self.attack.kind {
            AttackKind::None => self.honest_workers,
            _ => self.total_workers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.honest_workers == 0 {
            return Err(Error::InvalidConfig("need at least one honest worker".into()));
        }
        if 2 * self.byzantine_workers >= self.total_workers() && !self.allow_byzantine_majority {
            return Err(Error::InvalidConfig(format!(
                "{} Byzantine of {} workers is not below half; set allow_byzantine_majority to override",
                self.byzantine_workers,
                self.total_workers()
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Bsgd && self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.reference_tol > 0.0) {
            return Err(Error::InvalidConfig("reference_tol must be positive".into()));
        }
        self.attack.validate()?;
        self.aggregator.validate(self.messages_per_round())
    }

    /// Returns whether `B ≥ W/2` (only possible with the override set).
    pub fn byzantine_majority(&self) -> bool {
        2 * self.byzantine_workers >= self.total_workers()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// Index of the first iterate that was non-finite or too large.
    pub round: u64,
    pub iterate_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<MetricsRecord>,
    pub final_iterate: ModelVector,
    pub x_star: ModelVector,
    pub f_star: f64,
    pub divergence: Option<Divergence>,
}

impl RunOutcome {
    pub fn csv(&self) -> String {
        to_csv_string(&self.records)
    }
}

/// Honest data and its minimizer, shared by every run on the same partition.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: LossModel,
    pub partition: Partition,
    pub x_star: ModelVector,
    pub f_star: f64,
}

impl Problem {
    pub fn new(model: LossModel, partition: Partition, tol: f64) -> Result<Self> {
        for s in partition.shards() {
            model.validate(s)?;
        }
        let (x_star, f_star) = reference_optimum(&model, &partition.distinct_shards(), tol)?;
        Ok(Self {
            model,
            partition,
            x_star,
            f_star,
        })
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        global_loss(&self.model, &self.partition.distinct_shards(), x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<ModelVector> {
        global_gradient(&self.model, &self.partition.distinct_shards(), x)
    }
}

/// Partitions `dataset` with the master seed, solves for the reference
/// optimum and runs the experiment.
pub fn run_experiment(config: &ExperimentConfig, model: &LossModel, dataset: &Dataset) -> Result<RunOutcome> {
    config.validate()?;
    let part = partition(dataset, config.honest_workers, config.partition, config.master_seed)?;
    let problem = Problem::new(*model, part, config.reference_tol)?;
    run_on_problem(config, &problem)
}

enum Workers {
    Stateless,
    Saga(Vec<SagaWorkerState>),
}

/// Runs `config.iterations` rounds on a prepared problem. The partition in
/// `problem` takes precedence over `config.partition`.
pub fn run_on_problem(config: &ExperimentConfig, problem: &Problem) -> Result<RunOutcome> {
    config.validate()?;
    if problem.partition.worker_count() != config.honest_workers {
        return Err(Error::InvalidConfig(format!(
            "partition has {} shards for {} honest workers",
            problem.partition.worker_count(),
            config.honest_workers
        )));
    }
    let model = &problem.model;
    let shards = problem.partition.shards();
    let seed = config.master_seed;

    let mut x = ModelVector::zeros(model.dim);
    let mut workers = match config.algorithm {
        Algorithm::Saga => Workers::Saga(Vec::new()),
        _ => Workers::Stateless,
    };
    let mut records = Vec::with_capacity(config.iterations);
    let mut divergence = None;

    for k in 0..config.iterations as u64 {
        let started = Instant::now();

        // S^k uses the anchors as they stand when x^k is broadcast, i.e.
        // before this round's table update.
        let pre_sk = match &workers {
            Workers::Saga(states) if config.record_sk && k > 0 => Some(compute_sk(states, &x)?),
            _ => None,
        };

        let honest: Vec<WorkerMessage> = match &mut workers {
            Workers::Saga(states) if k == 0 => {
                let init: Vec<(SagaWorkerState, ModelVector)> = shards
                    .par_iter()
                    .map(|s| SagaWorkerState::init(model, s, &x, config.record_sk))
                    .collect::<Result<_>>()?;
                let (s, msgs): (Vec<_>, Vec<_>) = init.into_iter().unzip();
                *states = s;
                wrap(msgs, k)
            }
            Workers::Saga(states) => {
                let msgs = states
                    .par_iter_mut()
                    .zip(shards.par_iter())
                    .enumerate()
                    .map(|(w, (state, s))| {
                        let mut rng = RandomStream::derive(seed, StreamPurpose::Sampling, w as u64, k);
                        state.step(model, s, &x, &mut rng)
                    })
                    .collect::<Result<Vec<_>>>()?;
                wrap(msgs, k)
            }
            Workers::Stateless => {
                let msgs = shards
                    .par_iter()
                    .enumerate()
                    .map(|(w, s)| {
                        let mut rng = RandomStream::derive(seed, StreamPurpose::Sampling, w as u64, k);
                        match config.algorithm {
                            Algorithm::Sgd => sgd_step(model, s, &x, &mut rng),
                            _ => bsgd_step(model, s, &x, config.batch_size.min(s.len()), &mut rng),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                wrap(msgs, k)
            }
        };

        let s_k = match &workers {
            // The initialization round sets every anchor to x^0, so S^0 = 0.
            Workers::Saga(states) if config.record_sk && k == 0 => Some(compute_sk(states, &x)?),
            _ => pre_sk,
        };

        let attacked = config.byzantine_workers > 0
            && !(config.algorithm == Algorithm::Saga && k == 0 && !config.attack.attack_init_round);
        let byzantine = if attacked {
            let payloads: Vec<ModelVector> = honest.iter().map(|m| m.payload.clone()).collect();
            let mut rng = RandomStream::derive(seed, StreamPurpose::Attack, 0, k);
            attacks::generate(&config.attack, &payloads, config.byzantine_workers, &mut rng)?
        } else {
            Vec::new()
        };
        let round = attacks::assemble_round(honest, byzantine)?;

        let honest_variance = aggregate::honest_variance(round.payloads(), round.honest_mask())?;
        let direction = aggregate::aggregate(&config.aggregator, round.payloads())?;

        let mut record = MetricsRecord {
            round: k,
            optimality_gap: problem.objective(&x)? - problem.f_star,
            distance_sq: x.dist_sq(&problem.x_star),
            honest_variance,
            s_k,
            wall_time_ms: 0.0,
            update_residual_sq: None,
        };

        let mut next = x.clone();
        next.axpy(-config.step_size, &direction);

        if config.record_sk {
            let mut residual = next.sub(&x);
            residual.axpy(config.step_size, &problem.gradient(&x)?);
            record.update_residual_sq = Some(residual.norm_sq());
        }

        record.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
        records.push(record);

        let norm = next.norm();
        x = next;
        if !x.is_finite() || norm > DIVERGENCE_NORM {
            divergence = Some(Divergence {
                round: k + 1,
                iterate_norm: norm,
            });
            break;
        }
    }

    Ok(RunOutcome {
        records,
        final_iterate: x,
        x_star: problem.x_star.clone(),
        f_star: problem.f_star,
        divergence,
    })
}

fn wrap(payloads: Vec<ModelVector>, round: u64) -> Vec<WorkerMessage> {
    payloads
        .into_iter()
        .enumerate()
        .map(|(worker_id, payload)| WorkerMessage {
            worker_id,
            payload,
            round,
        })
        .collect()
}

/// `S^k = (1/|H|) Σ_w (1/J_w) Σ_j ‖x - φ_{w,j}‖²` over honest SAGA states.
pub fn compute_sk(states: &[SagaWorkerState], x: &[f64]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::Empty("worker state set"));
    }
    let mut total = 0.0;
    for s in states {
        total += s
            .anchor_spread(x)
            .ok_or(Error::MissingDiagnostics("S^k requires record_sk"))?;
    }
    Ok(total / states.len() as f64)
}

/// Per-round mean over several runs, truncated to the shortest run. `s_k`
/// and `update_residual_sq` are averaged when every run has them.
pub fn average_records(runs: &[Vec<MetricsRecord>]) -> Result<Vec<MetricsRecord>> {
    let len = runs.iter().map(Vec::len).min().ok_or(Error::Empty("run set"))?;
    let n = runs.len() as f64;
    let avg = |f: &dyn Fn(&MetricsRecord) -> f64, k: usize| runs.iter().map(|r| f(&r[k])).sum::<f64>() / n;
    let avg_opt = |f: &dyn Fn(&MetricsRecord) -> Option<f64>, k: usize| {
        runs.iter()
            .map(|r| f(&r[k]))
            .sum::<Option<f64>>()
            .map(|s| s / n)
    };
    Ok((0..len)
        .map(|k| MetricsRecord {
            round: runs[0][k].round,
            optimality_gap: avg(&|r| r.optimality_gap, k),
            distance_sq: avg(&|r| r.distance_sq, k),
            honest_variance: avg(&|r| r.honest_variance, k),
            s_k: avg_opt(&|r| r.s_k, k),
            wall_time_ms: avg(&|r| r.wall_time_ms, k),
            update_residual_sq: avg_opt(&|r| r.update_residual_sq, k),
        })
        .collect())
}
