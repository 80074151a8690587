//! Experiment config files.
//!
//! Flat `key = value` lines with `#` comments. Aggregator and attack keys may
//! also be grouped under `[aggregator]` and `[attack]` headers, where `rule`
//! and `kind` name the rule itself. `algorithm`, `aggregator` and `attack`
//! accept comma-separated lists, and the run covers their product. Any key
//! can be overridden from the environment as `BYRD_<KEY>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use byrd_core::aggregate::{AggregationRule, AggregatorConfig};
use byrd_core::attacks::{AttackKind, AttackSpec};
use byrd_core::engine::{Algorithm, ExperimentConfig, DEFAULT_TOL};
use byrd_core::ingest::{load_libsvm, synthesize, Dataset, PartitionMode, SynthKind};
use byrd_core::losses::{LossKind, LossModel};

pub const ENV_PREFIX: &str = "BYRD_";

const REQUIRED: [&str; 7] = ["algorithm", "aggregator", "attack", "gamma", "iterations", "seed", "dataset"];

const TOP_KEYS: [&str; 19] = [
    "algorithm",
    "batch_size",
    "workers_honest",
    "workers_byzantine",
    "gamma",
    "gamma_sgd",
    "gamma_bsgd",
    "gamma_saga",
    "iterations",
    "seed",
    "partition",
    "dataset",
    "dim",
    "loss",
    "rho",
    "record_sk",
    "allow_byzantine_majority",
    "reference_tol",
    "threshold",
];
const AGGREGATOR_KEYS: [&str; 4] = ["aggregator", "geomed_eps", "geomed_max_iters", "krum_b"];
const ATTACK_KEYS: [&str; 4] = ["attack", "gaussian_variance", "flip_magnitude", "attack_init_round"];

fn known_key(key: &str) -> bool {
    TOP_KEYS.contains(&key) || AGGREGATOR_KEYS.contains(&key) || ATTACK_KEYS.contains(&key)
}

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// LIBSVM file, optionally gzipped. Relative paths resolve against the
    /// config file's directory.
    File(PathBuf),
    /// `synth:quadratic:<n>:<p>:<seed>`
    Quadratic { n: usize, p: usize, seed: u64 },
    /// `synth:blobs:<n>:<p>:<seed>:<separation>`
    Blobs { n: usize, p: usize, seed: u64, separation: f64 },
}

impl DatasetSpec {
    fn parse(value: &str, base_dir: &Path) -> Result<Self> {
        let Some(rest) = value.strip_prefix("synth:") else {
            let path = Path::new(value);
            return Ok(Self::File(if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            }));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |i: usize, what: &str| -> Result<&str> {
            parts
                .get(i)
                .copied()
                .ok_or_else(|| anyhow!("dataset `{value}`: missing {what}"))
        };
        match parts[0] {
            "quadratic" if parts.len() == 4 => Ok(Self::Quadratic {
                n: num(1, "n")?.parse().context("dataset n")?,
                p: num(2, "p")?.parse().context("dataset p")?,
                seed: num(3, "seed")?.parse().context("dataset seed")?,
            }),
            "blobs" if parts.len() == 5 => Ok(Self::Blobs {
                n: num(1, "n")?.parse().context("dataset n")?,
                p: num(2, "p")?.parse().context("dataset p")?,
                seed: num(3, "seed")?.parse().context("dataset seed")?,
                separation: num(4, "separation")?.parse().context("dataset separation")?,
            }),
            _ => bail!(
                "dataset `{value}`: expected synth:quadratic:<n>:<p>:<seed> or synth:blobs:<n>:<p>:<seed>:<separation>"
            ),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Self::File(p) => p.display().to_string(),
            Self::Quadratic { n, p, seed } => format!("synth:quadratic:{n}:{p}:{seed}"),
            Self::Blobs { n, p, seed, separation } => format!("synth:blobs:{n}:{p}:{seed}:{separation}"),
        }
    }

    pub fn default_loss(&self) -> LossKind {
        match self {
            Self::Quadratic { .. } => LossKind::Quadratic,
            _ => LossKind::LogisticL2,
        }
    }

    /// Loads the samples together with the bytes that define them: the file
    /// contents, or the generator spec for synthetic data.
    pub fn load(&self, dim: Option<usize>) -> Result<(Dataset, Vec<u8>)> {
        match self {
            Self::File(path) => {
                let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let data = load_libsvm(path, dim).with_context(|| format!("parsing {}", path.display()))?;
                Ok((data, bytes))
            }
            Self::Quadratic { n, p, seed } => {
                let data = synthesize(SynthKind::Quadratic, *n, *p, *seed)?;
                Ok((data, self.render().into_bytes()))
            }
            Self::Blobs { n, p, seed, separation } => {
                let data = synthesize(SynthKind::LogisticBlobs { separation: *separation }, *n, *p, *seed)?;
                Ok((data, self.render().into_bytes()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithms: Vec<Algorithm>,
    pub aggregators: Vec<AggregationRule>,
    pub attacks: Vec<AttackKind>,
    pub batch_size: usize,
    pub geomed_eps: f64,
    pub geomed_max_iters: usize,
    /// Byzantine count assumed by Krum; defaults to `workers_byzantine`.
    pub krum_b: usize,
    pub gaussian_variance: f64,
    pub flip_magnitude: f64,
    pub attack_init_round: bool,
    pub workers_honest: usize,
    pub workers_byzantine: usize,
    pub gamma: f64,
    pub gamma_sgd: Option<f64>,
    pub gamma_bsgd: Option<f64>,
    pub gamma_saga: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub partition: PartitionMode,
    pub dataset: DatasetSpec,
    pub dim: Option<usize>,
    pub loss: LossKind,
    /// Ridge weight; defaults to 0.01 for logistic and 0 for quadratic.
    pub rho: f64,
    pub record_sk: bool,
    pub allow_byzantine_majority: bool,
    pub reference_tol: f64,
    /// Optimality-gap level used for rounds-to-threshold in summaries.
    pub threshold: f64,
}

fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::LogisticL2 => "logistic",
        LossKind::Quadratic => "quadratic",
    }
}

fn parse_loss(s: &str) -> Result<LossKind> {
    match s {
        "logistic" => Ok(LossKind::LogisticL2),
        "quadratic" => Ok(LossKind::Quadratic),
        _ => bail!("unknown loss `{s}` (expected logistic or quadratic)"),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("expected a boolean, got `{s}`"),
    }
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> byrd_core::Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse(v).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        bail!("empty list");
    }
    Ok(items)
}

/// Reads `key = value` pairs, mapping sectioned aliases onto flat keys.
fn read_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut section: Option<&str> = None;
    let mut pairs = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "aggregator" => Some("aggregator"),
                "attack" => Some("attack"),
                other => bail!("line {lineno}: unknown section [{other}]"),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {lineno}: expected `key = value`"))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        let key = match (section, key.as_str()) {
            (Some("aggregator"), "rule") => "aggregator".to_string(),
            (Some("attack"), "kind") => "attack".to_string(),
            (Some("attack"), "init_round") => "attack_init_round".to_string(),
            _ => key,
        };
        if !known_key(&key) {
            bail!("line {lineno}: unknown key `{key}`");
        }
        let allowed = match section {
            Some("aggregator") => AGGREGATOR_KEYS.contains(&key.as_str()),
            Some("attack") => ATTACK_KEYS.contains(&key.as_str()),
            _ => true,
        };
        if !allowed {
            bail!("line {lineno}: key `{key}` does not belong in [{}]", section.unwrap_or(""));
        }
        if pairs.insert(key.clone(), value).is_some() {
            bail!("line {lineno}: duplicate key `{key}`");
        }
    }
    Ok(pairs)
}

impl RunConfig {
    /// Parses config text, applying `BYRD_<KEY>` overrides from the process
    /// environment.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::parse_with_env(text, base_dir, |k| std::env::var(k).ok())
    }

    pub fn parse_with_env(text: &str, base_dir: &Path, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut pairs = read_pairs(text)?;
        for key in TOP_KEYS.iter().chain(&AGGREGATOR_KEYS).chain(&ATTACK_KEYS) {
            if let Some(v) = env(&format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())) {
                pairs.insert(key.to_string(), v.trim().to_string());
            }
        }

        let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !pairs.contains_key(*k)).collect();
        if !missing.is_empty() {
            bail!("missing required keys: {}", missing.join(", "));
        }

        let get = |k: &str| pairs.get(k).map(String::as_str);
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}"))
        }
        let opt_num = |k: &str| -> Result<Option<f64>> { get(k).map(|v| num::<f64>(k, v)).transpose() };

        let dataset = DatasetSpec::parse(get("dataset").unwrap(), base_dir)?;
        let loss = get("loss").map_or(Ok(dataset.default_loss()), parse_loss)?;
        let default_rho = match loss {
            LossKind::LogisticL2 => 0.01,
            LossKind::Quadratic => 0.0,
        };
        let workers_byzantine = get("workers_byzantine").map_or(Ok(20), |v| num("workers_byzantine", v))?;
        let cfg = Self {
            algorithms: parse_list(get("algorithm").unwrap(), str::parse).context("key `algorithm`")?,
            aggregators: parse_list(get("aggregator").unwrap(), str::parse).context("key `aggregator`")?,
            attacks: parse_list(get("attack").unwrap(), str::parse).context("key `attack`")?,
            batch_size: get("batch_size").map_or(Ok(50), |v| num("batch_size", v))?,
            geomed_eps: get("geomed_eps").map_or(Ok(1e-5), |v| num("geomed_eps", v))?,
            geomed_max_iters: get("geomed_max_iters").map_or(Ok(1000), |v| num("geomed_max_iters", v))?,
            krum_b: get("krum_b").map_or(Ok(workers_byzantine), |v| num("krum_b", v))?,
            gaussian_variance: get("gaussian_variance").map_or(Ok(30.0), |v| num("gaussian_variance", v))?,
            flip_magnitude: get("flip_magnitude").map_or(Ok(-3.0), |v| num("flip_magnitude", v))?,
            attack_init_round: get("attack_init_round").map_or(Ok(true), parse_bool)?,
            workers_honest: get("workers_honest").map_or(Ok(50), |v| num("workers_honest", v))?,
            workers_byzantine,
            gamma: num("gamma", get("gamma").unwrap())?,
            gamma_sgd: opt_num("gamma_sgd")?,
            gamma_bsgd: opt_num("gamma_bsgd")?,
            gamma_saga: opt_num("gamma_saga")?,
            iterations: num("iterations", get("iterations").unwrap())?,
            seed: num("seed", get("seed").unwrap())?,
            partition: get("partition").map_or(Ok(PartitionMode::Even), str::parse)?,
            dim: get("dim").map(|v| num("dim", v)).transpose()?,
            loss,
            rho: get("rho").map_or(Ok(default_rho), |v| num("rho", v))?,
            record_sk: get("record_sk").map_or(Ok(false), parse_bool)?,
            allow_byzantine_majority: get("allow_byzantine_majority").map_or(Ok(false), parse_bool)?,
            reference_tol: get("reference_tol").map_or(Ok(DEFAULT_TOL), |v| num("reference_tol", v))?,
            threshold: get("threshold").map_or(Ok(1e-3), |v| num("threshold", v))?,
            dataset,
        };
        for (_, c) in cfg.cells() {
            c.validate()?;
        }
        if !(cfg.rho >= 0.0) {
            bail!("rho must be nonnegative");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base).with_context(|| format!("in {}", path.display()))?;
        Ok((cfg, text))
    }

    /// Canonical flat rendering; parses back to an equal config.
    pub fn render(&self) -> String {
        fn join<T>(items: &[T], name: impl Fn(&T) -> &'static str) -> String {
            items.iter().map(name).collect::<Vec<_>>().join(",")
        }
        let mut lines = vec![
            format!("algorithm = {}", join(&self.algorithms, Algorithm::name)),
            format!("aggregator = {}", join(&self.aggregators, AggregationRule::name)),
            format!("attack = {}", join(&self.attacks, AttackKind::name)),
            format!("batch_size = {}", self.batch_size),
            format!("geomed_eps = {}", self.geomed_eps),
            format!("geomed_max_iters = {}", self.geomed_max_iters),
            format!("krum_b = {}", self.krum_b),
            format!("gaussian_variance = {}", self.gaussian_variance),
            format!("flip_magnitude = {}", self.flip_magnitude),
            format!("attack_init_round = {}", self.attack_init_round),
            format!("workers_honest = {}", self.workers_honest),
            format!("workers_byzantine = {}", self.workers_byzantine),
            format!("gamma = {}", self.gamma),
        ];
        for (key, v) in [
            ("gamma_sgd", self.gamma_sgd),
            ("gamma_bsgd", self.gamma_bsgd),
            ("gamma_saga", self.gamma_saga),
        ] {
            if let Some(v) = v {
                lines.push(format!("{key} = {v}"));
            }
        }
        lines.extend([
            format!("iterations = {}", self.iterations),
            format!("seed = {}", self.seed),
            format!("partition = {}", self.partition.name()),
            format!("dataset = {}", self.dataset.render()),
        ]);
        if let Some(d) = self.dim {
            lines.push(format!("dim = {d}"));
        }
        lines.extend([
            format!("loss = {}", loss_name(self.loss)),
            format!("rho = {}", self.rho),
            format!("record_sk = {}", self.record_sk),
            format!("allow_byzantine_majority = {}", self.allow_byzantine_majority),
            format!("reference_tol = {}", self.reference_tol),
            format!("threshold = {}", self.threshold),
        ]);
        lines.join("\n") + "\n"
    }

    pub fn model(&self, dim: usize) -> LossModel {
        match self.loss {
            LossKind::LogisticL2 => LossModel::logistic(self.rho, dim),
            LossKind::Quadratic => LossModel {
                rho: self.rho,
                ..LossModel::quadratic(dim)
            },
        }
    }

    pub fn step_size(&self, algorithm: Algorithm) -> f64 {
        match algorithm {
            Algorithm::Sgd => self.gamma_sgd,
            Algorithm::Bsgd => self.gamma_bsgd,
            Algorithm::Saga => self.gamma_saga,
        }
        .unwrap_or(self.gamma)
    }

    /// One engine config per (algorithm, aggregator, attack) cell, named
    /// `<algorithm>_<aggregator>_<attack>`.
    pub fn cells(&self) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &rule in &self.aggregators {
                for &attack in &self.attacks {
                    let name = format!("{}_{}_{}", algorithm.name(), rule.name(), attack.name());
                    out.push((
                        name,
                        ExperimentConfig {
                            algorithm,
                            batch_size: self.batch_size,
                            aggregator: AggregatorConfig {
                                rule,
                                geomed_eps: self.geomed_eps,
                                geomed_max_iters: self.geomed_max_iters,
                                krum_byzantine_count: self.krum_b,
                            },
                            attack: AttackSpec {
                                kind: attack,
                                gaussian_variance: self.gaussian_variance,
                                flip_magnitude: self.flip_magnitude,
                                attack_init_round: self.attack_init_round,
                            },
                            honest_workers: self.workers_honest,
                            byzantine_workers: self.workers_byzantine,
                            step_size: self.step_size(algorithm),
                            iterations: self.iterations,
                            master_seed: self.seed,
                            partition: self.partition,
                            record_sk: self.record_sk && algorithm == Algorithm::Saga,
                            allow_byzantine_majority: self.allow_byzantine_majority,
                            reference_tol: self.reference_tol,
                        },
                    ));
                }
            }
        }
        out
    }
}
