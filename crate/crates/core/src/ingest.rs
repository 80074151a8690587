//! Datasets: LIBSVM text I/O, synthetic generators and worker partitions.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::stream::{RandomStream, StreamPurpose};
use crate::error::{Error, Result};
use crate::losses::Sample;
use crate::ModelVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub dim: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let dim = samples.first().ok_or(Error::Empty("dataset"))?.dim();
        if let Some(bad) = samples.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            dim,
            samples,
        })
    }

    /// Quadratic-loss dataset whose samples are the given targets.
    pub fn from_targets(name: impl Into<String>, targets: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            name,
            targets.iter().map(|c| Sample::target(c.clone())).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based, strictly
/// ascending indices. Blank lines and `#` comments are skipped.
///
/// Features are stored densely with dimension `dim_override` or, if absent,
/// the largest index seen. Labels are mapped onto `{-1, +1}`: values in
/// `{-1, 0, +1}` map `0 → -1`; any other two-valued label set maps its
/// smaller value to `-1` and the larger to `+1`.
pub fn parse_libsvm(text: &str, name: &str, dim_override: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("non-numeric label `{label_tok}`")))?;
        if !label.is_finite() {
            return Err(err(format!("non-finite label `{label_tok}`")));
        }
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("malformed feature `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("non-numeric index in `{tok}`")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("non-numeric value in `{tok}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not ascend (previous {last})")));
            }
            if !val.is_finite() {
                return Err(err(format!("non-finite value in `{tok}`")));
            }
            last = idx;
            entries.push((idx, val));
        }
        max_index = max_index.max(last);
        rows.push((label, entries));
    }

    if rows.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let dim = match dim_override {
        Some(p) if p < max_index => {
            return Err(Error::InvalidConfig(format!(
                "dimension override {p} is below the largest index {max_index}"
            )))
        }
        Some(p) => p,
        None => max_index,
    };
    let threshold = label_threshold(rows.iter().map(|r| r.0))?;

    let samples = rows
        .into_iter()
        .map(|(label, entries)| {
            let mut x = vec![0.0; dim];
            for (i, v) in entries {
                x[i - 1] = v;
            }
            Sample::new(x, if label > threshold { 1.0 } else { -1.0 })
        })
        .collect();
    Ok(Dataset {
        name: name.to_string(),
        dim,
        samples,
    })
}

/// Labels above the returned threshold map to +1, the rest to -1.
fn label_threshold(labels: impl Iterator<Item = f64>) -> Result<f64> {
    let mut distinct: Vec<f64> = Vec::new();
    for l in labels {
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    distinct.sort_by(f64::total_cmp);
    let standard = distinct.iter().all(|&l| l == -1.0 || l == 0.0 || l == 1.0);
    let threshold = if standard {
        0.5
    } else if distinct.len() == 2 {
        (distinct[0] + distinct[1]) / 2.0
    } else {
        return Err(Error::Parse {
            line: 0,
            message: format!("labels are not binary: {distinct:?}"),
        });
    };
    Ok(threshold)
}

/// Serializes to LIBSVM text, writing only nonzero features. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_libsvm(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in &dataset.samples {
        out.push_str(if s.label > 0.0 { "+1" } else { "-1" });
        for (i, v) in s.features.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(out, " {}:{}", i + 1, v);
            }
        }
        out.push('\n');
    }
    out
}

/// Reads a LIBSVM file, decompressing transparently when the name ends in
/// `.gz`.
pub fn load_libsvm(path: &Path, dim_override: Option<usize>) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let text = if path.extension().is_some_and(|e| e == "gz") {
        let mut s = String::new();
        flate2::read::GzDecoder::new(&bytes[..]).read_to_string(&mut s)?;
        s
    } else {
        String::from_utf8(bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_libsvm(&text, &name, dim_override)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartitionMode {
    /// Shuffle, then split into contiguous blocks whose sizes differ by at
    /// most one.
    Even,
    /// Every honest worker holds the full dataset.
    ReplicateAll,
}

impl PartitionMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Even => "even",
            Self::ReplicateAll => "replicate_all",
        }
    }
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Self::Even),
            "replicate_all" => Ok(Self::ReplicateAll),
            _ => Err(Error::InvalidConfig(format!("unknown partition mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub mode: PartitionMode,
    shards: Vec<Arc<[Sample]>>,
}

impl Partition {
    pub fn shard(&self, worker: usize) -> &[Sample] {
        &self.shards[worker]
    }

    pub fn shards(&self) -> Vec<&[Sample]> {
        self.shards.iter().map(|s| &s[..]).collect()
    }

    /// Distinct shards only: one copy when replicated. The global objective
    /// over `distinct_shards` equals the one over `shards`.
    pub fn distinct_shards(&self) -> Vec<&[Sample]> {
        match self.mode {
            PartitionMode::ReplicateAll => vec![&self.shards[0][..]],
            PartitionMode::Even => self.shards(),
        }
    }

    pub fn worker_count(&self) -> usize {
        self.shards.len()
    }

    /// Largest per-worker sample count.
    pub fn max_shard_len(&self) -> usize {
        self.shards.iter().map(|s| s.len()).max().unwrap_or(0)
    }
}

/// Splits `dataset` across `honest_count` workers.
pub fn partition(
    dataset: &Dataset,
    honest_count: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Partition> {
    if honest_count == 0 {
        return Err(Error::InvalidConfig("need at least one honest worker".into()));
    }
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let shards = match mode {
        PartitionMode::ReplicateAll => {
            let all: Arc<[Sample]> = dataset.samples.clone().into();
            vec![all; honest_count]
        }
        PartitionMode::Even => {
            let n = dataset.len();
            if honest_count > n {
                return Err(Error::Precondition(format!(
                    "{honest_count} workers but only {n} samples"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut RandomStream::derive(seed, StreamPurpose::Partition, 0, 0));
            let base = n / honest_count;
            let extra = n % honest_count;
            let mut start = 0;
            (0..honest_count)
                .map(|w| {
                    let len = base + usize::from(w < extra);
                    let shard: Vec<Sample> = order[start..start + len]
                        .iter()
                        .map(|&i| dataset.samples[i].clone())
                        .collect();
                    start += len;
                    shard.into()
                })
                .collect()
        }
    };
    Ok(Partition { mode, shards })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthKind {
    /// Targets drawn uniformly from `[-1, 1]^p`.
    Quadratic,
    /// Two unit-variance Gaussian clusters labelled ±1 whose centers are
    /// `separation` apart along the diagonal.
    LogisticBlobs { separation: f64 },
}

pub fn synthesize(kind: SynthKind, n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidConfig("synthetic dataset needs n, p > 0".into()));
    }
    let mut rng = RandomStream::derive(seed, StreamPurpose::Synthesis, 0, 0);
    let samples = match kind {
        SynthKind::Quadratic => (0..n)
            .map(|_| {
                let c: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect();
                Sample::target(c)
            })
            .collect(),
        SynthKind::LogisticBlobs { separation } => {
            let offset = separation / 2.0 / (p as f64).sqrt();
            (0..n)
                .map(|_| {
                    let label = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let x: Vec<f64> = (0..p)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            label * offset + z
                        })
                        .collect();
                    Sample::new(ModelVector::from(x), label)
                })
                .collect()
        }
    };
    let name = match kind {
        SynthKind::Quadratic => format!("synthetic-quadratic-n{n}-p{p}-s{seed}"),
        SynthKind::LogisticBlobs { separation } => {
            format!("synthetic-blobs-n{n}-p{p}-sep{separation}-s{seed}")
        }
    };
    Dataset::new(name, samples)
}
