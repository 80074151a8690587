use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use byrd_core::engine::{read_csv, MetricsRecord, CSV_HEADER};

pub const SUMMARY_HEADER: &str = "file,rounds,final_gap,tail_median_honest_variance,rounds_to_threshold";

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub file: PathBuf,
    pub rounds: usize,
    pub final_gap: f64,
    /// Median honest variance over the last 10% of rounds (at least one).
    pub tail_median_honest_variance: f64,
    /// First round whose optimality gap is at or below the threshold.
    pub rounds_to_threshold: Option<u64>,
}

impl Summary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{}",
            self.file.display(),
            self.rounds,
            self.final_gap,
            self.tail_median_honest_variance,
            self.rounds_to_threshold.map(|r| r.to_string()).unwrap_or_default()
        )
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn summarize_records(file: &Path, records: &[MetricsRecord], threshold: f64) -> Result<Summary> {
    let Some(last) = records.last() else {
        bail!("{}: no records", file.display());
    };
    let tail = (records.len() / 10).max(1);
    let mut variances: Vec<f64> = records[records.len() - tail..]
        .iter()
        .map(|r| r.honest_variance)
        .collect();
    Ok(Summary {
        file: file.to_path_buf(),
        rounds: records.len(),
        final_gap: last.optimality_gap,
        tail_median_honest_variance: median(&mut variances),
        rounds_to_threshold: records.iter().find(|r| r.optimality_gap <= threshold).map(|r| r.round),
    })
}

/// Summarizes every metrics CSV matched by `pattern`. Other files, such as
/// `bounds.csv`, are skipped.
pub fn summarize(pattern: &str, threshold: f64) -> Result<Vec<Summary>> {
    let mut out = Vec::new();
    for entry in glob::glob(pattern).with_context(|| format!("bad pattern `{pattern}`"))? {
        let path = entry?;
        if !path.is_file() {
            continue;
        }
        let Ok(text) = std::fs::read_to_string(&path) else {
            continue;
        };
        if text.lines().next() != Some(CSV_HEADER) {
            continue;
        }
        let records = read_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
        out.push(summarize_records(&path, &records, threshold)?);
    }
    if out.is_empty() {
        bail!("no metrics CSV files match `{pattern}`");
    }
    Ok(out)
}
