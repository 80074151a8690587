use std::io::Write;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "round,optimality_gap,distance_sq,honest_variance,s_k,wall_time_ms";

/// Per-round trace entry. Values describe the iterate `x^k` broadcast at
/// round `k` and the messages sent in that round.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub round: u64,
    /// `f(x^k) - f(x*)` over the honest workers' data.
    pub optimality_gap: f64,
    /// `‖x^k - x*‖²`
    pub distance_sq: f64,
    pub honest_variance: f64,
    /// `S^k`, recorded for SAGA in diagnostic mode.
    pub s_k: Option<f64>,
    pub wall_time_ms: f64,
    /// `‖x^{k+1} - x^k + γ f'(x^k)‖²`, recorded together with `s_k`. Not
    /// part of the CSV.
    pub update_residual_sq: Option<f64>,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(records: &[MetricsRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:.3}",
            r.round,
            real(r.optimality_gap),
            real(r.distance_sq),
            real(r.honest_variance),
            r.s_k.map(real).unwrap_or_default(),
            r.wall_time_ms
        )?;
    }
    Ok(())
}

pub fn to_csv_string(records: &[MetricsRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

/// Parses a trace written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing or unexpected CSV header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(err(format!("expected 6 columns, got {}", cols.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("bad number `{s}`")))
        };
        out.push(MetricsRecord {
            round: cols[0]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad round `{}`", cols[0])))?,
            optimality_gap: num(cols[1])?,
            distance_sq: num(cols[2])?,
            honest_variance: num(cols[3])?,
            s_k: if cols[4].trim().is_empty() {
                None
            } else {
                Some(num(cols[4])?)
            },
            wall_time_ms: num(cols[5])?,
            update_residual_sq: None,
        });
    }
    Ok(out)
}

/// Drops the wall-time column, leaving the part of a trace that is covered by
/// the determinism contract.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
