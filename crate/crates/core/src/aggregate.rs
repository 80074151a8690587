//! Aggregation rules applied by the master to one round of messages.
//!
//! Aggregators only ever see a slice of payloads. Which messages came from
//! honest workers is known to the simulation harness (see
//! [`crate::attacks::RoundMessages`]) and is never passed here.

use crate::error::{check_dim, Error, Result};
use crate::ModelVector;

/// Distances below this are treated as coincident in the Weiszfeld update.
const ANCHOR_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationRule {
    Mean,
    GeoMed,
    Median,
    Krum,
}

impl AggregationRule {
    pub const ALL: [AggregationRule; 4] = [Self::Mean, Self::GeoMed, Self::Median, Self::Krum];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::GeoMed => "geomed",
            Self::Median => "median",
            Self::Krum => "krum",
        }
    }
}

impl std::str::FromStr for AggregationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown aggregator `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatorConfig {
    pub rule: AggregationRule,
    /// ε of the ε-approximate geometric median.
    pub geomed_eps: f64,
    pub geomed_max_iters: usize,
    /// Number of Byzantine workers assumed by Krum.
    pub krum_byzantine_count: usize,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self {
            rule: AggregationRule::GeoMed,
            geomed_eps: 1e-5,
            geomed_max_iters: 1000,
            krum_byzantine_count: 0,
        }
    }
}

impl AggregatorConfig {
    pub fn new(rule: AggregationRule) -> Self {
        Self {
            rule,
            ..Self::default()
        }
    }

    /// Checks the configuration against the number of messages per round.
    pub fn validate(&self, message_count: usize) -> Result<()> {
        if !(self.geomed_eps > 0.0) {
            return Err(Error::InvalidConfig("geomed_eps must be positive".into()));
        }
        if self.geomed_max_iters == 0 {
            return Err(Error::InvalidConfig("geomed_max_iters must be positive".into()));
        }
        if self.rule == AggregationRule::Krum && message_count < self.krum_byzantine_count + 3 {
            return Err(Error::InvalidConfig(format!(
                "krum needs at least {} messages, got {message_count}",
                self.krum_byzantine_count + 3
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeomedResult {
    pub point: ModelVector,
    /// `Σ_z ‖point - z‖` at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Validates a message set and returns the common dimension.
fn check_messages(messages: &[ModelVector]) -> Result<usize> {
    let first = messages.first().ok_or(Error::Empty("message set"))?;
    let dim = first.dim();
    for m in &messages[1..] {
        check_dim(dim, m.dim())?;
    }
    Ok(dim)
}

/// Applies the configured rule.
pub fn aggregate(config: &AggregatorConfig, messages: &[ModelVector]) -> Result<ModelVector> {
    match config.rule {
        AggregationRule::Mean => mean(messages),
        AggregationRule::GeoMed => geometric_median(messages, config).map(|r| r.point),
        AggregationRule::Median => coordinate_median(messages),
        AggregationRule::Krum => krum(messages, config),
    }
}

/// Arithmetic mean, accumulated in message order.
pub fn mean(messages: &[ModelVector]) -> Result<ModelVector> {
    let dim = check_messages(messages)?;
    let mut sum = ModelVector::zeros(dim);
    for m in messages {
        sum.add_assign(m);
    }
    sum.div_assign(messages.len() as f64);
    Ok(sum)
}

/// `Σ_z ‖y - z‖`
pub fn geomed_objective(messages: &[ModelVector], y: &[f64]) -> f64 {
    messages.iter().fold(0.0, |acc, z| acc + z.dist(y))
}

/// Upper bound on `geomed_objective(messages, y) - min_x geomed_objective`.
///
/// Uses weak duality: for any `u_i` with `‖u_i‖ ≤ 1` and `Σ u_i = 0`, every
/// `x` satisfies `Σ‖x - z_i‖ ≥ Σ<u_i, y - z_i>`. The `u_i` are the unit
/// directions from each message to `y`, with coincident messages absorbing
/// the resultant, then centered and scaled into the unit ball.
pub fn geomed_gap_bound(messages: &[ModelVector], y: &[f64]) -> f64 {
    let dim = y.len();
    let mut units: Vec<Option<ModelVector>> = Vec::with_capacity(messages.len());
    let mut resultant = ModelVector::zeros(dim);
    let mut objective = 0.0;
    let mut coincident = 0usize;
    for z in messages {
        let mut u = ModelVector::from(y);
        u.sub_assign(z);
        let d = u.norm();
        objective += d;
        if d < ANCHOR_DISTANCE {
            coincident += 1;
            units.push(None);
        } else {
            u.div_assign(d);
            resultant.add_assign(&u);
            units.push(Some(u));
        }
    }
    let n = messages.len() as f64;
    let fill = resultant.scaled(-1.0 / coincident.max(1) as f64);
    // Centering is a no-op once coincident messages absorb the resultant.
    let shift = if coincident > 0 {
        ModelVector::zeros(dim)
    } else {
        resultant.scaled(1.0 / n)
    };
    let mut dirs: Vec<ModelVector> = units
        .into_iter()
        .map(|u| {
            let mut v = u.unwrap_or_else(|| fill.clone());
            v.sub_assign(&shift);
            v
        })
        .collect();
    let largest = dirs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if largest > 1.0 {
        for v in &mut dirs {
            v.div_assign(largest);
        }
    }
    let lower = messages.iter().zip(&dirs).fold(0.0, |acc, (z, u)| {
        acc + u.iter().zip(y).zip(z.iter()).map(|((ui, yi), zi)| ui * (yi - zi)).sum::<f64>()
    });
    (objective - lower).max(0.0)
}

/// ε-approximate geometric median by Weiszfeld iteration.
///
/// Starts from the coordinate-wise median and iterates until the duality
/// bound of [`geomed_gap_bound`] certifies the objective to within `ε` of the
/// minimum, the objective stops decreasing in floating point, or
/// `geomed_max_iters` is reached (`converged` is then false).
///
/// Messages within `1e-12` of the iterate count as coincident. The plain
/// Weiszfeld map is undefined there, and capping their weight pins the
/// iterate in place, so coincident points are handled with the Vardi-Zhang
/// step instead: stay if the pull of the other points is no stronger than the
/// coincident multiplicity (the point is then optimal), otherwise move off
/// it. The best iterate is finally compared against every input message,
/// which settles minimizers on a data point that the iteration only
/// approaches sublinearly.
///
/// The certificate bounds the objective, not the distance to the minimizer:
/// near a smooth minimum an objective gap `g` allows a point error of order
/// `√g`.
pub fn geometric_median(messages: &[ModelVector], config: &AggregatorConfig) -> Result<GeomedResult> {
    let dim = check_messages(messages)?;
    if !(config.geomed_eps > 0.0) {
        return Err(Error::InvalidConfig("geomed_eps must be positive".into()));
    }
    let eps = config.geomed_eps;

    // A canonical order makes the floating-point result independent of the
    // order in which messages arrive.
    let mut sorted: Vec<&ModelVector> = messages.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let messages: Vec<ModelVector> = sorted.into_iter().cloned().collect();
    let messages = &messages[..];

    let mut y = coordinate_median(messages)?;
    let mut dists: Vec<f64> = messages.iter().map(|z| z.dist(&y)).collect();
    let mut obj = dists.iter().sum::<f64>();
    let mut best = (y.clone(), obj);
    let mut iterations = 0;

    while iterations < config.geomed_max_iters && geomed_gap_bound(messages, &y) > eps {
        iterations += 1;
        let mut num = ModelVector::zeros(dim);
        let mut den = 0.0;
        let mut coincident = 0usize;
        for (z, &d) in messages.iter().zip(&dists) {
            if d < ANCHOR_DISTANCE {
                coincident += 1;
            } else {
                num.axpy(1.0 / d, z);
                den += 1.0 / d;
            }
        }
        if den == 0.0 {
            break;
        }
        num.div_assign(den);
        if coincident > 0 {
            // Resultant pull of the other points: den · (T(y) - y).
            let pull = num.sub(&y).norm() * den;
            let eta = coincident as f64;
            if pull <= eta {
                break;
            }
            let keep = eta / pull;
            num.scale(1.0 - keep);
            num.axpy(keep, &y);
        }
        y = num;

        for (d, z) in dists.iter_mut().zip(messages) {
            *d = z.dist(&y);
        }
        let next = dists.iter().sum::<f64>();
        if next < best.1 {
            best = (y.clone(), next);
        }
        if next >= obj {
            break;
        }
        obj = next;
    }

    for z in messages {
        let at_z = geomed_objective(messages, z);
        if at_z < best.1 {
            best = (z.clone(), at_z);
        }
    }
    let converged = geomed_gap_bound(messages, &best.0) <= eps;

    Ok(GeomedResult {
        point: best.0,
        objective: best.1,
        iterations,
        converged,
    })
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Per-coordinate median; an even count averages the two central values.
pub fn coordinate_median(messages: &[ModelVector]) -> Result<ModelVector> {
    let dim = check_messages(messages)?;
    let mut column = vec![0.0; messages.len()];
    let out = (0..dim)
        .map(|i| {
            for (c, m) in column.iter_mut().zip(messages) {
                *c = m[i];
            }
            median_of(&mut column)
        })
        .collect::<Vec<_>>();
    Ok(out.into())
}

/// Krum scores: for each message, the summed squared distance to its
/// `W - B - 2` nearest other messages.
pub fn krum_scores(messages: &[ModelVector], byzantine_count: usize) -> Result<Vec<f64>> {
    check_messages(messages)?;
    let n = messages.len();
    if n < byzantine_count + 3 {
        return Err(Error::Precondition(format!(
            "krum needs W >= B + 3 (W={n}, B={byzantine_count})"
        )));
    }
    let neighbors = n - byzantine_count - 2;
    let mut pairwise = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = messages[i].dist_sq(&messages[j]);
            pairwise[i * n + j] = d;
            pairwise[j * n + i] = d;
        }
    }
    let mut row = Vec::with_capacity(n - 1);
    Ok((0..n)
        .map(|i| {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| pairwise[i * n + j]));
            row.sort_by(f64::total_cmp);
            row[..neighbors].iter().sum()
        })
        .collect())
}

/// Returns the message with the lowest Krum score; ties go to the lowest
/// index.
pub fn krum(messages: &[ModelVector], config: &AggregatorConfig) -> Result<ModelVector> {
    let scores = krum_scores(messages, config.krum_byzantine_count)?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    Ok(messages[best].clone())
}

/// `(1/|H|) Σ_{w∈H} ‖m_w - mean_H‖²` over the messages flagged honest.
pub fn honest_variance(messages: &[ModelVector], honest_mask: &[bool]) -> Result<f64> {
    check_dim(messages.len(), honest_mask.len())?;
    let honest: Vec<ModelVector> = messages
        .iter()
        .zip(honest_mask)
        .filter(|(_, &h)| h)
        .map(|(m, _)| m.clone())
        .collect();
    if honest.is_empty() {
        return Err(Error::Empty("honest set"));
    }
    let center = mean(&honest)?;
    Ok(honest.iter().fold(0.0, |acc, m| acc + m.dist_sq(&center)) / honest.len() as f64)
}
