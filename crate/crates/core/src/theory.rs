//! Convergence-bound calculators and Monte-Carlo checks of the inequalities
//! behind them.
//!
//! The bounds hold in expectation over sampling randomness, so the checkers
//! compare seed- or trial-averaged quantities and never single trajectories.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::aggregate::{self, AggregatorConfig};
use crate::engine::stream::{RandomStream, StreamPurpose};
use crate::engine::MetricsRecord;
use crate::error::{check_dim, Error, Result};
use crate::losses::ProblemConstants;
use crate::ModelVector;

/// Robustness constant `(2 - 2α) / (1 - 2α)` of the geometric median.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Precondition(format!("alpha = {alpha} outside [0, 0.5)")));
    }
    Ok((2.0 - 2.0 * alpha) / (1.0 - 2.0 * alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub workers: usize,
    pub byzantine: usize,
    pub samples_per_worker: usize,
    pub step_size: f64,
    pub mu: f64,
    pub lipschitz: f64,
    pub outer_variation: f64,
    pub inner_variation: f64,
    pub epsilon: f64,
    /// `B / W`
    pub alpha: f64,
    pub c_alpha: f64,
    /// `μ / (4√5 J² C_α L²)`
    pub saga_step_ceiling: f64,
    /// `μ / (2 L²)`
    pub sgd_step_ceiling: f64,
    /// `(10/μ²)(C_α² δ² + ε²/(W-2B)²)`
    pub delta2: f64,
    /// `(4/μ²)(C_α² σ² + C_α² δ² + ε²/(W-2B)²)`
    pub delta2_prime: f64,
    /// `‖x⁰ - x*‖² - Δ₂`, when both points are known.
    pub delta1: Option<f64>,
    pub delta1_prime: Option<f64>,
    /// `1 - γμ/2`
    pub contraction_saga: f64,
    /// `1 - γμ`
    pub contraction_sgd: f64,
}

impl BoundReport {
    pub fn saga_step_ok(&self) -> bool {
        self.step_size <= self.saga_step_ceiling
    }

    pub fn sgd_step_ok(&self) -> bool {
        self.step_size < self.sgd_step_ceiling
    }

    /// SAGA mean-square-error bound after `k` rounds, when `Δ₁` is known.
    pub fn saga_bound_at(&self, k: u64) -> Option<f64> {
        self.delta1
            .map(|d1| self.contraction_saga.powf(k as f64) * d1 + self.delta2)
    }

    pub fn sgd_bound_at(&self, k: u64) -> Option<f64> {
        self.delta1_prime
            .map(|d1| self.contraction_sgd.powf(k as f64) * d1 + self.delta2_prime)
    }

    /// `(key, value)` rows. Integers print plainly, reals with 17 significant
    /// digits, missing values as empty strings.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let r = |v: f64| format!("{v:.16e}");
        let o = |v: Option<f64>| v.map(r).unwrap_or_default();
        vec![
            ("workers", self.workers.to_string()),
            ("byzantine", self.byzantine.to_string()),
            ("samples_per_worker", self.samples_per_worker.to_string()),
            ("step_size", r(self.step_size)),
            ("mu", r(self.mu)),
            ("lipschitz", r(self.lipschitz)),
            ("outer_variation", r(self.outer_variation)),
            ("inner_variation", r(self.inner_variation)),
            ("epsilon", r(self.epsilon)),
            ("alpha", r(self.alpha)),
            ("c_alpha", r(self.c_alpha)),
            ("saga_step_ceiling", r(self.saga_step_ceiling)),
            ("sgd_step_ceiling", r(self.sgd_step_ceiling)),
            ("delta2", r(self.delta2)),
            ("delta2_prime", r(self.delta2_prime)),
            ("delta1", o(self.delta1)),
            ("delta1_prime", o(self.delta1_prime)),
            ("contraction_saga", r(self.contraction_saga)),
            ("contraction_sgd", r(self.contraction_sgd)),
            ("saga_step_ok", self.saga_step_ok().to_string()),
            ("sgd_step_ok", self.sgd_step_ok().to_string()),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in self.rows() {
            out.push_str(k);
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Evaluates the step-size ceilings and asymptotic error radii.
///
/// `workers` is the total count `W` including the `byzantine` ones, and
/// `initial_distance_sq` is `‖x⁰ - x*‖²` if known.
pub fn bound_report(
    constants: &ProblemConstants,
    workers: usize,
    byzantine: usize,
    samples_per_worker: usize,
    step_size: f64,
    epsilon: f64,
    initial_distance_sq: Option<f64>,
) -> Result<BoundReport> {
    constants.validate()?;
    if workers == 0 || 2 * byzantine >= workers {
        return Err(Error::Precondition(format!(
            "need B < W/2, got B={byzantine} W={workers}"
        )));
    }
    if samples_per_worker == 0 {
        return Err(Error::InvalidConfig("samples_per_worker must be positive".into()));
    }
    if !(step_size > 0.0) {
        return Err(Error::InvalidConfig("step size must be positive".into()));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidConfig("epsilon must be nonnegative".into()));
    }
    let alpha = byzantine as f64 / workers as f64;
    let c = c_alpha(alpha)?;
    let (mu, l) = (constants.mu, constants.lipschitz);
    let j = samples_per_worker as f64;
    let eps_term = (epsilon / (workers - 2 * byzantine) as f64).powi(2);
    let c2 = c * c;
    let delta2 = 10.0 / (mu * mu) * (c2 * constants.outer_variation + eps_term);
    let delta2_prime = 4.0 / (mu * mu)
        * (c2 * constants.inner_variation + c2 * constants.outer_variation + eps_term);
    Ok(BoundReport {
        workers,
        byzantine,
        samples_per_worker,
        step_size,
        mu,
        lipschitz: l,
        outer_variation: constants.outer_variation,
        inner_variation: constants.inner_variation,
        epsilon,
        alpha,
        c_alpha: c,
        saga_step_ceiling: mu / (4.0 * 5f64.sqrt() * j * j * c * l * l),
        sgd_step_ceiling: mu / (2.0 * l * l),
        delta2,
        delta2_prime,
        delta1: initial_distance_sq.map(|d| d - delta2),
        delta1_prime: initial_distance_sq.map(|d| d - delta2_prime),
        contraction_saga: 1.0 - step_size * mu / 2.0,
        contraction_sgd: 1.0 - step_size * mu,
    })
}

/// Honest points for [`check_concentration`]: point `i` is
/// `means[i] + noise_std · N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HonestDistribution {
    pub means: Vec<ModelVector>,
    pub noise_std: f64,
}

impl HonestDistribution {
    /// `count` means drawn once as `center + spread · N(0, I)`.
    pub fn random_means<R: Rng + ?Sized>(
        count: usize,
        center: &ModelVector,
        spread: f64,
        noise_std: f64,
        rng: &mut R,
    ) -> Self {
        let means = (0..count)
            .map(|_| {
                let mut m = center.clone();
                for v in m.iter_mut() {
                    *v += spread * rng.sample::<f64, _>(StandardNormal);
                }
                m
            })
            .collect();
        Self { means, noise_std }
    }

    fn validate(&self) -> Result<usize> {
        let first = self.means.first().ok_or(Error::Empty("honest mean set"))?;
        for m in &self.means {
            check_dim(first.dim(), m.dim())?;
            if !m.is_finite() {
                return Err(Error::NonFinite("honest mean"));
            }
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::InvalidConfig("noise_std must be finite and nonnegative".into()));
        }
        Ok(first.dim())
    }

    /// `z̄`, the mean of the honest expectations.
    pub fn center(&self) -> ModelVector {
        let mut c = ModelVector::zeros(self.means[0].dim());
        for m in &self.means {
            c.add_assign(m);
        }
        c.div_assign(self.means.len() as f64);
        c
    }

    /// `(1/H) Σ_i (E‖z_i - E z_i‖² + ‖E z_i - z̄‖²)`
    pub fn mean_square_spread(&self) -> f64 {
        let c = self.center();
        let p = c.dim() as f64;
        let outer = self.means.iter().map(|m| m.dist_sq(&c)).sum::<f64>() / self.means.len() as f64;
        p * self.noise_std * self.noise_std + outer
    }
}

/// Adversarial placements tried in every concentration trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryCandidate {
    /// All corrupt points at `z̄ + 10⁶ · 1/√p`.
    FarPoint,
    /// All corrupt points at `-u · mean(honest draws)` for `u = 1, 3`.
    FlippedMean,
    /// All corrupt points at the origin.
    Zero,
    /// Corrupt points mirror honest draws through `z̄`.
    Mirror,
}

impl AdversaryCandidate {
    pub const GRID: [AdversaryCandidate; 4] = [Self::FarPoint, Self::FlippedMean, Self::Zero, Self::Mirror];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub trials: usize,
    pub set_size: usize,
    pub corrupt_count: usize,
    /// Trial mean of the worst-of-grid `‖geomed - z̄‖²`.
    pub lhs: f64,
    /// `(C_α √A + ε/(n - 2m))²` with `A` the honest mean-square spread.
    pub rhs: f64,
    pub violated: bool,
}

fn adversary_points(
    candidate: AdversaryCandidate,
    honest: &[ModelVector],
    center: &ModelVector,
    count: usize,
) -> Vec<Vec<ModelVector>> {
    let p = center.dim();
    let mut sample_mean = ModelVector::zeros(p);
    for z in honest {
        sample_mean.add_assign(z);
    }
    sample_mean.div_assign(honest.len() as f64);
    match candidate {
        AdversaryCandidate::FarPoint => {
            let mut far = center.clone();
            for v in far.iter_mut() {
                *v += 1e6 / (p as f64).sqrt();
            }
            vec![vec![far; count]]
        }
        AdversaryCandidate::FlippedMean => [1.0, 3.0]
            .iter()
            .map(|u| vec![sample_mean.scaled(-u); count])
            .collect(),
        AdversaryCandidate::Zero => vec![vec![ModelVector::zeros(p); count]],
        AdversaryCandidate::Mirror => vec![(0..count)
            .map(|i| {
                let mut m = center.scaled(2.0);
                m.sub_assign(&honest[i % honest.len()]);
                m
            })
            .collect()],
    }
}

/// Monte-Carlo check of the geometric median's concentration inequality.
///
/// Each trial draws the honest points, appends `corrupt_count` adversarial
/// points for every grid candidate and keeps the largest squared error of the
/// ε-approximate geometric median. The trial average is compared with
/// `(C_α √A + ε/(n - 2m))²`, which reduces to `C_α² A` at `ε = 0`.
///
/// `distribution.means` has one entry per honest point, so the set size is
/// `means.len() + corrupt_count`. Trials use independent streams derived
/// from `seed` and run in parallel.
pub fn check_concentration(
    trials: usize,
    corrupt_count: usize,
    distribution: &HonestDistribution,
    epsilon: f64,
    seed: u64,
) -> Result<ConcentrationReport> {
    let dim = distribution.validate()?;
    let honest_count = distribution.means.len();
    let set_size = honest_count + corrupt_count;
    if 2 * corrupt_count >= set_size {
        return Err(Error::Precondition(format!(
            "{corrupt_count} corrupt of {set_size} points is not below half"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let config = AggregatorConfig {
        geomed_eps: epsilon,
        ..AggregatorConfig::default()
    };
    config.validate(set_size)?;
    let center = distribution.center();

    let worst: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = RandomStream::derive(seed, StreamPurpose::Trial, 0, t);
            let honest: Vec<ModelVector> = distribution
                .means
                .iter()
                .map(|m| {
                    let mut z = m.clone();
                    for v in z.iter_mut() {
                        *v += distribution.noise_std * rng.sample::<f64, _>(StandardNormal);
                    }
                    z
                })
                .collect();
            if corrupt_count == 0 {
                let g = aggregate::geometric_median(&honest, &config)?;
                return Ok(g.point.dist_sq(&center));
            }
            let mut worst: f64 = 0.0;
            for cand in AdversaryCandidate::GRID {
                for adv in adversary_points(cand, &honest, &center, corrupt_count) {
                    let mut all = honest.clone();
                    all.extend(adv);
                    let g = aggregate::geometric_median(&all, &config)?;
                    worst = worst.max(g.point.dist_sq(&center));
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    debug_assert_eq!(center.dim(), dim);

    let lhs = worst.iter().sum::<f64>() / trials as f64;
    let c = c_alpha(corrupt_count as f64 / set_size as f64)?;
    let slack = epsilon / (set_size - 2 * corrupt_count) as f64;
    let rhs = (c * distribution.mean_square_spread().sqrt() + slack).powi(2);
    Ok(ConcentrationReport {
        trials,
        set_size,
        corrupt_count,
        lhs,
        rhs,
        violated: lhs > rhs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkRecursionReport {
    pub rounds_checked: usize,
    /// Rounds `k` where the averaged `S^{k+1}` exceeded `(1 + slack)` times
    /// the averaged right-hand side.
    pub violations: Vec<u64>,
    /// Largest `S^{k+1} / RHS` over rounds with a positive right-hand side.
    pub max_ratio: f64,
}

/// Checks the seed-averaged recursion
///
/// ```text
/// E S^{k+1} ≤ 4J E‖x^{k+1} - x^k + γ f'(x^k)‖² + 4J γ² L² E‖x^k - x*‖² + (1 - 1/J²) E S^k
/// ```
///
/// on traces recorded with `record_sk`. Every trace must come from the same
/// problem; only rounds present in all traces are checked.
pub fn check_sk_recursion(
    traces: &[Vec<MetricsRecord>],
    lipschitz: f64,
    step_size: f64,
    samples_per_worker: usize,
    slack: f64,
) -> Result<SkRecursionReport> {
    if traces.is_empty() {
        return Err(Error::Empty("trace set"));
    }
    if samples_per_worker == 0 {
        return Err(Error::InvalidConfig("samples_per_worker must be positive".into()));
    }
    let len = traces.iter().map(Vec::len).min().unwrap_or(0);
    if len < 2 {
        return Err(Error::Empty("trace rounds"));
    }
    let n = traces.len() as f64;
    let avg = |f: &dyn Fn(&MetricsRecord) -> Option<f64>, k: usize| -> Result<f64> {
        let mut total = 0.0;
        for t in traces {
            total += f(&t[k]).ok_or(Error::MissingDiagnostics("trace lacks S^k or update residual"))?;
        }
        Ok(total / n)
    };
    let j = samples_per_worker as f64;
    let mut violations = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for (k, record) in traces[0][..len - 1].iter().enumerate() {
        let s_next = avg(&|r| r.s_k, k + 1)?;
        let s_now = avg(&|r| r.s_k, k)?;
        let residual = avg(&|r| r.update_residual_sq, k)?;
        let dist = avg(&|r| Some(r.distance_sq), k)?;
        let rhs = 4.0 * j * residual
            + 4.0 * j * step_size * step_size * lipschitz * lipschitz * dist
            + (1.0 - 1.0 / (j * j)) * s_now;
        if rhs > 0.0 {
            max_ratio = max_ratio.max(s_next / rhs);
        }
        if s_next > (1.0 + slack) * rhs {
            violations.push(record.round);
        }
    }
    Ok(SkRecursionReport {
        rounds_checked: len - 1,
        violations,
        max_ratio,
    })
}
