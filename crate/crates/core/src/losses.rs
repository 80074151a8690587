//! Finite-sum losses and their gradients.
//!
//! A worker's local objective is the average of per-sample losses
//! `f_w(x) = (1/J) Σ_j f_{w,j}(x)` and the global objective is the average of
//! the honest workers' local objectives. Two sample losses are provided:
//!
//! * `LogisticL2`: `ln(1 + exp(-b <a, x>)) + (ρ/2)‖x‖²`
//! * `Quadratic`:  `½‖x - c‖² + (ρ/2)‖x‖²`, with the target `c` stored in the
//!   sample's feature vector.

use crate::error::{check_dim, Error, Result};
use crate::ModelVector;

/// Logistic exponent arguments are clamped to this magnitude.
const EXP_CLAMP: f64 = 500.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: ModelVector,
    /// `±1` for logistic regression; unused by the quadratic loss.
    pub label: f64,
}

impl Sample {
    pub fn new(features: impl Into<ModelVector>, label: f64) -> Self {
        Self {
            features: features.into(),
            label,
        }
    }

    /// A quadratic-loss sample with target `c`.
    pub fn target(c: impl Into<ModelVector>) -> Self {
        Self::new(c, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LogisticL2,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel {
    pub kind: LossKind,
    /// ℓ₂ regularization weight ρ ≥ 0.
    pub rho: f64,
    pub dim: usize,
}

/// Strong convexity, smoothness and gradient-variation constants of a
/// partitioned finite-sum problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub mu: f64,
    pub lipschitz: f64,
    /// δ²: spread of honest local gradients around the global gradient.
    pub outer_variation: f64,
    /// σ²: spread of per-sample gradients around a worker's local gradient.
    pub inner_variation: f64,
    /// True when δ² and σ² are empirical maxima over probe points rather than
    /// proven bounds.
    pub variations_estimated: bool,
}

impl ProblemConstants {
    pub fn new(mu: f64, lipschitz: f64, outer_variation: f64, inner_variation: f64) -> Result<Self> {
        let c = Self {
            mu,
            lipschitz,
            outer_variation,
            inner_variation,
            variations_estimated: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= self.lipschitz && self.lipschitz.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < mu <= L, got mu={} L={}",
                self.mu, self.lipschitz
            )));
        }
        if !(self.outer_variation >= 0.0 && self.inner_variation >= 0.0) {
            return Err(Error::InvalidConfig(
                "gradient variations must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

impl LossModel {
    pub fn logistic(rho: f64, dim: usize) -> Self {
        Self {
            kind: LossKind::LogisticL2,
            rho,
            dim,
        }
    }

    pub fn quadratic(dim: usize) -> Self {
        Self {
            kind: LossKind::Quadratic,
            rho: 0.0,
            dim,
        }
    }

    /// Checks the sample invariants for this model.
    pub fn validate(&self, samples: &[Sample]) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho must be >= 0, got {}", self.rho)));
        }
        for s in samples {
            check_dim(self.dim, s.dim())?;
            if !s.features.is_finite() {
                return Err(Error::NonFinite("sample features"));
            }
            if self.kind == LossKind::LogisticL2 && s.label != 1.0 && s.label != -1.0 {
                return Err(Error::InvalidConfig(format!(
                    "logistic labels must be +1 or -1, got {}",
                    s.label
                )));
            }
        }
        Ok(())
    }

    fn sample_loss(&self, sample: &Sample, x: &[f64]) -> f64 {
        let reg = 0.5 * self.rho * x.iter().fold(0.0, |acc, v| acc + v * v);
        match self.kind {
            LossKind::LogisticL2 => {
                // ln(1 + exp(-m)) without overflow
                let m = sample.label * sample.features.dot(x);
                let t = -m;
                let softplus = if t > 0.0 {
                    t + (-t).exp().ln_1p()
                } else {
                    t.exp().ln_1p()
                };
                softplus + reg
            }
            LossKind::Quadratic => 0.5 * sample.features.dist_sq(x) + reg,
        }
    }

    /// Adds `f'_j(x)` to `acc`, coordinate by coordinate, exactly as
    /// `sample_gradient` would compute each entry.
    fn add_sample_gradient(&self, sample: &Sample, x: &[f64], acc: &mut [f64]) {
        let rho = self.rho;
        match self.kind {
            LossKind::LogisticL2 => {
                let m = (sample.label * sample.features.dot(x)).clamp(-EXP_CLAMP, EXP_CLAMP);
                // -b * sigmoid(-m)
                let coef = -sample.label / (1.0 + m.exp());
                for ((g, a), xi) in acc.iter_mut().zip(sample.features.iter()).zip(x) {
                    *g += coef * a + rho * xi;
                }
            }
            LossKind::Quadratic => {
                for ((g, c), xi) in acc.iter_mut().zip(sample.features.iter()).zip(x) {
                    *g += (xi - c) + rho * xi;
                }
            }
        }
    }

    /// `(1/J) Σ_j f_j(x)`.
    pub fn loss_value(&self, samples: &[Sample], x: &[f64]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        check_dim(self.dim, x.len())?;
        let mut sum = 0.0;
        for s in samples {
            check_dim(self.dim, s.dim())?;
            sum += self.sample_loss(s, x);
        }
        let value = sum / samples.len() as f64;
        if !value.is_finite() {
            return Err(Error::NonFinite("loss value"));
        }
        Ok(value)
    }

    pub fn sample_gradient(&self, sample: &Sample, x: &[f64]) -> Result<ModelVector> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, sample.dim())?;
        let mut g = ModelVector::zeros(self.dim);
        self.add_sample_gradient(sample, x, &mut g);
        Ok(g)
    }

    /// Gradient of sample `index` without dimension checks; callers have
    /// validated the shard up front.
    pub(crate) fn sample_gradient_unchecked(&self, sample: &Sample, x: &[f64]) -> ModelVector {
        let mut g = ModelVector::zeros(self.dim);
        self.add_sample_gradient(sample, x, &mut g);
        g
    }

    /// Mean of the per-sample gradients, summed in index order.
    pub fn full_gradient(&self, samples: &[Sample], x: &[f64]) -> Result<ModelVector> {
        if samples.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        check_dim(self.dim, x.len())?;
        let mut sum = ModelVector::zeros(self.dim);
        for s in samples {
            check_dim(self.dim, s.dim())?;
            // Materialize each gradient first so the sum matches an explicit
            // mean of `sample_gradient` results bit for bit.
            let g = self.sample_gradient_unchecked(s, x);
            sum.add_assign(&g);
        }
        sum.div_assign(samples.len() as f64);
        Ok(sum)
    }

    /// Closed-form strong convexity constant.
    pub fn mu(&self) -> f64 {
        match self.kind {
            LossKind::LogisticL2 => self.rho,
            LossKind::Quadratic => 1.0 + self.rho,
        }
    }

    /// Conservative per-sample gradient Lipschitz constant.
    pub fn lipschitz(&self, samples: &[Sample]) -> f64 {
        match self.kind {
            LossKind::LogisticL2 => {
                let max_sq = samples
                    .iter()
                    .map(|s| s.features.norm_sq())
                    .fold(0.0, f64::max);
                self.rho + max_sq / 4.0
            }
            LossKind::Quadratic => 1.0 + self.rho,
        }
    }
}

/// Global objective: the mean over shards of each shard's average loss.
pub fn global_loss(model: &LossModel, shards: &[&[Sample]], x: &[f64]) -> Result<f64> {
    if shards.is_empty() {
        return Err(Error::Empty("shard list"));
    }
    let mut sum = 0.0;
    for shard in shards {
        sum += model.loss_value(shard, x)?;
    }
    Ok(sum / shards.len() as f64)
}

/// Gradient of [`global_loss`].
pub fn global_gradient(model: &LossModel, shards: &[&[Sample]], x: &[f64]) -> Result<ModelVector> {
    if shards.is_empty() {
        return Err(Error::Empty("shard list"));
    }
    let mut sum = ModelVector::zeros(model.dim);
    for shard in shards {
        sum.add_assign(&model.full_gradient(shard, x)?);
    }
    sum.div_assign(shards.len() as f64);
    Ok(sum)
}

/// Estimates `(μ, L, δ², σ²)` for a partitioned problem.
///
/// `μ` and `L` use closed forms. `δ²` and `σ²` are the largest variations
/// observed at the supplied probe points, so they are estimates rather than
/// bounds over all of `R^p`.
pub fn estimate_constants(
    model: &LossModel,
    shards: &[&[Sample]],
    probes: &[ModelVector],
) -> Result<ProblemConstants> {
    if shards.is_empty() || shards.iter().any(|s| s.is_empty()) {
        return Err(Error::Empty("sample set"));
    }
    if probes.is_empty() {
        return Err(Error::Empty("probe set"));
    }
    if model.kind == LossKind::LogisticL2 && model.rho <= 0.0 {
        return Err(Error::InvalidConfig(
            "logistic loss needs rho > 0 for a strong convexity constant".into(),
        ));
    }
    for shard in shards {
        model.validate(shard)?;
    }

    let lipschitz = shards
        .iter()
        .map(|s| model.lipschitz(s))
        .fold(0.0, f64::max);

    let mut outer: f64 = 0.0;
    let mut inner: f64 = 0.0;
    for x in probes {
        check_dim(model.dim, x.dim())?;
        let local: Vec<ModelVector> = shards
            .iter()
            .map(|s| model.full_gradient(s, x))
            .collect::<Result<_>>()?;
        let mut global = ModelVector::zeros(model.dim);
        for g in &local {
            global.add_assign(g);
        }
        global.div_assign(local.len() as f64);

        let spread = local.iter().fold(0.0, |acc, g| acc + g.dist_sq(&global)) / local.len() as f64;
        outer = outer.max(spread);

        for (shard, g_w) in shards.iter().zip(&local) {
            let within = shard.iter().fold(0.0, |acc, s| {
                acc + model.sample_gradient_unchecked(s, x).dist_sq(g_w)
            }) / shard.len() as f64;
            inner = inner.max(within);
        }
    }

    Ok(ProblemConstants {
        mu: model.mu(),
        lipschitz,
        outer_variation: outer,
        inner_variation: inner,
        variations_estimated: true,
    })
}
