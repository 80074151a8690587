//! Honest-worker message generation.
//!
//! SGD sends one per-sample gradient, mini-batch SGD the mean over a batch
//! drawn without replacement, and SAGA a corrected gradient built from a
//! per-sample gradient table:
//!
//! ```text
//! m = f'_i(x) - table[i] + avg(table)
//! ```
//!
//! after which `table[i]` is overwritten with `f'_i(x)`.

use rand::seq::index;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::losses::{LossModel, Sample};
use crate::ModelVector;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerMessage {
    pub worker_id: usize,
    pub payload: ModelVector,
    pub round: u64,
}

/// Per-worker SAGA state: the stored gradient table and its running mean.
///
/// In diagnostic mode the state also remembers the iterate at which each
/// entry was last evaluated, which is what [`SagaWorkerState::anchor_spread`]
/// needs.
#[derive(Debug, Clone)]
pub struct SagaWorkerState {
    stored_gradients: Vec<ModelVector>,
    running_average: ModelVector,
    anchors: Option<Vec<ModelVector>>,
    steps_since_resync: usize,
}

impl SagaWorkerState {
    /// Fills the table at `x0` and returns the state plus the initial
    /// message, which is the table average (the local full gradient at `x0`).
    pub fn init(
        model: &LossModel,
        samples: &[Sample],
        x0: &[f64],
        record_anchors: bool,
    ) -> Result<(Self, ModelVector)> {
        if samples.is_empty() {
            return Err(Error::Empty("sample set"));
        }
        check_dim(model.dim, x0.len())?;
        model.validate(samples)?;
        let stored_gradients: Vec<ModelVector> = samples
            .iter()
            .map(|s| model.sample_gradient_unchecked(s, x0))
            .collect();
        let running_average = table_mean(&stored_gradients);
        let anchors = record_anchors.then(|| vec![ModelVector::from(x0); samples.len()]);
        let message = running_average.clone();
        Ok((
            Self {
                stored_gradients,
                running_average,
                anchors,
                steps_since_resync: 0,
            },
            message,
        ))
    }

    pub fn sample_count(&self) -> usize {
        self.stored_gradients.len()
    }

    pub fn stored_gradients(&self) -> &[ModelVector] {
        &self.stored_gradients
    }

    pub fn running_average(&self) -> &ModelVector {
        &self.running_average
    }

    pub fn anchors(&self) -> Option<&[ModelVector]> {
        self.anchors.as_deref()
    }

    /// The message this worker would send at `x` if it drew `index`, without
    /// touching the table.
    pub fn corrected_gradient(
        &self,
        model: &LossModel,
        samples: &[Sample],
        x: &[f64],
        index: usize,
    ) -> ModelVector {
        let fresh = model.sample_gradient_unchecked(&samples[index], x);
        self.correct(&fresh, index)
    }

    fn correct(&self, fresh: &ModelVector, index: usize) -> ModelVector {
        let mut m = fresh.clone();
        m.sub_assign(&self.stored_gradients[index]);
        m.add_assign(&self.running_average);
        m
    }

    /// One SAGA step with a uniformly drawn sample index.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        model: &LossModel,
        samples: &[Sample],
        x: &[f64],
        rng: &mut R,
    ) -> Result<ModelVector> {
        let index = rng.random_range(0..self.sample_count());
        self.step_with_index(model, samples, x, index)
    }

    /// One SAGA step with a given sample index. The message uses the table as
    /// it was before the step; the average and the table entry are updated
    /// afterwards.
    pub fn step_with_index(
        &mut self,
        model: &LossModel,
        samples: &[Sample],
        x: &[f64],
        index: usize,
    ) -> Result<ModelVector> {
        check_dim(self.sample_count(), samples.len())?;
        check_dim(model.dim, x.len())?;
        if index >= self.sample_count() {
            return Err(Error::Precondition(format!(
                "sample index {index} out of range 0..{}",
                self.sample_count()
            )));
        }
        let fresh = model.sample_gradient_unchecked(&samples[index], x);
        let message = self.correct(&fresh, index);

        let j = self.sample_count() as f64;
        let mut delta = fresh.clone();
        delta.sub_assign(&self.stored_gradients[index]);
        delta.div_assign(j);
        self.running_average.add_assign(&delta);
        self.stored_gradients[index] = fresh;
        if let Some(anchors) = &mut self.anchors {
            anchors[index] = ModelVector::from(x);
        }

        self.steps_since_resync += 1;
        if self.steps_since_resync >= 10 * self.sample_count() {
            self.resync();
        }
        Ok(message)
    }

    /// Recomputes the running average from the table, dropping accumulated
    /// rounding drift.
    pub fn resync(&mut self) {
        self.running_average = table_mean(&self.stored_gradients);
        self.steps_since_resync = 0;
    }

    /// `(1/J) Σ_j ‖x - φ_j‖²`, or `None` outside diagnostic mode.
    pub fn anchor_spread(&self, x: &[f64]) -> Option<f64> {
        let anchors = self.anchors.as_ref()?;
        Some(anchors.iter().fold(0.0, |acc, phi| acc + phi.dist_sq(x)) / anchors.len() as f64)
    }
}

fn table_mean(table: &[ModelVector]) -> ModelVector {
    let mut sum = ModelVector::zeros(table[0].dim());
    for g in table {
        sum.add_assign(g);
    }
    sum.div_assign(table.len() as f64);
    sum
}

/// Initializes SAGA at `x0`; see [`SagaWorkerState::init`].
pub fn init_saga(
    model: &LossModel,
    samples: &[Sample],
    x0: &[f64],
    record_anchors: bool,
) -> Result<(SagaWorkerState, ModelVector)> {
    SagaWorkerState::init(model, samples, x0, record_anchors)
}

/// One SAGA step; see [`SagaWorkerState::step`].
pub fn saga_step<R: Rng + ?Sized>(
    state: &mut SagaWorkerState,
    model: &LossModel,
    samples: &[Sample],
    x: &[f64],
    rng: &mut R,
) -> Result<ModelVector> {
    state.step(model, samples, x, rng)
}

/// Gradient of one uniformly drawn sample.
pub fn sgd_step<R: Rng + ?Sized>(
    model: &LossModel,
    samples: &[Sample],
    x: &[f64],
    rng: &mut R,
) -> Result<ModelVector> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    let i = rng.random_range(0..samples.len());
    model.sample_gradient(&samples[i], x)
}

/// Mean gradient over `batch_size` samples drawn without replacement.
///
/// The drawn indices are summed in ascending order, so a full batch
/// reproduces [`LossModel::full_gradient`] exactly.
pub fn bsgd_step<R: Rng + ?Sized>(
    model: &LossModel,
    samples: &[Sample],
    x: &[f64],
    batch_size: usize,
    rng: &mut R,
) -> Result<ModelVector> {
    if samples.is_empty() {
        return Err(Error::Empty("sample set"));
    }
    if batch_size == 0 || batch_size > samples.len() {
        return Err(Error::Precondition(format!(
            "batch size {batch_size} outside 1..={}",
            samples.len()
        )));
    }
    let mut picked = index::sample(rng, samples.len(), batch_size).into_vec();
    picked.sort_unstable();
    let batch: Vec<Sample> = picked.iter().map(|&i| samples[i].clone()).collect();
    model.full_gradient(&batch, x)
}
