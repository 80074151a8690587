use crate::error::{Error, Result};
use crate::losses::{global_gradient, global_loss, LossModel, Sample};
use crate::ModelVector;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 1_000_000;

/// Minimizes the global objective over `shards` by full-gradient descent,
/// stopping once `‖f'(x)‖ ≤ tol`. Returns `(x*, f(x*))`.
///
/// The line search backtracks on the directional derivative: a step `t`
/// along `-g` is accepted when `<f'(x - t g), g> ≥ 0`, i.e. when it has not
/// passed the minimizer on that line. For a convex objective this implies
/// descent, and it stays decidable when objective differences drop below
/// `f64` resolution near the optimum. Accepted steps are doubled for the
/// next iteration.
pub fn reference_optimum(
    model: &LossModel,
    shards: &[&[Sample]],
    tol: f64,
) -> Result<(ModelVector, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("solver tolerance must be positive".into()));
    }
    let mut x = ModelVector::zeros(model.dim);
    let mut g = global_gradient(model, shards, &x)?;
    let lipschitz = shards
        .iter()
        .map(|s| model.lipschitz(s))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut step = 1.0 / lipschitz;

    for _ in 0..MAX_ITERS {
        let gnorm_sq = g.norm_sq();
        if gnorm_sq.sqrt() <= tol {
            let f = global_loss(model, shards, &x)?;
            return Ok((x, f));
        }
        loop {
            let mut trial = x.clone();
            trial.axpy(-step, &g);
            let g_trial = global_gradient(model, shards, &trial)?;
            if g_trial.dot(&g) >= 0.0 || step <= 1e-3 / lipschitz {
                x = trial;
                g = g_trial;
                break;
            }
            step *= 0.5;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("reference iterate"));
        }
        step *= 2.0;
    }
    Err(Error::NotConverged {
        what: "reference solver",
        iterations: MAX_ITERS,
        residual: g.norm(),
    })
}
