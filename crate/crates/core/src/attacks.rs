//! Omniscient Byzantine adversaries.
//!
//! Byzantine workers hold no data. Each round they observe the honest
//! messages of that round and emit payloads that are a pure function of those
//! messages and a random stream.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::workers::WorkerMessage;
use crate::ModelVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    None,
    Gaussian,
    SignFlip,
    ZeroGradient,
}

impl AttackKind {
    pub const ALL: [AttackKind; 4] = [Self::None, Self::Gaussian, Self::SignFlip, Self::ZeroGradient];

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Gaussian => "gaussian",
            Self::SignFlip => "sign_flip",
            Self::ZeroGradient => "zero_gradient",
        }
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown attack `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Per-coordinate variance of the Gaussian attack.
    pub gaussian_variance: f64,
    /// Multiplier `u` applied to the honest mean by the sign-flipping attack.
    pub flip_magnitude: f64,
    /// Whether Byzantine workers also corrupt the SAGA initialization round.
    pub attack_init_round: bool,
}

impl Default for AttackSpec {
    fn default() -> Self {
        Self {
            kind: AttackKind::None,
            gaussian_variance: 30.0,
            flip_magnitude: -3.0,
            attack_init_round: true,
        }
    }
}

impl AttackSpec {
    pub fn new(kind: AttackKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == AttackKind::Gaussian && !(self.gaussian_variance > 0.0) {
            return Err(Error::InvalidConfig(
                "gaussian_variance must be positive".into(),
            ));
        }
        if !self.flip_magnitude.is_finite() {
            return Err(Error::InvalidConfig("flip_magnitude must be finite".into()));
        }
        Ok(())
    }
}

/// Produces `byzantine_count` payloads for one round.
///
/// `honest` must be in worker-id order. For the zero-gradient attack the last
/// payload absorbs the rounding error of the others, so that summing all
/// messages in worker order (honest first) gives exactly zero.
pub fn generate<R: Rng + ?Sized>(
    spec: &AttackSpec,
    honest: &[ModelVector],
    byzantine_count: usize,
    rng: &mut R,
) -> Result<Vec<ModelVector>> {
    let first = honest.first().ok_or(Error::Empty("honest message set"))?;
    let dim = first.dim();
    for m in honest {
        check_dim(dim, m.dim())?;
    }
    spec.validate()?;
    if spec.kind == AttackKind::None || byzantine_count == 0 {
        return Ok(Vec::new());
    }

    let mut sum = ModelVector::zeros(dim);
    for m in honest {
        sum.add_assign(m);
    }
    let mut honest_mean = sum.clone();
    honest_mean.div_assign(honest.len() as f64);

    let payloads = match spec.kind {
        AttackKind::None => unreachable!(),
        AttackKind::Gaussian => {
            let noise = Normal::new(0.0, spec.gaussian_variance.sqrt())
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            (0..byzantine_count)
                .map(|_| {
                    let mut p = honest_mean.clone();
                    for v in p.iter_mut() {
                        *v += noise.sample(rng);
                    }
                    p
                })
                .collect()
        }
        AttackKind::SignFlip => vec![honest_mean.scaled(spec.flip_magnitude); byzantine_count],
        AttackKind::ZeroGradient => {
            let mut share = sum.clone();
            share.div_assign(-(byzantine_count as f64));
            let mut partial = sum;
            let mut out = Vec::with_capacity(byzantine_count);
            for _ in 1..byzantine_count {
                partial.add_assign(&share);
                out.push(share.clone());
            }
            out.push(partial.scaled(-1.0));
            out
        }
    };
    Ok(payloads)
}

/// All messages of one round in worker-id order: honest workers first, then
/// the Byzantine ones.
///
/// Aggregators receive [`RoundMessages::payloads`] only; the honest mask is
/// for metrics.
///
/// ```compile_fail
/// # use byrd_core::{aggregate, attacks::assemble_round, workers::WorkerMessage, ModelVector};
/// let round = assemble_round(vec![], vec![]).unwrap();
/// aggregate::mean(round.honest_mask()).unwrap();
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessages {
    payloads: Vec<ModelVector>,
    honest_mask: Vec<bool>,
}

impl RoundMessages {
    pub fn payloads(&self) -> &[ModelVector] {
        &self.payloads
    }

    pub fn honest_mask(&self) -> &[bool] {
        &self.honest_mask
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn honest_payloads(&self) -> impl Iterator<Item = &ModelVector> {
        self.payloads
            .iter()
            .zip(&self.honest_mask)
            .filter(|(_, &h)| h)
            .map(|(m, _)| m)
    }
}

/// Orders honest messages by worker id and appends the Byzantine payloads.
pub fn assemble_round(
    mut honest: Vec<WorkerMessage>,
    byzantine: Vec<ModelVector>,
) -> Result<RoundMessages> {
    honest.sort_by_key(|m| m.worker_id);
    if honest.windows(2).any(|w| w[0].worker_id == w[1].worker_id) {
        return Err(Error::Precondition("duplicate honest worker id".into()));
    }
    let mut honest_mask = vec![true; honest.len()];
    honest_mask.extend(std::iter::repeat_n(false, byzantine.len()));
    let mut payloads: Vec<ModelVector> = honest.into_iter().map(|m| m.payload).collect();
    payloads.extend(byzantine);
    Ok(RoundMessages {
        payloads,
        honest_mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> ModelVector {
        ModelVector::from(x.to_vec())
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(42)
    }

    #[test]
    fn zero_gradient_cancels_sum() {
        let honest = vec![v(&[1.0]), v(&[2.0]), v(&[3.0])];
        let byz = generate(&AttackSpec::new(AttackKind::ZeroGradient), &honest, 2, &mut rng()).unwrap();
        assert_eq!(byz, vec![v(&[-3.0]), v(&[-3.0])]);
        let total: f64 = honest.iter().chain(&byz).map(|m| m[0]).sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn zero_gradient_sum_is_exact_for_awkward_values() {
        let mut r = rng();
        for b in 1..6 {
            let honest: Vec<ModelVector> = (0..7)
                .map(|_| v(&[r.random_range(-3.0..3.0), r.random_range(-1e3..1e3), 0.1]))
                .collect();
            let byz = generate(&AttackSpec::new(AttackKind::ZeroGradient), &honest, b, &mut r).unwrap();
            let all: Vec<ModelVector> = honest.into_iter().chain(byz).collect();
            let m = aggregate::mean(&all).unwrap();
            assert!(m.iter().all(|&c| c == 0.0), "b={b}: {m:?}");
        }
    }

    #[test]
    fn single_attacker_kills_mean() {
        let honest = vec![v(&[0.3, -1.7]), v(&[2.2, 0.4]), v(&[-0.9, 5.0]), v(&[1.1, 1.1])];
        let byz = generate(&AttackSpec::new(AttackKind::ZeroGradient), &honest, 1, &mut rng()).unwrap();
        let all: Vec<ModelVector> = honest.into_iter().chain(byz).collect();
        let x = v(&[0.5, 0.25]);
        let mut next = x.clone();
        next.axpy(-0.1, &aggregate::mean(&all).unwrap());
        assert_eq!(next, x);
    }

    #[test]
    fn sign_flip_scales_honest_mean() {
        let honest = vec![v(&[1.0, 4.0]), v(&[3.0, 0.0])];
        let byz = generate(&AttackSpec::new(AttackKind::SignFlip), &honest, 3, &mut rng()).unwrap();
        assert_eq!(byz.len(), 3);
        for p in byz {
            assert_eq!(p.as_slice(), &[-6.0, -6.0]);
        }
    }

    #[test]
    fn gaussian_statistics() {
        let honest = vec![v(&[1.0, -2.0]), v(&[3.0, 0.0])];
        let n = 10_000;
        let byz = generate(&AttackSpec::new(AttackKind::Gaussian), &honest, n, &mut rng()).unwrap();
        for (coord, center) in [(0usize, 2.0f64), (1, -1.0)] {
            let xs: Vec<f64> = byz.iter().map(|p| p[coord]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((27.0..=33.0).contains(&var), "variance {var}");
            let se = (30.0f64 / n as f64).sqrt();
            assert!((mean - center).abs() <= 3.0 * se, "mean {mean}");
        }
    }

    #[test]
    fn gaussian_is_deterministic_given_stream() {
        let honest = vec![v(&[1.0, -2.0])];
        let spec = AttackSpec::new(AttackKind::Gaussian);
        let a = generate(&spec, &honest, 4, &mut rng()).unwrap();
        let b = generate(&spec, &honest, 4, &mut rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs() {
        let spec = AttackSpec::new(AttackKind::SignFlip);
        assert!(generate(&spec, &[], 2, &mut rng()).is_err());
        assert!(generate(&spec, &[v(&[1.0])], 0, &mut rng()).unwrap().is_empty());
        assert!(generate(&AttackSpec::default(), &[v(&[1.0])], 3, &mut rng())
            .unwrap()
            .is_empty());
        let bad = AttackSpec {
            gaussian_variance: 0.0,
            ..AttackSpec::new(AttackKind::Gaussian)
        };
        assert!(generate(&bad, &[v(&[1.0])], 1, &mut rng()).is_err());
    }

    #[test]
    fn assemble_orders_and_masks() {
        let msg = |id, x| WorkerMessage {
            worker_id: id,
            payload: v(&[x]),
            round: 0,
        };
        let honest = vec![msg(2, 2.0), msg(0, 0.0), msg(1, 1.0)];
        let round = assemble_round(honest.clone(), vec![]).unwrap();
        assert_eq!(round.payloads(), &[v(&[0.0]), v(&[1.0]), v(&[2.0])]);
        assert_eq!(round.honest_mask(), &[true, true, true]);

        let round = assemble_round(honest, vec![v(&[9.0]), v(&[8.0])]).unwrap();
        assert_eq!(round.len(), 5);
        assert_eq!(round.honest_mask(), &[true, true, true, false, false]);
        assert_eq!(round.honest_payloads().count(), 3);

        assert!(assemble_round(vec![msg(1, 0.0), msg(1, 0.0)], vec![]).is_err());
    }

    #[test]
    fn attack_names_round_trip() {
        for a in AttackKind::ALL {
            assert_eq!(a.name().parse::<AttackKind>().unwrap(), a);
        }
    }
}
