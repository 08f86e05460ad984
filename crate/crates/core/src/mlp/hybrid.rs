use super::{ForwardMode, MlpModel};
use crate::acoustic::AcousticModelSet;
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{Emissions, Scorer};
use crate::scalar::Real;

pub const DEFAULT_PRIOR_FLOOR: f64 = 1e-8;

fn log_priors<T: Real>(priors: &[T], floor: T) -> Vec<T> {
    let floored: Vec<T> = priors.iter().map(|&p| p.max(floor)).collect();
    let total: T = floored.iter().copied().sum();
    floored.into_iter().map(|p| (p / total).ln()).collect()
}

/// `log p(s|x) - log p(s)` per state, with priors floored then renormalized.
pub fn scaled_loglik<T: Real>(posteriors: &[T], priors: &[T], floor: T) -> Vec<T> {
    posteriors
        .iter()
        .zip(log_priors(priors, floor))
        .map(|(&p, lp)| p.ln() - lp)
        .collect()
}

/// Network posteriors divided by state priors, with transition
/// probabilities borrowed from a GMM model set.
#[derive(Debug, Clone)]
pub struct HybridScorer<T> {
    model: MlpModel<T>,
    priors: Vec<T>,
    log_priors: Vec<T>,
    stay: Vec<T>,
    exit: Vec<T>,
}

impl<T: Real> HybridScorer<T> {
    pub fn new(model: MlpModel<T>, priors: Vec<T>, floor: T, transitions: &AcousticModelSet<T>) -> Result<Self> {
        Self::with_transitions(
            model,
            priors,
            floor,
            transitions.stay_logprobs().to_vec(),
            transitions.exit_logprobs().to_vec(),
        )
    }

    /// `stay` and `exit` are per-state log-probabilities.
    pub fn with_transitions(model: MlpModel<T>, priors: Vec<T>, floor: T, stay: Vec<T>, exit: Vec<T>) -> Result<Self> {
        let s = model.n_states();
        for (what, n) in [("priors", priors.len()), ("stay", stay.len()), ("exit", exit.len())] {
            if n != s {
                return Err(Error::DimensionMismatch {
                    context: format!("network states vs {what}"),
                    expected: s,
                    found: n,
                });
            }
        }
        let log_priors = log_priors(&priors, floor);
        Ok(Self {
            model,
            priors,
            log_priors,
            stay,
            exit,
        })
    }

    pub fn model(&self) -> &MlpModel<T> {
        &self.model
    }

    pub fn priors(&self) -> &[T] {
        &self.priors
    }
}

impl<T: Real> Scorer<T> for HybridScorer<T> {
    fn n_units(&self) -> usize {
        self.model.n_states()
    }

    fn emissions(&self, features: &FeatureMatrix<T>) -> Result<Emissions<T>> {
        if features.dim() != self.model.frame_dim() {
            return Err(Error::DimensionMismatch {
                context: "features vs network".into(),
                expected: self.model.frame_dim(),
                found: features.dim(),
            });
        }
        let mut data = Vec::with_capacity(features.n_frames() * self.n_units());
        for t in 0..features.n_frames() {
            let lp = self.model.log_posteriors(&self.model.stack(features, t), ForwardMode::Eval)?;
            data.extend(lp.into_iter().zip(&self.log_priors).map(|(p, &q)| p - q));
        }
        Emissions::from_flat(data, self.n_units())
    }

    fn stay_logprob(&self, unit: usize) -> T {
        self.stay[unit]
    }

    fn exit_logprob(&self, unit: usize) -> T {
        self.exit[unit]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_priors_shift_by_log_states() {
        let post = [0.1f64, 0.6, 0.3];
        let s = scaled_loglik(&post, &[1.0 / 3.0; 3], 1e-8);
        for (v, p) in s.iter().zip(post) {
            assert!((v - (p.ln() + 3f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_priors_are_floored() {
        let s = scaled_loglik(&[0.5f64, 0.5], &[1.0, 0.0], 1e-8);
        assert!(s.iter().all(|v| v.is_finite()));
        assert!(s[1] > s[0]);
    }
}
