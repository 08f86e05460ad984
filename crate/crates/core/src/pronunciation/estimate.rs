use super::joint::{align_masters, MasterUtterance};
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{collapse, free_loop_viterbi, Emissions, Scorer};
use crate::scalar::Real;

/// Order in which utterances are folded into the master.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeOrder {
    /// Descending frame count, ties by input position.
    #[default]
    LongestFirst,
    AsGiven,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimateConfig {
    pub max_units: usize,
    pub order: MergeOrder,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            max_units: 64,
            order: MergeOrder::LongestFirst,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PronunciationEstimate<T> {
    pub units: Vec<usize>,
    /// Score of the final alignment (free-loop Viterbi score when K = 1).
    pub joint_loglik: T,
}

/// Estimates the unit sequence shared by several utterances of one word.
///
/// One utterance: the collapsed free-loop Viterbi path. Two or more: the
/// first two (in merge order) are jointly aligned, the result becomes the
/// master utterance with its internal alignment frozen, and each further
/// utterance is aligned against the master. The pronunciation is the final
/// master's collapsed unit sequence.
pub fn estimate_pronunciation_emissions<T: Real>(
    utterances: &[Emissions<T>],
    scorer: &impl Scorer<T>,
    cfg: &EstimateConfig,
) -> Result<PronunciationEstimate<T>> {
    let estimate = match utterances {
        [] => return Err(Error::InvalidArgument("no utterances to estimate a pronunciation from".into())),
        [only] => {
            let (path, score) = free_loop_viterbi(only, scorer);
            PronunciationEstimate {
                units: collapse(&path),
                joint_loglik: score,
            }
        }
        _ => {
            let mut order: Vec<usize> = (0..utterances.len()).collect();
            if cfg.order == MergeOrder::LongestFirst {
                order.sort_by_key(|&i| std::cmp::Reverse(utterances[i].n_frames()));
            }
            let mut master = MasterUtterance::single(order[0], utterances[order[0]].n_frames());
            let mut score = T::zero();
            for &next in &order[1..] {
                let joint = align_masters(
                    &master,
                    &MasterUtterance::single(next, utterances[next].n_frames()),
                    utterances,
                    scorer,
                )?;
                master = joint.master;
                score = joint.joint_loglik;
            }
            PronunciationEstimate {
                units: master.unit_sequence(),
                joint_loglik: score,
            }
        }
    };
    if estimate.units.len() > cfg.max_units {
        return Err(Error::PronunciationTooLong {
            len: estimate.units.len(),
            max: cfg.max_units,
        });
    }
    Ok(estimate)
}

/// [`estimate_pronunciation_emissions`] on feature matrices, longest first.
pub fn estimate_pronunciation<T: Real>(
    utterances: &[FeatureMatrix<T>],
    scorer: &impl Scorer<T>,
    max_units: usize,
) -> Result<PronunciationEstimate<T>> {
    let tables = utterances
        .iter()
        .map(|u| scorer.emissions(u))
        .collect::<Result<Vec<_>>>()?;
    estimate_pronunciation_emissions(
        &tables,
        scorer,
        &EstimateConfig {
            max_units,
            ..EstimateConfig::default()
        },
    )
}
