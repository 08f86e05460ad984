use rayon::prelude::*;

use super::{force_align, Dictionary};
use crate::acoustic::{AcousticModelSet, GmmAccumulator};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Stay probabilities are kept inside this band so that no unit forbids
/// either staying or leaving.
const MIN_TRANSITION_PROB: f64 = 1e-3;

/// Outcome of one segmental training pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainStep<T> {
    pub models: AcousticModelSet<T>,
    /// Summed Viterbi log-likelihood of the aligned utterances under the input models.
    pub loglik: T,
    /// Units that received no frames and kept their parameters.
    pub starved_units: Vec<usize>,
    /// Mixture components re-seeded during the M-step.
    pub resets: usize,
    /// Utterances too short for their transcript graph, left out of the pass.
    pub skipped_utterances: Vec<String>,
}

/// One segmental (Viterbi) training iteration: force-align every utterance,
/// pool frames per unit, run one EM step per unit and re-estimate stay/exit
/// probabilities from segment counts.
pub fn viterbi_train_step<T: Real>(
    corpus: &Corpus<T>,
    dict: &Dictionary,
    models: &AcousticModelSet<T>,
) -> Result<TrainStep<T>> {
    let n = models.n_units();
    dict.validate(n)?;
    let alignments = corpus
        .utterances()
        .par_iter()
        .map(|u| match force_align(u, dict, models) {
            Ok(a) => Ok(Some((a.labels, a.loglik))),
            Err(Error::NoValidPath { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = T::zero();
    let mut skipped = Vec::new();
    let mut per_utt: Vec<Option<&[usize]>> = Vec::with_capacity(corpus.len());
    for (u, a) in corpus.utterances().iter().zip(&alignments) {
        match a {
            Some((labels, ll)) => {
                total = total + *ll;
                per_utt.push(Some(labels));
            }
            None => {
                skipped.push(u.id.clone());
                per_utt.push(None);
            }
        }
    }

    // frame lists and segment counts per unit, in corpus order
    let mut frames_of: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut stays = vec![0usize; n];
    let mut exits = vec![0usize; n];
    for (ui, labels) in per_utt.iter().enumerate() {
        let Some(labels) = labels else { continue };
        for (t, &l) in labels.iter().enumerate() {
            frames_of[l].push((ui, t));
            if labels.get(t + 1) == Some(&l) {
                stays[l] += 1;
            } else {
                exits[l] += 1;
            }
        }
    }

    let utts = corpus.utterances();
    let floor = models.var_floor();
    let updated: Vec<(Option<_>, usize)> = (0..n)
        .into_par_iter()
        .map(|unit| {
            if frames_of[unit].is_empty() {
                return (None, 0);
            }
            let gmm = models.unit(unit);
            let mut acc = GmmAccumulator::for_gmm(gmm);
            for &(ui, t) in &frames_of[unit] {
                acc.add(gmm, utts[ui].features.frame(t), T::one());
            }
            let out = acc.finalize(gmm, floor, T::lit(0.2));
            (Some(out.gmm), out.resets)
        })
        .collect();

    let mut units = Vec::with_capacity(n);
    let mut stay = Vec::with_capacity(n);
    let mut exit = Vec::with_capacity(n);
    let mut starved = Vec::new();
    let mut resets = 0;
    for (unit, (gmm, r)) in updated.into_iter().enumerate() {
        resets += r;
        match gmm {
            Some(g) => {
                units.push(g);
                let p = stays[unit] as f64 / (stays[unit] + exits[unit]) as f64;
                let p = T::lit(p.clamp(MIN_TRANSITION_PROB, 1.0 - MIN_TRANSITION_PROB));
                stay.push(p.ln());
                exit.push((-p).ln_1p());
            }
            None => {
                starved.push(unit);
                units.push(models.unit(unit).clone());
                stay.push(models.stay_logprobs()[unit]);
                exit.push(models.exit_logprobs()[unit]);
            }
        }
    }
    Ok(TrainStep {
        models: models.with_parts(units, stay, exit),
        loglik: total,
        starved_units: starved,
        resets,
        skipped_utterances: skipped,
    })
}
