use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::estimate::{estimate_pronunciation_emissions, EstimateConfig, MergeOrder};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::hmm::{force_align_emissions, Dictionary, Emissions, Scorer};
use crate::scalar::Real;

/// How multi-word utterances are cut into word segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segmentation {
    /// Word boundaries from forced alignment against the current dictionary.
    ForcedAlignment,
    /// Equal-length slices per word; used before any dictionary exists.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateConfig {
    /// Words with fewer segments keep their current pronunciation.
    pub min_examples: usize,
    pub max_units: usize,
    pub order: MergeOrder,
    pub segmentation: Segmentation,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            min_examples: 4,
            max_units: 64,
            order: MergeOrder::LongestFirst,
            segmentation: Segmentation::ForcedAlignment,
        }
    }
}

/// One row of the per-word estimation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRecord<T> {
    pub word: String,
    /// Number of segments the estimate used.
    pub k: usize,
    pub length: usize,
    pub joint_loglik: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryUpdate<T> {
    pub dictionary: Dictionary,
    pub report: Vec<EstimationRecord<T>>,
    /// Words that kept their entry because the estimate exceeded `max_units`.
    pub rejected: Vec<String>,
}

/// Tab-separated report: `word, k, length, joint_loglik`.
pub fn format_estimation_report<T: Real>(records: &[EstimationRecord<T>]) -> String {
    let mut out = String::from("# word\tk\tlength\tjoint_loglik\n");
    for r in records {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.word, r.k, r.length, r.joint_loglik);
    }
    out
}

fn uniform_bounds(n_frames: usize, n_words: usize) -> Vec<(usize, usize)> {
    (0..n_words)
        .map(|w| (w * n_frames / n_words, ((w + 1) * n_frames / n_words).max(w * n_frames / n_words + 1) - 1))
        .collect()
}

/// Re-estimates every word's pronunciation independently from its segments.
///
/// Words with at least `min_examples` segments get a fresh estimate; the rest
/// keep their current entry. A word with no current entry is estimated from
/// whatever segments it has; with none at all the update fails.
pub fn update_dictionary<T: Real>(
    corpus: &Corpus<T>,
    scorer: &impl Scorer<T>,
    current: &Dictionary,
    cfg: &UpdateConfig,
) -> Result<DictionaryUpdate<T>> {
    // emission tables per utterance, then word segments as table slices
    let segmented: Vec<Vec<(String, Emissions<T>)>> = corpus
        .utterances()
        .par_iter()
        .map(|u| -> Result<Vec<(String, Emissions<T>)>> {
            let table = scorer.emissions(&u.features)?;
            if u.transcript.len() == 1 {
                return Ok(vec![(u.transcript[0].clone(), table)]);
            }
            let bounds = match cfg.segmentation {
                Segmentation::Uniform => uniform_bounds(table.n_frames(), u.transcript.len()),
                Segmentation::ForcedAlignment => {
                    match force_align_emissions(&table, &u.transcript, current, scorer) {
                        Ok(a) => a.word_bounds,
                        Err(Error::NoValidPath { .. }) => return Ok(Vec::new()),
                        Err(e) => return Err(e),
                    }
                }
            };
            Ok(u
                .transcript
                .iter()
                .zip(bounds)
                .filter(|(_, (s, e))| s <= e && *e < table.n_frames())
                .map(|(w, (s, e))| (w.clone(), table.slice(s, e + 1)))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_word: BTreeMap<String, Vec<Emissions<T>>> =
        corpus.vocabulary().iter().map(|w| (w.clone(), Vec::new())).collect();
    for (w, seg) in segmented.into_iter().flatten() {
        by_word.entry(w).or_default().push(seg);
    }

    let est_cfg = EstimateConfig {
        max_units: cfg.max_units,
        order: cfg.order,
    };
    enum Outcome<T> {
        Estimated(Vec<usize>, EstimationRecord<T>),
        Kept(Vec<usize>),
        Rejected(Vec<usize>),
    }
    let outcomes = by_word
        .par_iter()
        .map(|(word, segs)| -> Result<(String, Outcome<T>)> {
            let existing = current.get(word).map(<[usize]>::to_vec);
            let enough = segs.len() >= cfg.min_examples.max(1);
            if !enough {
                if let Some(p) = existing {
                    return Ok((word.clone(), Outcome::Kept(p)));
                }
                if segs.is_empty() {
                    return Err(Error::IncompleteDictionary(word.clone()));
                }
            }
            match estimate_pronunciation_emissions(segs, scorer, &est_cfg) {
                Ok(est) => {
                    let record = EstimationRecord {
                        word: word.clone(),
                        k: segs.len(),
                        length: est.units.len(),
                        joint_loglik: est.joint_loglik,
                    };
                    Ok((word.clone(), Outcome::Estimated(est.units, record)))
                }
                Err(Error::PronunciationTooLong { .. }) if existing.is_some() => {
                    Ok((word.clone(), Outcome::Rejected(existing.expect("checked"))))
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dictionary = Dictionary::new();
    let mut report = Vec::new();
    let mut rejected = Vec::new();
    for (word, outcome) in outcomes {
        let pron = match outcome {
            Outcome::Estimated(p, r) => {
                report.push(r);
                p
            }
            Outcome::Kept(p) => p,
            Outcome::Rejected(p) => {
                rejected.push(word.clone());
                p
            }
        };
        dictionary.insert(word, pron)?;
    }
    // entries of words outside this corpus stay as they were
    for (w, p) in current.iter() {
        if !dictionary.contains(w) {
            dictionary.insert(w, p.to_vec())?;
        }
    }
    Ok(DictionaryUpdate {
        dictionary,
        report,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_bounds_partition_frames() {
        assert_eq!(uniform_bounds(10, 3), vec![(0, 2), (3, 5), (6, 9)]);
        assert_eq!(uniform_bounds(4, 4), vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }
}
