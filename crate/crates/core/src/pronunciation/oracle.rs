use crate::error::{Error, Result};
use crate::hmm::{constrained_score, Emissions, Scorer};
use crate::scalar::Real;

/// Largest `N^max_len` the brute-force search accepts.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Exact pronunciation search by enumeration.
///
/// Scores every unit sequence of length `1..=max_len` without consecutive
/// repeats as the sum of per-utterance chain-constrained Viterbi scores and
/// returns the best. Ties go to the shorter, then lexicographically smaller
/// sequence.
pub fn brute_force_pronunciation<T: Real>(
    utterances: &[Emissions<T>],
    scorer: &impl Scorer<T>,
    max_len: usize,
) -> Result<(Vec<usize>, T)> {
    if utterances.is_empty() || max_len == 0 {
        return Err(Error::InvalidArgument("brute force needs utterances and max_len >= 1".into()));
    }
    let n = scorer.n_units();
    let space = (n as u128).checked_pow(max_len as u32).unwrap_or(u128::MAX);
    if space > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(space));
    }
    let shortest = utterances.iter().map(Emissions::n_frames).min().unwrap_or(0);
    let mut best: Option<(Vec<usize>, T)> = None;
    let mut seq = Vec::with_capacity(max_len);
    for len in 1..=max_len.min(shortest) {
        seq.clear();
        seq.resize(len, 0);
        loop {
            if seq.windows(2).all(|w| w[0] != w[1]) {
                let mut total = T::zero();
                for e in utterances {
                    total = total + constrained_score(e, &seq, scorer)?;
                }
                if best.as_ref().is_none_or(|(_, b)| total > *b) {
                    best = Some((seq.clone(), total));
                }
            }
            // odometer increment, last position fastest
            let mut k = len;
            let exhausted = loop {
                if k == 0 {
                    break true;
                }
                k -= 1;
                seq[k] += 1;
                if seq[k] < n {
                    break false;
                }
                seq[k] = 0;
            };
            if exhausted {
                break;
            }
        }
    }
    best.ok_or_else(|| Error::Numeric("no feasible pronunciation".into()))
}
