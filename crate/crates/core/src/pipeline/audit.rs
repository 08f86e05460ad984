use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::hmm::Dictionary;

/// Joint frame counts `counts[learned][true]` from paired label sequences.
pub fn cooccurrence(pairs: &[(&[usize], &[usize])], n_learned: usize, n_true: usize) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; n_true]; n_learned];
    for (learned, truth) in pairs {
        for (&a, &b) in learned.iter().zip(truth.iter()) {
            counts[a][b] += 1;
        }
    }
    counts
}

/// One-to-one map from learned to true units maximizing total
/// co-occurrence. Learned units left without a partner map to `None`.
pub fn best_relabeling(counts: &[Vec<u64>]) -> Vec<Option<usize>> {
    let n_learned = counts.len();
    let n_true = counts.first().map_or(0, Vec::len);
    let size = n_learned.max(n_true);
    if size == 0 {
        return Vec::new();
    }
    let rows = (0..size).map(|i| {
        (0..size)
            .map(|j| {
                if i < n_learned && j < n_true {
                    counts[i][j] as i64
                } else {
                    0
                }
            })
            .collect::<Vec<_>>()
    });
    let weights = Matrix::from_rows(rows).expect("square matrix");
    let (_, assignment) = kuhn_munkres(&weights);
    (0..n_learned)
        .map(|i| Some(assignment[i]).filter(|&j| j < n_true))
        .collect()
}

/// Fraction of `truth` words whose learned pronunciation, mapped through
/// `relabel`, equals the true pronunciation.
pub fn pronunciation_accuracy(
    learned: &Dictionary,
    truth: &BTreeMap<String, Vec<usize>>,
    relabel: &[Option<usize>],
) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth
        .iter()
        .filter(|(word, pron)| {
            learned.get(word).is_some_and(|p| {
                p.len() == pron.len()
                    && p.iter()
                        .zip(pron.iter())
                        .all(|(&a, &b)| relabel.get(a).copied().flatten() == Some(b))
            })
        })
        .count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_is_recovered() {
        let counts = vec![vec![0, 9, 1], vec![2, 0, 7], vec![8, 1, 0]];
        assert_eq!(best_relabeling(&counts), vec![Some(1), Some(2), Some(0)]);
    }

    #[test]
    fn more_learned_than_true_units() {
        let counts = vec![vec![5, 0], vec![4, 0], vec![0, 3]];
        let m = best_relabeling(&counts);
        assert_eq!(m, vec![Some(0), None, Some(1)]);
    }

    #[test]
    fn accuracy_under_mapping() {
        let learned: Dictionary = [("A".to_string(), vec![1, 0]), ("B".to_string(), vec![0])]
            .into_iter()
            .collect();
        let truth: BTreeMap<String, Vec<usize>> =
            [("A".to_string(), vec![0, 1]), ("B".to_string(), vec![0])].into_iter().collect();
        assert_eq!(pronunciation_accuracy(&learned, &truth, &[Some(1), Some(0)]), 0.5);
    }
}
