use crate::error::{Error, Result};

/// Edit counts between a reference and a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / |ref|`, or 0 for an empty reference.
    pub fn rate(&self) -> f64 {
        if self.ref_len == 0 {
            0.0
        } else {
            self.errors() as f64 / self.ref_len as f64
        }
    }

    pub fn add(&mut self, other: &EditCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.ref_len += other.ref_len;
    }
}

/// Minimum edit distance alignment with unit costs.
///
/// Among minimum-cost alignments the one with the most substitutions is
/// reported, so swapping `reference` and `hypothesis` swaps deletions and
/// insertions exactly.
pub fn wer<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Result<EditCounts> {
    if reference.is_empty() {
        return Err(Error::InvalidArgument("empty reference".into()));
    }
    Ok(edit_counts(reference, hypothesis))
}

/// As [`wer`] but accepts an empty reference.
pub fn edit_counts<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    // (edits, -substitutions), compared lexicographically.
    let mut dp = vec![(0usize, 0isize); (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = (usize::MAX, 0isize);
            if i > 0 && j > 0 {
                let (e, s) = dp[idx(i - 1, j - 1)];
                best = if reference[i - 1].as_ref() == hypothesis[j - 1].as_ref() {
                    (e, s)
                } else {
                    (e + 1, s - 1)
                };
            }
            if i > 0 {
                let (e, s) = dp[idx(i - 1, j)];
                best = best.min((e + 1, s));
            }
            if j > 0 {
                let (e, s) = dp[idx(i, j - 1)];
                best = best.min((e + 1, s));
            }
            dp[idx(i, j)] = best;
        }
    }
    let (edits, neg_subs) = dp[idx(n, m)];
    let substitutions = (-neg_subs) as usize;
    let gaps = edits - substitutions;
    // deletions - insertions = n - m
    let deletions = ((gaps + n) - m) / 2;
    EditCounts {
        substitutions,
        deletions,
        insertions: gaps - deletions,
        ref_len: n,
    }
}
