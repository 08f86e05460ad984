//! Utterances, transcripts, feature matrices and the synthetic corpus generator.

mod deltas;
mod io;
mod synth;

use std::collections::BTreeMap;

pub use deltas::compute_deltas;
pub use io::{load_corpus, load_feature_list, read_features, write_features, write_scp, write_transcripts};
pub use synth::{synth_corpus, SynthSpec, SyntheticGroundTruth};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major matrix of frames; rows are time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    data: Vec<T>,
    dim: usize,
}

impl<T: Real> FeatureMatrix<T> {
    /// Builds a matrix from frame rows, rejecting ragged, empty or non-finite input.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("feature matrix needs at least one frame".into()))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("frame {t}"),
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, dim)
    }

    pub fn from_flat(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot shape {} values into frames of dimension {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite feature value at frame {}",
                pos / dim
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn frame(&self, t: usize) -> &[T] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Copies frames `start..end` into a new matrix.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_frames() {
            return Err(Error::InvalidArgument(format!(
                "frame range {start}..{end} outside 0..{}",
                self.n_frames()
            )));
        }
        Ok(Self {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
        })
    }

    /// Stacks the frames of several matrices of equal dimension.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Self>) -> Result<Self> {
        let mut data = Vec::new();
        let mut dim = None;
        for p in parts {
            match dim {
                None => dim = Some(p.dim),
                Some(d) if d != p.dim => {
                    return Err(Error::DimensionMismatch {
                        context: "concatenated features".into(),
                        expected: d,
                        found: p.dim,
                    })
                }
                _ => {}
            }
            data.extend_from_slice(&p.data);
        }
        let dim = dim.ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
        Self::from_flat(data, dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance<T> {
    pub id: String,
    pub features: FeatureMatrix<T>,
    pub transcript: Vec<String>,
}

/// A set of transcribed utterances with its vocabulary and word index.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T> {
    utterances: Vec<Utterance<T>>,
    vocabulary: Vec<String>,
    word_index: BTreeMap<String, Vec<usize>>,
}

/// Case-folds a transcript token to its vocabulary identity.
pub fn normalize_word(word: &str) -> String {
    word.to_uppercase()
}

impl<T: Real> Corpus<T> {
    /// Validates the utterances and builds the vocabulary and word index.
    pub fn new(mut utterances: Vec<Utterance<T>>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::InvalidArgument("corpus has no utterances".into()));
        }
        let dim = utterances[0].features.dim();
        let mut seen = std::collections::HashSet::new();
        let mut word_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, u) in utterances.iter_mut().enumerate() {
            if !seen.insert(u.id.clone()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
            if u.transcript.is_empty() {
                return Err(Error::EmptyTranscript(u.id.clone()));
            }
            if u.features.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("utterance `{}`", u.id),
                    expected: dim,
                    found: u.features.dim(),
                });
            }
            for w in u.transcript.iter_mut() {
                *w = normalize_word(w);
                let list = word_index.entry(w.clone()).or_default();
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
        let vocabulary = word_index.keys().cloned().collect();
        Ok(Self {
            utterances,
            vocabulary,
            word_index,
        })
    }

    pub fn utterances(&self) -> &[Utterance<T>] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Sorted distinct words.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Indices of the utterances whose transcript contains `word`.
    pub fn utterances_of(&self, word: &str) -> &[usize] {
        self.word_index.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn dim(&self) -> usize {
        self.utterances[0].features.dim()
    }

    pub fn total_frames(&self) -> usize {
        self.utterances.iter().map(|u| u.features.n_frames()).sum()
    }

    /// All frames of all utterances stacked in corpus order.
    pub fn pooled_frames(&self) -> FeatureMatrix<T> {
        FeatureMatrix::concat(self.utterances.iter().map(|u| &u.features))
            .expect("corpus dimensions are consistent")
    }

    /// Builds a corpus from the utterances at `indices`, keeping their order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.utterances[i].clone()).collect())
    }

    /// Applies `f` to every feature matrix, e.g. to append deltas.
    pub fn map_features(&self, f: impl Fn(&FeatureMatrix<T>) -> FeatureMatrix<T>) -> Result<Self> {
        Self::new(
            self.utterances
                .iter()
                .map(|u| Utterance {
                    id: u.id.clone(),
                    features: f(&u.features),
                    transcript: u.transcript.clone(),
                })
                .collect(),
        )
    }
}
