//! Isolated-word and continuous recognition and word error scoring.

mod lm;
mod wer;

pub use lm::{load_arpa_bigram, write_arpa_bigram, BigramLm, Oov, SENTENCE_END, SENTENCE_START};
pub use wer::{edit_counts, wer, EditCounts};

use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::hmm::{constrained_score, Dictionary, Emissions, Scorer};
use crate::scalar::Real;

/// Best word sequence for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult<T> {
    pub words: Vec<String>,
    pub score: T,
    /// Inclusive frame range of each word; together they cover every frame.
    pub boundaries: Vec<(usize, usize)>,
}

/// The dictionary word whose pronunciation best explains the utterance.
pub fn decode_isolated<T: Real>(
    features: &FeatureMatrix<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<(String, T)> {
    decode_isolated_emissions(&scorer.emissions(features)?, dict, scorer)
}

/// As [`decode_isolated`] on a precomputed emission table. Ties go to the
/// lexicographically first word.
pub fn decode_isolated_emissions<T: Real>(
    emissions: &Emissions<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<(String, T)> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let mut best: Option<(&str, T)> = None;
    let mut shortest = usize::MAX;
    for (word, pron) in dict.iter() {
        shortest = shortest.min(pron.len());
        let score = constrained_score(emissions, pron, scorer)?;
        if score == T::neg_infinity() {
            continue;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((word, score));
        }
    }
    best.map(|(w, s)| (w.to_string(), s)).ok_or(Error::NoValidPath {
        frames: emissions.n_frames(),
        required: shortest,
    })
}

/// Word-transition weights for continuous decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmWeights {
    pub lm_weight: f64,
    /// Added on every word-to-word transition (not before the first word).
    pub insertion_penalty: f64,
}

impl Default for LmWeights {
    fn default() -> Self {
        Self {
            lm_weight: 1.0,
            insertion_penalty: 0.0,
        }
    }
}

/// Precomputed language-model scores over dictionary words.
struct WordLm<T> {
    start: Vec<T>,
    end: Vec<T>,
    /// `trans[prev * n + next]`
    trans: Vec<T>,
    uniform: bool,
}

impl<T: Real> WordLm<T> {
    fn new(words: &[&str], lm: Option<&BigramLm>, w: LmWeights) -> Result<Self> {
        let n = words.len();
        let pen = T::lit(w.insertion_penalty);
        let Some(lm) = lm.filter(|_| w.lm_weight != 0.0) else {
            return Ok(Self {
                start: vec![T::zero(); n],
                end: vec![T::zero(); n],
                trans: vec![pen; n * n],
                uniform: true,
            });
        };
        let scale = |v: f64| T::lit(w.lm_weight * v);
        let oov = |e: Oov| Error::InvalidArgument(e.to_string());
        let has_start = lm.contains(SENTENCE_START);
        let has_end = lm.contains(SENTENCE_END);
        let mut start = Vec::with_capacity(n);
        let mut end = Vec::with_capacity(n);
        let mut trans = Vec::with_capacity(n * n);
        for &a in words {
            start.push(scale(if has_start { lm.query(SENTENCE_START, a) } else { lm.unigram(a) }.map_err(oov)?));
            end.push(if has_end { scale(lm.query(a, SENTENCE_END).map_err(oov)?) } else { T::zero() });
            for &b in words {
                trans.push(scale(lm.query(a, b).map_err(oov)?) + pen);
            }
        }
        Ok(Self {
            start,
            end,
            trans,
            uniform: false,
        })
    }
}

const NONE: u32 = u32::MAX;
/// Set on back-pointers that enter a new word.
const ENTRY: u32 = 1 << 31;

/// Time-synchronous Viterbi over a loop of all dictionary words.
///
/// Each (word, position) cell keeps only its single best history, so the
/// language-model context at a word start is the best-scoring predecessor
/// word at that frame. With a bigram this is the usual word-loop
/// approximation rather than an exact search over word sequences.
pub fn decode_continuous<T: Real>(
    features: &FeatureMatrix<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    lm: Option<&BigramLm>,
    weights: LmWeights,
) -> Result<RecognitionResult<T>> {
    decode_continuous_emissions(&scorer.emissions(features)?, dict, scorer, lm, weights)
}

pub fn decode_continuous_emissions<T: Real>(
    emissions: &Emissions<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    lm: Option<&BigramLm>,
    weights: LmWeights,
) -> Result<RecognitionResult<T>> {
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    dict.validate(scorer.n_units())?;
    let words: Vec<&str> = dict.words().collect();
    let prons: Vec<&[usize]> = dict.iter().map(|(_, p)| p).collect();
    let wlm = WordLm::new(&words, lm, weights)?;
    let nw = words.len();
    let mut first = Vec::with_capacity(nw);
    let mut cells = 0;
    for p in &prons {
        first.push(cells);
        cells += p.len();
    }
    let cell_unit: Vec<usize> = prons.iter().flat_map(|p| p.iter().copied()).collect();
    let last = |w: usize| first[w] + prons[w].len() - 1;
    let frames = emissions.n_frames();
    let shortest = prons.iter().map(|p| p.len()).min().unwrap_or(0);
    if frames < shortest {
        return Err(Error::NoValidPath {
            frames,
            required: shortest,
        });
    }

    let ninf = T::neg_infinity();
    let mut score = vec![ninf; cells];
    let mut back = vec![NONE; cells * frames];
    for w in 0..nw {
        let c = first[w];
        score[c] = wlm.start[w] + emissions.get(0, cell_unit[c]);
    }
    let mut next = vec![ninf; cells];
    let mut exits = vec![ninf; nw];
    for t in 1..frames {
        for w in 0..nw {
            let c = last(w);
            exits[w] = score[c] + scorer.exit_logprob(cell_unit[c]);
        }
        // Best predecessor word end, shared by all targets when the LM is flat.
        let shared = wlm.uniform.then(|| argmax(&exits));
        let row = &mut back[t * cells..(t + 1) * cells];
        for w in 0..nw {
            for k in 0..prons[w].len() {
                let c = first[w] + k;
                let mut best = score[c] + scorer.stay_logprob(cell_unit[c]);
                let mut arg = c as u32;
                if k > 0 {
                    let p = c - 1;
                    let cand = score[p] + scorer.exit_logprob(cell_unit[p]);
                    if cand > best {
                        best = cand;
                        arg = p as u32;
                    }
                } else {
                    let (pw, cand) = match shared {
                        Some((pw, s)) => (pw, s + wlm.trans[pw * nw + w]),
                        None => {
                            let mut b = (0, ninf);
                            for pw in 0..nw {
                                let s = exits[pw] + wlm.trans[pw * nw + w];
                                if s > b.1 {
                                    b = (pw, s);
                                }
                            }
                            b
                        }
                    };
                    if cand > best {
                        best = cand;
                        arg = last(pw) as u32 | ENTRY;
                    }
                }
                next[c] = best + emissions.get(t, cell_unit[c]);
                row[c] = arg;
            }
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut best = ninf;
    let mut end_cell = None;
    for w in 0..nw {
        let c = last(w);
        let s = score[c] + scorer.exit_logprob(cell_unit[c]) + wlm.end[w];
        if s > best {
            best = s;
            end_cell = Some(c);
        }
    }
    let Some(mut c) = end_cell else {
        return Err(Error::Numeric("no finite path through the word loop".into()));
    };
    let word_of = |c: usize| first.partition_point(|&f| f <= c) - 1;
    let mut path = vec![(0usize, false); frames];
    for t in (0..frames).rev() {
        if t == 0 {
            path[t] = (c, true);
        } else {
            let b = back[t * cells + c];
            path[t] = (c, b & ENTRY != 0);
            c = (b & !ENTRY) as usize;
        }
    }
    let mut result = RecognitionResult {
        words: Vec::new(),
        score: best,
        boundaries: Vec::new(),
    };
    for (t, &(c, entered)) in path.iter().enumerate() {
        if entered {
            result.words.push(words[word_of(c)].to_string());
            result.boundaries.push((t, t));
        }
        result.boundaries.last_mut().expect("first frame starts a word").1 = t;
    }
    Ok(result)
}

fn argmax<T: Real>(xs: &[T]) -> (usize, T) {
    let mut b = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > b.1 {
            b = (i, x);
        }
    }
    b
}

/// One scored utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredUtterance {
    pub id: String,
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
    pub counts: EditCounts,
}

/// Per-utterance and aggregate edit counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WerReport {
    pub utterances: Vec<ScoredUtterance>,
    pub total: EditCounts,
}

impl WerReport {
    pub fn push(&mut self, id: String, reference: Vec<String>, hypothesis: Vec<String>) {
        let counts = edit_counts(&reference, &hypothesis);
        self.total.add(&counts);
        self.utterances.push(ScoredUtterance {
            id,
            reference,
            hypothesis,
            counts,
        });
    }

    pub fn rate(&self) -> f64 {
        self.total.rate()
    }

    /// `utt-id<TAB>word word ...` per utterance.
    pub fn hypotheses_text(&self) -> String {
        self.utterances
            .iter()
            .map(|u| format!("{}\t{}\n", u.id, u.hypothesis.join(" ")))
            .collect()
    }

    /// Tab-separated S/D/I counts per utterance followed by the aggregate.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id\tref_words\tsub\tdel\tins\twer\n");
        let line = |id: &str, c: &EditCounts| {
            format!(
                "{id}\t{}\t{}\t{}\t{}\t{:.6}\n",
                c.ref_len,
                c.substitutions,
                c.deletions,
                c.insertions,
                c.rate()
            )
        };
        for u in &self.utterances {
            out.push_str(&line(&u.id, &u.counts));
        }
        out.push_str(&line("TOTAL", &self.total));
        out
    }
}
