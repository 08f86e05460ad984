//! Synthetic corpora with known units, pronunciations and segmentations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Corpus, FeatureMatrix, Utterance};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_words: usize,
    pub n_units: usize,
    pub utterances_per_word: usize,
    /// Inclusive range of frames emitted per unit visit.
    pub frames_per_unit: (usize, usize),
    /// Standard deviation of the isotropic emission noise.
    pub noise_std: f64,
    /// Minimum distance between unit means, in noise standard deviations.
    pub separation: f64,
    pub dim: usize,
    /// Inclusive range of pronunciation lengths.
    pub pron_len: (usize, usize),
    /// Inclusive range of words per utterance; `(1, 1)` gives isolated words.
    pub words_per_utterance: (usize, usize),
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_words: 20,
            n_units: 8,
            utterances_per_word: 20,
            frames_per_unit: (3, 8),
            noise_std: 1.0,
            separation: 6.0,
            dim: 4,
            pron_len: (2, 4),
            words_per_utterance: (1, 1),
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if self.n_words == 0 {
            return bad("needs at least one word");
        }
        if self.n_units < 2 {
            return bad("needs at least two units");
        }
        if self.utterances_per_word == 0 {
            return bad("needs at least one utterance per word");
        }
        if self.frames_per_unit.0 == 0 || self.frames_per_unit.0 > self.frames_per_unit.1 {
            return bad("frames-per-unit range must be non-empty and start at 1 or more");
        }
        if self.pron_len.0 == 0 || self.pron_len.0 > self.pron_len.1 {
            return bad("pronunciation length range must be non-empty and start at 1 or more");
        }
        if self.words_per_utterance.0 == 0 || self.words_per_utterance.0 > self.words_per_utterance.1 {
            return bad("words-per-utterance range must be non-empty and start at 1 or more");
        }
        if !(self.noise_std > 0.0) || self.separation < 4.0 || self.dim == 0 {
            return bad("noise must be positive, separation at least 4 and dim positive");
        }
        Ok(())
    }
}

/// The generator's hidden truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGroundTruth {
    pub true_unit_count: usize,
    pub true_dictionary: BTreeMap<String, Vec<usize>>,
    pub unit_means: Vec<Vec<f64>>,
    /// Per-dimension variance shared by every unit.
    pub unit_variance: f64,
    pub seed: u64,
    /// True unit label of every frame, keyed by utterance id.
    pub frame_labels: BTreeMap<String, Vec<usize>>,
}

pub fn word_name(i: usize) -> String {
    format!("W{i:03}")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl SyntheticGroundTruth {
    /// Draws unit means and pronunciations from `seed`.
    pub fn generate(spec: &SynthSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let min_dist = spec.separation * spec.noise_std;
        let mut half_width = min_dist * (spec.n_units as f64).powf(1.0 / spec.dim as f64);
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(spec.n_units);
        let mut attempts = 0usize;
        while means.len() < spec.n_units {
            let cand: Vec<f64> = (0..spec.dim)
                .map(|_| rng.random_range(-half_width..half_width))
                .collect();
            let ok = means.iter().all(|m| {
                m.iter().zip(&cand).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_dist
            });
            if ok {
                means.push(cand);
            } else {
                attempts += 1;
                if attempts % 1000 == 0 {
                    half_width *= 1.25;
                }
            }
        }

        let mut dictionary = BTreeMap::new();
        let mut used = std::collections::HashSet::new();
        for w in 0..spec.n_words {
            let mut tries = 0;
            let pron = loop {
                let len = rng.random_range(spec.pron_len.0..=spec.pron_len.1);
                let mut pron: Vec<usize> = Vec::with_capacity(len);
                while pron.len() < len {
                    let u = rng.random_range(0..spec.n_units);
                    if pron.last() != Some(&u) {
                        pron.push(u);
                    }
                }
                if used.insert(pron.clone()) {
                    break pron;
                }
                tries += 1;
                if tries > 10_000 {
                    return Err(Error::InvalidArgument(
                        "synthetic spec: not enough distinct pronunciations".into(),
                    ));
                }
            };
            dictionary.insert(word_name(w), pron);
        }
        Ok(Self {
            true_unit_count: spec.n_units,
            true_dictionary: dictionary,
            unit_means: means,
            unit_variance: spec.noise_std * spec.noise_std,
            seed,
            frame_labels: BTreeMap::new(),
        })
    }

    /// Samples `utterances_per_word` utterances per word. Ids start with
    /// `prefix`. Returns the corpus and the true per-frame unit labels in
    /// corpus order.
    pub fn sample_corpus<T: Real>(
        &self,
        spec: &SynthSpec,
        seed: u64,
        prefix: &str,
    ) -> Result<(Corpus<T>, Vec<Vec<usize>>)> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let words: Vec<&String> = self.true_dictionary.keys().collect();
        let std = self.unit_variance.sqrt();
        let mut utterances = Vec::new();
        let mut labels = Vec::new();
        for (wi, word) in words.iter().enumerate() {
            for k in 0..spec.utterances_per_word {
                let n = rng.random_range(spec.words_per_utterance.0..=spec.words_per_utterance.1);
                let at = rng.random_range(0..n);
                let transcript: Vec<String> = (0..n)
                    .map(|i| {
                        if i == at {
                            (*word).clone()
                        } else {
                            words[rng.random_range(0..words.len())].clone()
                        }
                    })
                    .collect();
                let mut data = Vec::new();
                let mut lab = Vec::new();
                for w in &transcript {
                    for &unit in &self.true_dictionary[w] {
                        let len = rng.random_range(spec.frames_per_unit.0..=spec.frames_per_unit.1);
                        for _ in 0..len {
                            data.extend(
                                self.unit_means[unit]
                                    .iter()
                                    .map(|&m| T::lit(m + std * gaussian(&mut rng))),
                            );
                            lab.push(unit);
                        }
                    }
                }
                utterances.push(Utterance {
                    id: format!("{prefix}{wi:03}_{k:03}"),
                    features: FeatureMatrix::from_flat(data, spec.dim)?,
                    transcript,
                });
                labels.push(lab);
            }
        }
        Ok((Corpus::new(utterances)?, labels))
    }

    /// Serializes the versioned key/value truth file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version=1");
        let _ = writeln!(out, "unit_count={}", self.true_unit_count);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "variance={}", self.unit_variance);
        for (u, m) in self.unit_means.iter().enumerate() {
            let vals: Vec<String> = m.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "mean {u} {}", vals.join(" "));
        }
        for (w, p) in &self.true_dictionary {
            let units: Vec<String> = p.iter().map(|u| u.to_string()).collect();
            let _ = writeln!(out, "pron {w} {}", units.join(" "));
        }
        out
    }

    /// Parses [`Self::to_text`] output. Frame labels are not part of the file.
    pub fn from_text(text: &str) -> Result<Self> {
        let origin = "ground truth";
        let mut version = None;
        let mut gt = Self {
            true_unit_count: 0,
            true_dictionary: BTreeMap::new(),
            unit_means: Vec::new(),
            unit_variance: 1.0,
            seed: 0,
            frame_labels: BTreeMap::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |m: String| Error::parse(origin, ln, m);
            if let Some((key, value)) = line.split_once('=') {
                match key {
                    "version" => version = Some(value.to_string()),
                    "unit_count" => gt.true_unit_count = value.parse().map_err(|_| perr(format!("bad unit_count `{value}`")))?,
                    "seed" => gt.seed = value.parse().map_err(|_| perr(format!("bad seed `{value}`")))?,
                    "variance" => gt.unit_variance = value.parse().map_err(|_| perr(format!("bad variance `{value}`")))?,
                    _ => return Err(perr(format!("unknown key `{key}`"))),
                }
                continue;
            }
            let mut toks = line.split_whitespace();
            match toks.next() {
                Some("pron") => {
                    let word = toks.next().ok_or_else(|| perr("pron without word".into()))?;
                    let units = toks
                        .map(|t| t.parse::<usize>().map_err(|_| perr(format!("bad unit `{t}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    if units.is_empty() {
                        return Err(perr(format!("empty pronunciation for `{word}`")));
                    }
                    gt.true_dictionary.insert(word.to_string(), units);
                }
                Some("mean") => {
                    let u: usize = toks
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr("mean without unit index".into()))?;
                    if u != gt.unit_means.len() {
                        return Err(perr(format!("mean for unit {u} out of order")));
                    }
                    let vals = toks
                        .map(|t| t.parse::<f64>().map_err(|_| perr(format!("bad value `{t}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    gt.unit_means.push(vals);
                }
                _ => return Err(perr(format!("unrecognized line `{line}`"))),
            }
        }
        if version.as_deref() != Some("1") {
            return Err(Error::parse(origin, 0, "missing or unsupported version"));
        }
        Ok(gt)
    }
}

/// Generates a ground truth and a corpus sampled from it, both from `seed`.
pub fn synth_corpus<T: Real>(spec: &SynthSpec, seed: u64) -> Result<(Corpus<T>, SyntheticGroundTruth)> {
    let mut gt = SyntheticGroundTruth::generate(spec, seed)?;
    let (corpus, labels) = gt.sample_corpus::<T>(spec, seed ^ 0x5eed_0f_c0_79b5, "u")?;
    gt.frame_labels = corpus
        .utterances()
        .iter()
        .map(|u| u.id.clone())
        .zip(labels)
        .collect();
    Ok((corpus, gt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_determinism() {
        let spec = SynthSpec::default();
        let (a, gta) = synth_corpus::<f64>(&spec, 7).unwrap();
        let (b, gtb) = synth_corpus::<f64>(&spec, 7).unwrap();
        assert_eq!(a.len(), 400);
        assert_eq!(a.vocabulary().len(), 20);
        assert_eq!(a, b);
        assert_eq!(gta, gtb);
        let (c, _) = synth_corpus::<f64>(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn means_are_separated_and_prons_valid() {
        let spec = SynthSpec::default();
        let gt = SyntheticGroundTruth::generate(&spec, 3).unwrap();
        for i in 0..gt.unit_means.len() {
            for j in 0..i {
                let d: f64 = gt.unit_means[i]
                    .iter()
                    .zip(&gt.unit_means[j])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(d >= 6.0);
            }
        }
        for p in gt.true_dictionary.values() {
            assert!(!p.is_empty());
            assert!(p.windows(2).all(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn sampled_frames_follow_the_pronunciation() {
        let spec = SynthSpec {
            n_words: 1,
            frames_per_unit: (3, 3),
            pron_len: (2, 2),
            utterances_per_word: 50,
            ..SynthSpec::default()
        };
        let (corpus, gt) = synth_corpus::<f64>(&spec, 11).unwrap();
        let pron = &gt.true_dictionary["W000"];
        let mut sums = vec![vec![0.0; spec.dim]; 2];
        for u in corpus.utterances() {
            assert_eq!(u.features.n_frames(), 6);
            assert_eq!(gt.frame_labels[&u.id], vec![pron[0], pron[0], pron[0], pron[1], pron[1], pron[1]]);
            for t in 0..6 {
                for d in 0..spec.dim {
                    sums[t / 3][d] += u.features.frame(t)[d];
                }
            }
        }
        // 150 samples per unit: the sample mean is within 0.5 sigma with overwhelming probability
        for (k, s) in sums.iter().enumerate() {
            for d in 0..spec.dim {
                let mean = s[d] / 150.0;
                assert!((mean - gt.unit_means[pron[k]][d]).abs() < 0.5);
            }
        }
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let zero_words = SynthSpec { n_words: 0, ..SynthSpec::default() };
        assert!(synth_corpus::<f64>(&zero_words, 1).is_err());
        let one_unit = SynthSpec { n_units: 1, ..SynthSpec::default() };
        assert!(synth_corpus::<f64>(&one_unit, 1).is_err());
    }

    #[test]
    fn truth_file_round_trips() {
        let gt = SyntheticGroundTruth::generate(&SynthSpec::default(), 5).unwrap();
        let text = gt.to_text();
        assert!(text.starts_with("version=1\nunit_count=8\n"));
        assert_eq!(SyntheticGroundTruth::from_text(&text).unwrap(), gt);
    }

    #[test]
    fn multi_word_utterances_contain_their_word() {
        let spec = SynthSpec {
            n_words: 5,
            words_per_utterance: (2, 4),
            utterances_per_word: 3,
            ..SynthSpec::default()
        };
        let (corpus, gt) = synth_corpus::<f32>(&spec, 2).unwrap();
        for w in corpus.vocabulary() {
            assert!(corpus.utterances_of(w).len() >= 3);
        }
        for u in corpus.utterances() {
            let expected: usize = u.transcript.iter().map(|w| gt.true_dictionary[w].len()).sum();
            assert!(u.features.n_frames() >= expected * 3);
            assert!((2..=4).contains(&u.transcript.len()));
        }
    }
}
