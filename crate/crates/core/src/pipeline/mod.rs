//! The outer training loop: clustering-based initialization, alternating
//! dictionary and GMM updates with mixture doubling, then the same loop
//! with a neural-network emission model, each stopped on a held-out split.

mod audit;
mod config;
mod report;

pub use audit::{best_relabeling, cooccurrence, pronunciation_accuracy};
pub use config::{DecodeMode, PathConfig, PipelineConfig};
pub use report::{parse_reports_csv, reports_to_csv, summary_text, wer_vs_n_table, IterationReport, Stage};

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acoustic::{global_variance, lbg_cluster_oversplit, AcousticModelSet, DiagGaussian, LbgConfig};
use crate::corpus::{Corpus, FeatureMatrix};
use crate::decoder::{decode_continuous_emissions, decode_isolated_emissions, BigramLm, LmWeights, WerReport};
use crate::error::{Error, Result};
use crate::hmm::{force_align_emissions, viterbi_train_step, Dictionary, Emissions, Scorer};
use crate::mlp::{mlp_train_with_dev, HybridScorer, LabeledFrameSet, MlpModel, TrainConfig};
use crate::pronunciation::{update_dictionary, Segmentation, UpdateConfig};
use crate::scalar::Real;

/// Independent seed for a named purpose.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_SPLIT: u64 = 1;
const STREAM_LBG: u64 = 2;
const STREAM_MLP_INIT: u64 = 3;
const STREAM_MLP_TRAIN: u64 = 4;

/// Utterance indices of the training and held-out parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DevSplit {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
}

/// Holds out `round(fraction · n)` of the `n` utterances of each word
/// (keyed by the first transcript word), keeping at least one for training.
pub fn split_dev<T: Real>(corpus: &Corpus<T>, fraction: f64, seed: u64) -> DevSplit {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in corpus.utterances().iter().enumerate() {
        groups.entry(u.transcript[0].as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev = Vec::new();
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        let k = ((fraction * members.len() as f64).round() as usize).min(members.len() - 1);
        dev.extend_from_slice(&members[..k]);
    }
    dev.sort_unstable();
    let held: HashSet<usize> = dev.iter().copied().collect();
    let train = (0..corpus.len()).filter(|i| !held.contains(i)).collect();
    DevSplit { train, dev }
}

/// Clusters all frames into `n_aae` cells and models each by one Gaussian.
pub fn initial_models<T: Real>(corpus: &Corpus<T>, cfg: &PipelineConfig) -> Result<AcousticModelSet<T>> {
    let frames = corpus.pooled_frames();
    let distinct: HashSet<Vec<u64>> = frames
        .frames()
        .map(|f| f.iter().map(|x| x.as_f64().to_bits()).collect())
        .collect();
    if distinct.len() < cfg.n_aae {
        return Err(Error::InsufficientData(format!(
            "{} distinct frames cannot seed {} units",
            distinct.len(),
            cfg.n_aae
        )));
    }
    let floor: Vec<T> = global_variance(&frames)
        .into_iter()
        .map(|v| (v * T::lit(cfg.var_floor_scale)).max(T::min_positive_value()))
        .collect();
    let lbg = lbg_cluster_oversplit(
        &frames,
        cfg.n_aae,
        cfg.init_oversplit,
        derive_seed(cfg.seed, STREAM_LBG),
        &LbgConfig::default(),
    )?;
    let dim = frames.dim();
    let mut sums = vec![vec![T::zero(); dim]; cfg.n_aae];
    for (f, &c) in frames.frames().zip(&lbg.assignments) {
        for (k, &x) in f.iter().enumerate() {
            let d = x - lbg.centroids[c][k];
            sums[c][k] = sums[c][k] + d * d;
        }
    }
    let gaussians = (0..cfg.n_aae)
        .map(|c| {
            let n = T::lit(lbg.occupancy[c].max(1) as f64);
            let var = sums[c].iter().zip(&floor).map(|(&s, &fl)| (s / n).max(fl)).collect();
            DiagGaussian::new(lbg.centroids[c].clone(), var)
        })
        .collect::<Result<Vec<_>>>()?;
    AcousticModelSet::from_gaussians(gaussians, floor)
}

/// Initial single-Gaussian units and a first dictionary estimated from
/// whole utterances (equal slices per word for multi-word transcripts).
pub fn initialize<T: Real>(corpus: &Corpus<T>, cfg: &PipelineConfig) -> Result<(AcousticModelSet<T>, Dictionary)> {
    cfg.validate()?;
    let models = initial_models(corpus, cfg)?;
    let update = update_dictionary(
        corpus,
        &models,
        &Dictionary::new(),
        &UpdateConfig {
            segmentation: Segmentation::Uniform,
            ..update_config(cfg)
        },
    )?;
    Ok((models, update.dictionary))
}

fn update_config(cfg: &PipelineConfig) -> UpdateConfig {
    UpdateConfig {
        min_examples: cfg.min_examples,
        max_units: cfg.max_units,
        order: cfg.merge_order,
        segmentation: Segmentation::ForcedAlignment,
    }
}

/// Random pronunciations without repeated adjacent units, lengths drawn
/// uniformly from `lengths`. Used as a frozen control lexicon.
pub fn random_dictionary(words: &[String], n_units: usize, lengths: (usize, usize), seed: u64) -> Dictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dict = Dictionary::new();
    for w in words {
        let len = rng.random_range(lengths.0.max(1)..=lengths.1.max(lengths.0.max(1)));
        let mut pron: Vec<usize> = Vec::with_capacity(len);
        while pron.len() < len {
            let u = rng.random_range(0..n_units);
            if pron.last() != Some(&u) || n_units == 1 {
                pron.push(u);
            }
        }
        dict.insert(w.clone(), pron).expect("nonempty pronunciation");
    }
    dict
}

/// Decoder choice and language model used by [`evaluate`].
#[derive(Debug, Clone, Copy)]
pub struct DecodeSettings<'a> {
    pub mode: DecodeMode,
    pub lm: Option<&'a BigramLm>,
    pub weights: LmWeights,
}

impl<'a> DecodeSettings<'a> {
    pub fn from_config(cfg: &PipelineConfig, lm: Option<&'a BigramLm>) -> Self {
        Self {
            mode: cfg.decode_mode,
            lm,
            weights: LmWeights {
                lm_weight: cfg.lm_weight,
                insertion_penalty: cfg.insertion_penalty,
            },
        }
    }
}

fn decode_one<T: Real>(
    emissions: &Emissions<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    settings: &DecodeSettings,
) -> Result<Vec<String>> {
    let r = match settings.mode {
        DecodeMode::Isolated => decode_isolated_emissions(emissions, dict, scorer).map(|(w, _)| vec![w]),
        DecodeMode::Continuous => {
            decode_continuous_emissions(emissions, dict, scorer, settings.lm, settings.weights).map(|r| r.words)
        }
    };
    match r {
        Err(Error::NoValidPath { .. }) => Ok(Vec::new()),
        other => other,
    }
}

/// Best word sequence for every utterance, in corpus order. An utterance
/// too short for any pronunciation yields an empty hypothesis.
pub fn decode_corpus<T: Real>(
    corpus: &Corpus<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    settings: &DecodeSettings,
) -> Result<Vec<Vec<String>>> {
    corpus
        .utterances()
        .par_iter()
        .map(|u| {
            let em = scorer.emissions(&u.features)?;
            decode_one(&em, dict, scorer, settings).map_err(|e| Error::InUtterance {
                id: u.id.clone(),
                source: Box::new(e),
            })
        })
        .collect()
}

/// Decodes every utterance and scores it against its transcript.
pub fn evaluate<T: Real>(
    corpus: &Corpus<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    settings: &DecodeSettings,
) -> Result<WerReport> {
    let hyps = decode_corpus(corpus, dict, scorer, settings)?;
    let mut report = WerReport::default();
    for (u, h) in corpus.utterances().iter().zip(hyps) {
        report.push(u.id.clone(), u.transcript.clone(), h);
    }
    Ok(report)
}

/// Frame labels from forced alignment, `None` where no path exists.
pub fn align_labels<T: Real>(
    corpus: &Corpus<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
) -> Result<Vec<Option<(Vec<usize>, T)>>> {
    corpus
        .utterances()
        .par_iter()
        .map(|u| {
            let em = scorer.emissions(&u.features)?;
            match force_align_emissions(&em, &u.transcript, dict, scorer) {
                Ok(a) => Ok(Some((a.labels, a.loglik))),
                Err(Error::NoValidPath { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DevScore {
    wer: f64,
    loglik: f64,
}

impl DevScore {
    /// Lower WER wins; equal WER falls back to higher likelihood.
    fn beats(&self, other: &DevScore) -> bool {
        self.wer < other.wer || (self.wer == other.wer && self.loglik > other.loglik)
    }
}

fn dev_score<T: Real>(
    dev: &Corpus<T>,
    dict: &Dictionary,
    scorer: &impl Scorer<T>,
    settings: &DecodeSettings,
) -> Result<DevScore> {
    let wer = evaluate(dev, dict, scorer, settings)?.rate();
    let labels = align_labels(dev, dict, scorer)?;
    let total: f64 = labels.iter().flatten().map(|(_, ll)| ll.as_f64()).sum();
    let frames = dev.total_frames().max(1) as f64;
    Ok(DevScore {
        wer,
        loglik: total / frames,
    })
}

struct Trained<T> {
    models: AcousticModelSet<T>,
    loglik: f64,
    starved: usize,
}

/// Segmental training steps until the relative log-likelihood gain drops
/// below the tolerance.
fn train_to_convergence<T: Real>(
    train: &Corpus<T>,
    dict: &Dictionary,
    mut models: AcousticModelSet<T>,
    cfg: &PipelineConfig,
) -> Result<Trained<T>> {
    let mut prev: Option<f64> = None;
    let mut loglik = f64::NEG_INFINITY;
    let mut starved = 0;
    for _ in 0..cfg.train_steps.max(1) {
        let step = viterbi_train_step(train, dict, &models)?;
        loglik = step.loglik.as_f64();
        starved = step.starved_units.len();
        if !step.skipped_utterances.is_empty() {
            log::warn!("{} utterances could not be aligned", step.skipped_utterances.len());
        }
        models = step.models;
        if let Some(p) = prev {
            if loglik - p <= cfg.train_tolerance * p.abs() {
                break;
            }
        }
        prev = Some(loglik);
    }
    Ok(Trained { models, loglik, starved })
}

/// Result of the GMM loop: the best-dev snapshot and one report per pass.
#[derive(Debug, Clone)]
pub struct GmmStage<T> {
    pub models: AcousticModelSet<T>,
    pub dictionary: Dictionary,
    pub reports: Vec<IterationReport>,
    pub best_iteration: usize,
}

/// Alternates dictionary re-estimation, mixture doubling (from the second
/// pass, up to `max_mixtures`) and segmental training until the dev score
/// fails to improve for `patience` passes.
pub fn run_gmm_stage<T: Real>(
    train: &Corpus<T>,
    dev: &Corpus<T>,
    models: AcousticModelSet<T>,
    dict: Dictionary,
    cfg: &PipelineConfig,
    lm: Option<&BigramLm>,
) -> Result<GmmStage<T>> {
    let settings = DecodeSettings::from_config(cfg, lm);
    let mut models = models;
    let mut dict = dict;
    let mut reports = Vec::new();
    let mut best: Option<(DevScore, AcousticModelSet<T>, Dictionary, usize)> = None;
    let mut stale = 0;
    for it in 0..cfg.max_gmm_iterations.max(1) {
        let mut changes = 0;
        if !cfg.freeze_dictionary {
            let update = update_dictionary(train, &models, &dict, &update_config(cfg))?;
            changes = update.dictionary.changes_from(&dict);
            dict = update.dictionary;
        }
        if it > 0 && models.max_components() < cfg.max_mixtures {
            models = models.split_all(T::lit(cfg.split_epsilon));
        }
        let trained = train_to_convergence(train, &dict, models, cfg)?;
        models = trained.models;
        let score = dev_score(dev, &dict, &models, &settings)?;
        log::info!(
            "gmm iteration {it}: mixtures {} train loglik {:.3} dev WER {:.4} changes {changes}",
            models.max_components(),
            trained.loglik,
            score.wer
        );
        reports.push(IterationReport {
            iteration: it,
            stage: Stage::Gmm,
            size: models.max_components(),
            train_loglik: trained.loglik,
            dev_wer: score.wer,
            dev_loglik: score.loglik,
            dict_changes: changes,
            starved_units: trained.starved,
        });
        if best.as_ref().is_none_or(|(b, ..)| score.beats(b)) {
            best = Some((score, models.clone(), dict.clone(), it));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (_, models, dictionary, best_iteration) = best.expect("at least one iteration");
    Ok(GmmStage {
        models,
        dictionary,
        reports,
        best_iteration,
    })
}

fn frame_set<T: Real>(
    corpus: &Corpus<T>,
    labels: &[Option<(Vec<usize>, T)>],
    model: &MlpModel<T>,
) -> Result<LabeledFrameSet<T>> {
    LabeledFrameSet::from_alignments(
        model,
        corpus
            .utterances()
            .iter()
            .zip(labels)
            .filter_map(|(u, l)| l.as_ref().map(|(lab, _)| (&u.features, lab.as_slice()))),
    )
}

/// Result of the network loop.
#[derive(Debug, Clone)]
pub struct MlpStage<T> {
    pub scorer: HybridScorer<T>,
    pub dictionary: Dictionary,
    pub reports: Vec<IterationReport>,
    pub best_iteration: usize,
    /// Training diverged; the returned snapshot is the last good one.
    pub diverged: bool,
    /// Frame labels of the first training round (`None` = unaligned).
    pub initial_labels: Vec<Option<Vec<usize>>>,
    /// Loss trace CSV of every training round.
    pub traces: Vec<String>,
}

/// Trains a network on GMM alignments, then alternates dictionary
/// re-estimation with hybrid scores, re-alignment and re-training, keeping
/// the best dev snapshot.
pub fn run_mlp_stage<T: Real>(
    train: &Corpus<T>,
    dev: &Corpus<T>,
    gmm: &AcousticModelSet<T>,
    dict: Dictionary,
    cfg: &PipelineConfig,
    lm: Option<&BigramLm>,
) -> Result<MlpStage<T>> {
    cfg.validate()?;
    let settings = DecodeSettings::from_config(cfg, lm);
    let first_iteration = 0;
    let mut model = MlpModel::new(
        train.dim(),
        cfg.context,
        &cfg.hidden,
        gmm.n_units(),
        derive_seed(cfg.seed, STREAM_MLP_INIT),
    )?;
    model.fit_normalizer(train.utterances().iter().map(|u| &u.features));

    let mut labels = align_labels(train, &dict, gmm)?;
    let dev_labels = align_labels(dev, &dict, gmm)?;
    let initial_labels = labels.iter().map(|l| l.as_ref().map(|(v, _)| v.clone())).collect();
    let mut dict = dict;
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    let mut best: Option<(DevScore, HybridScorer<T>, Dictionary, usize)> = None;
    let mut stale = 0;
    let mut diverged = false;
    let mut epochs = 0;
    let mut dev_set = frame_set(dev, &dev_labels, &model)?;
    let mut changes = 0;

    for it in 0..cfg.max_mlp_iterations.max(1) {
        let data = frame_set(train, &labels, &model)?;
        let train_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, STREAM_MLP_TRAIN + it as u64),
            ..cfg.mlp.clone()
        };
        let dev_ref = (!dev_set.is_empty()).then_some(&dev_set);
        let trained = match mlp_train_with_dev(model.clone(), &data, dev_ref, &train_cfg) {
            Ok(t) => t,
            Err(e @ Error::Divergence { .. }) if best.is_some() => {
                log::warn!("network stage stopped: {e}");
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        epochs += train_cfg.epochs;
        traces.push(trained.trace_csv());
        model = trained.model;
        let scorer = HybridScorer::new(model.clone(), data.priors(), T::lit(cfg.prior_floor), gmm)?;
        let score = dev_score(dev, &dict, &scorer, &settings)?;
        let train_loglik = labels.iter().flatten().map(|(_, ll)| ll.as_f64()).sum();
        log::info!("mlp iteration {it}: epochs {epochs} dev WER {:.4} changes {changes}", score.wer);
        reports.push(IterationReport {
            iteration: first_iteration + it,
            stage: Stage::Mlp,
            size: epochs,
            train_loglik,
            dev_wer: score.wer,
            dev_loglik: score.loglik,
            dict_changes: changes,
            starved_units: 0,
        });
        if best.as_ref().is_none_or(|(b, ..)| score.beats(b)) {
            best = Some((score, scorer.clone(), dict.clone(), it));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
        if it + 1 == cfg.max_mlp_iterations.max(1) {
            break;
        }
        changes = 0;
        if !cfg.freeze_dictionary {
            let update = update_dictionary(train, &scorer, &dict, &update_config(cfg))?;
            changes = update.dictionary.changes_from(&dict);
            dict = update.dictionary;
        }
        labels = align_labels(train, &dict, &scorer)?;
        dev_set = frame_set(dev, &align_labels(dev, &dict, &scorer)?, &model)?;
    }
    let (_, scorer, dictionary, best_iteration) = best.expect("first round trained");
    Ok(MlpStage {
        scorer,
        dictionary,
        reports,
        best_iteration,
        diverged,
        initial_labels,
        traces,
    })
}

/// The emission model of a finished system.
#[derive(Debug, Clone)]
pub enum SystemScorer<T> {
    Gmm(AcousticModelSet<T>),
    Hybrid(HybridScorer<T>),
}

impl<T: Real> Scorer<T> for SystemScorer<T> {
    fn n_units(&self) -> usize {
        match self {
            SystemScorer::Gmm(m) => m.n_units(),
            SystemScorer::Hybrid(h) => h.n_units(),
        }
    }

    fn emissions(&self, features: &FeatureMatrix<T>) -> Result<Emissions<T>> {
        match self {
            SystemScorer::Gmm(m) => m.emissions(features),
            SystemScorer::Hybrid(h) => h.emissions(features),
        }
    }

    fn stay_logprob(&self, unit: usize) -> T {
        match self {
            SystemScorer::Gmm(m) => m.stay_logprob(unit),
            SystemScorer::Hybrid(h) => h.stay_logprob(unit),
        }
    }

    fn exit_logprob(&self, unit: usize) -> T {
        match self {
            SystemScorer::Gmm(m) => m.exit_logprob(unit),
            SystemScorer::Hybrid(h) => h.exit_logprob(unit),
        }
    }
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutcome<T> {
    pub split: DevSplit,
    pub initial_dictionary: Dictionary,
    pub gmm: GmmStage<T>,
    pub mlp: Option<MlpStage<T>>,
}

impl<T: Real> PipelineOutcome<T> {
    /// Dictionary of the final system (network stage when it ran).
    pub fn dictionary(&self) -> &Dictionary {
        self.mlp.as_ref().map_or(&self.gmm.dictionary, |m| &m.dictionary)
    }

    pub fn scorer(&self) -> SystemScorer<T> {
        match &self.mlp {
            Some(m) => SystemScorer::Hybrid(m.scorer.clone()),
            None => SystemScorer::Gmm(self.gmm.models.clone()),
        }
    }

    pub fn reports(&self) -> Vec<IterationReport> {
        let mut r = self.gmm.reports.clone();
        if let Some(m) = &self.mlp {
            r.extend(m.reports.iter().cloned());
        }
        r
    }
}

/// Runs initialization, the GMM loop and (when enabled) the network loop.
/// A supplied `dictionary` replaces the estimated initial one; with
/// `freeze_dictionary` it is never updated.
pub fn run_pipeline<T: Real>(
    corpus: &Corpus<T>,
    cfg: &PipelineConfig,
    dictionary: Option<Dictionary>,
    lm: Option<&BigramLm>,
) -> Result<PipelineOutcome<T>> {
    cfg.validate()?;
    let split = split_dev(corpus, cfg.dev_fraction, derive_seed(cfg.seed, STREAM_SPLIT));
    let train = corpus.subset(&split.train)?;
    // Without held-out utterances the training data doubles as dev data.
    let dev = if split.dev.is_empty() {
        train.clone()
    } else {
        corpus.subset(&split.dev)?
    };
    let (models, dict) = match dictionary {
        Some(d) => {
            d.validate(cfg.n_aae)?;
            (initial_models(&train, cfg)?, d)
        }
        None => initialize(&train, cfg)?,
    };
    let initial_dictionary = dict.clone();
    let gmm = run_gmm_stage(&train, &dev, models, dict, cfg, lm)?;
    let mlp = if cfg.mlp_stage {
        Some(run_mlp_stage(&train, &dev, &gmm.models, gmm.dictionary.clone(), cfg, lm)?)
    } else {
        None
    };
    Ok(PipelineOutcome {
        split,
        initial_dictionary,
        gmm,
        mlp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SynthSpec, SyntheticGroundTruth};

    #[test]
    fn split_is_per_word_and_seeded() {
        let spec = SynthSpec {
            n_words: 4,
            utterances_per_word: 10,
            ..SynthSpec::default()
        };
        let gt = SyntheticGroundTruth::generate(&spec, 1).unwrap();
        let (corpus, _) = gt.sample_corpus::<f64>(&spec, 2, "u").unwrap();
        let a = split_dev(&corpus, 0.2, 7);
        assert_eq!(a, split_dev(&corpus, 0.2, 7));
        assert_eq!(a.dev.len(), 8);
        assert_eq!(a.train.len() + a.dev.len(), 40);
        for w in corpus.vocabulary() {
            let held = corpus.utterances_of(w).iter().filter(|i| a.dev.contains(i)).count();
            assert_eq!(held, 2);
        }
    }

    #[test]
    fn random_dictionary_has_no_repeats() {
        let words: Vec<String> = (0..50).map(|i| format!("W{i}")).collect();
        let d = random_dictionary(&words, 5, (2, 4), 3);
        for (_, p) in d.iter() {
            assert!((2..=4).contains(&p.len()));
            assert!(p.windows(2).all(|w| w[0] != w[1]));
        }
    }
}
