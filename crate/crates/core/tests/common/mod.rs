#![allow(dead_code)]

use aaelex::acoustic::{AcousticModelSet, DiagGaussian, GmmEmission};
use aaelex::corpus::{FeatureMatrix, SyntheticGroundTruth};
use aaelex::hmm::{Dictionary, Emissions, Scorer};
use aaelex::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Units with random single-Gaussian emissions and random stay probabilities.
pub fn random_models(rng: &mut ChaCha8Rng, n_units: usize, dim: usize) -> AcousticModelSet<f64> {
    let gaussians = (0..n_units)
        .map(|_| {
            let mean = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let var = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
            DiagGaussian::new(mean, var).unwrap()
        })
        .collect();
    let base = AcousticModelSet::from_gaussians(gaussians, vec![1e-3; dim]).unwrap();
    let stay: Vec<f64> = (0..n_units).map(|_| rng.random_range(0.2..0.9)).collect();
    base.with_stay_probabilities(&stay).unwrap()
}

pub fn random_mixture_models(rng: &mut ChaCha8Rng, n_units: usize, dim: usize, comps: usize) -> AcousticModelSet<f64> {
    let units: Vec<GmmEmission<f64>> = (0..n_units)
        .map(|_| {
            let raw: Vec<f64> = (0..comps).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let comps = (0..comps)
                .map(|_| {
                    let mean = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                    let var = (0..dim).map(|_| rng.random_range(0.3..2.0)).collect();
                    DiagGaussian::new(mean, var).unwrap()
                })
                .collect();
            GmmEmission::new(raw.iter().map(|w| w / s).collect(), comps).unwrap()
        })
        .collect();
    let half = 0.5f64.ln();
    AcousticModelSet::new(units, vec![half; n_units], vec![half; n_units], vec![1e-3; dim]).unwrap()
}

pub fn random_features(rng: &mut ChaCha8Rng, frames: usize, dim: usize) -> FeatureMatrix<f64> {
    let data = (0..frames * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    FeatureMatrix::from_flat(data, dim).unwrap()
}

pub fn emissions(models: &impl Scorer<f64>, f: &FeatureMatrix<f64>) -> Emissions<f64> {
    models.emissions(f).unwrap()
}

/// Wraps a scorer, adding a constant to every emission score.
pub struct Shifted<'a, S> {
    pub inner: &'a S,
    pub shift: f64,
}

impl<S: Scorer<f64>> Scorer<f64> for Shifted<'_, S> {
    fn n_units(&self) -> usize {
        self.inner.n_units()
    }
    fn emissions(&self, f: &FeatureMatrix<f64>) -> Result<Emissions<f64>> {
        let e = self.inner.emissions(f)?;
        Emissions::from_fn(e.n_frames(), e.n_units(), |t, u| e.get(t, u) + self.shift)
    }
    fn stay_logprob(&self, u: usize) -> f64 {
        self.inner.stay_logprob(u)
    }
    fn exit_logprob(&self, u: usize) -> f64 {
        self.inner.exit_logprob(u)
    }
}

/// Frames sampled from `models` along `pron`, with 1..=max_dur frames per unit.
pub fn sample_utterance(
    rng: &mut ChaCha8Rng,
    models: &AcousticModelSet<f64>,
    pron: &[usize],
    max_dur: usize,
) -> FeatureMatrix<f64> {
    let dim = models.dim();
    let mut data = Vec::new();
    for &u in pron {
        let g = &models.unit(u).components()[0];
        for _ in 0..rng.random_range(1..=max_dur) {
            for d in 0..dim {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                data.push(g.mean()[d] + z * g.variance()[d].sqrt());
            }
        }
    }
    FeatureMatrix::from_flat(data, dim).unwrap()
}

pub fn random_pron(rng: &mut ChaCha8Rng, n_units: usize, max_len: usize) -> Vec<usize> {
    let len = rng.random_range(1..=max_len);
    let mut p: Vec<usize> = Vec::new();
    while p.len() < len {
        let u = rng.random_range(0..n_units);
        if p.last() != Some(&u) {
            p.push(u);
        }
    }
    p
}

/// Generator units as single-Gaussian models with even transitions.
pub fn true_models(gt: &SyntheticGroundTruth) -> AcousticModelSet<f64> {
    let g = gt
        .unit_means
        .iter()
        .map(|m| DiagGaussian::new(m.clone(), vec![gt.unit_variance; m.len()]).unwrap())
        .collect();
    AcousticModelSet::from_gaussians(g, vec![1e-3; gt.unit_means[0].len()]).unwrap()
}

pub fn true_dictionary(gt: &SyntheticGroundTruth) -> Dictionary {
    let mut d = Dictionary::new();
    for (w, p) in &gt.true_dictionary {
        d.insert(w.clone(), p.clone()).unwrap();
    }
    d
}

/// Best chain score by enumerating every split of `t` frames into
/// `units.len()` non-empty segments.
pub fn enumerate_chain(e: &Emissions<f64>, units: &[usize], s: &impl Scorer<f64>) -> Option<(f64, Vec<usize>)> {
    fn rec(
        e: &Emissions<f64>,
        units: &[usize],
        s: &impl Scorer<f64>,
        pos: usize,
        t0: usize,
        acc: f64,
        path: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let t = e.n_frames();
        let left = units.len() - pos;
        if left == 0 {
            if t0 == t && best.as_ref().is_none_or(|(b, _)| acc > *b) {
                *best = Some((acc, path.clone()));
            }
            return;
        }
        let u = units[pos];
        for d in 1..=(t - t0).saturating_sub(left - 1) {
            let emit: f64 = (t0..t0 + d).map(|k| e.get(k, u)).sum();
            let score = acc + emit + (d - 1) as f64 * s.stay_logprob(u) + s.exit_logprob(u);
            path.extend(std::iter::repeat_n(pos, d));
            rec(e, units, s, pos + 1, t0 + d, score, path, best);
            path.truncate(path.len() - d);
        }
    }
    let mut best = None;
    rec(e, units, s, 0, 0, 0.0, &mut Vec::new(), &mut best);
    best
}
