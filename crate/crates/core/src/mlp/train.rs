use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ForwardMode, MlpModel};
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Context-stacked training frames with their state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrameSet<T> {
    inputs: Vec<T>,
    input_dim: usize,
    labels: Vec<usize>,
    n_states: usize,
}

impl<T: Real> LabeledFrameSet<T> {
    /// Stacks every frame of every utterance the way `model` expects and
    /// pairs it with its label.
    pub fn from_alignments<'a>(
        model: &MlpModel<T>,
        items: impl IntoIterator<Item = (&'a FeatureMatrix<T>, &'a [usize])>,
    ) -> Result<Self> {
        let mut set = Self {
            inputs: Vec::new(),
            input_dim: model.input_dim(),
            labels: Vec::new(),
            n_states: model.n_states(),
        };
        for (features, labels) in items {
            if features.n_frames() != labels.len() {
                return Err(Error::DimensionMismatch {
                    context: "frame labels".into(),
                    expected: features.n_frames(),
                    found: labels.len(),
                });
            }
            if features.dim() != model.frame_dim() {
                return Err(Error::DimensionMismatch {
                    context: "features vs network".into(),
                    expected: model.frame_dim(),
                    found: features.dim(),
                });
            }
            for (t, &y) in labels.iter().enumerate() {
                set.push(model.stack(features, t), y)?;
            }
        }
        Ok(set)
    }

    /// Builds a set from already stacked inputs.
    pub fn from_stacked(inputs: Vec<Vec<T>>, labels: Vec<usize>, n_states: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument("one label per input required".into()));
        }
        let input_dim = inputs.first().map_or(0, Vec::len);
        let mut set = Self {
            inputs: Vec::with_capacity(inputs.len() * input_dim),
            input_dim,
            labels: Vec::with_capacity(labels.len()),
            n_states,
        };
        for (x, y) in inputs.into_iter().zip(labels) {
            set.push(x, y)?;
        }
        Ok(set)
    }

    fn push(&mut self, x: Vec<T>, y: usize) -> Result<()> {
        if y >= self.n_states {
            return Err(Error::InvalidArgument(format!("label {y} outside {} states", self.n_states)));
        }
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "stacked input".into(),
                expected: self.input_dim,
                found: x.len(),
            });
        }
        self.inputs.extend(x);
        self.labels.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Relative label frequencies; sums to one on a nonempty set.
    pub fn priors(&self) -> Vec<T> {
        let mut counts = vec![0usize; self.n_states];
        for &y in &self.labels {
            counts[y] += 1;
        }
        let n = T::lit(self.len().max(1) as f64);
        counts.into_iter().map(|c| T::lit(c as f64) / n).collect()
    }

    /// Items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().flat_map(|&i| self.input(i).iter().copied()).collect(),
            input_dim: self.input_dim,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_states: self.n_states,
        }
    }
}

/// Hyperparameters of minibatch SGD training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub dropout: f64,
    /// Weight of the l1 penalty on all parameters.
    pub l1: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Epochs without improvement before the learning rate is halved.
    pub lr_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 128,
            dropout: 0.5,
            l1: 1e-6,
            epochs: 20,
            seed: 0,
            lr_patience: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.l1 >= 0.0) {
            return bad("l1 coefficient must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be positive and momentum in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch objective over the epoch.
    pub loss: f64,
    /// Held-out cross entropy, when a dev set was supplied.
    pub dev_metric: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedMlp<T> {
    pub model: MlpModel<T>,
    pub trace: Vec<EpochStats>,
}

impl<T> TrainedMlp<T> {
    /// The loss trace as `epoch,loss,dev_metric` CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,loss,dev_metric\n");
        for e in &self.trace {
            let dev = e.dev_metric.map(|d| d.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, dev));
        }
        out
    }
}

/// Samples per parallel gradient chunk. Fixed so results do not depend on
/// the thread count.
const CHUNK: usize = 16;

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Forward and backward pass for one example. Adds the cross-entropy
/// gradient into `grad` (flat, layer by layer, weights then bias) and
/// returns the example's cross entropy.
fn backprop<T: Real>(model: &MlpModel<T>, x: &[T], y: usize, mode: ForwardMode, grad: &mut [T]) -> T {
    let layers = model.layers();
    let mut rng = match mode {
        ForwardMode::Train { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        ForwardMode::Eval => None,
    };
    // acts[l] is the input to layer l; masks[l] scales relu'(z) of hidden layer l.
    let mut acts: Vec<Vec<T>> = Vec::with_capacity(layers.len());
    let mut masks: Vec<Vec<T>> = Vec::with_capacity(layers.len());
    let mut a = Vec::new();
    model.normalize(x, &mut a);
    let mut z = Vec::new();
    let last = layers.len() - 1;
    for (li, layer) in layers.iter().enumerate() {
        layer.affine(&a, &mut z);
        acts.push(std::mem::take(&mut a));
        if li < last {
            let mut mask: Vec<T> = z.iter().map(|&v| if v > T::zero() { T::one() } else { T::zero() }).collect();
            if let (Some(rng), ForwardMode::Train { dropout, .. }) = (rng.as_mut(), mode) {
                let keep = T::lit(1.0 / (1.0 - dropout));
                for m in mask.iter_mut() {
                    *m = if rng.random::<f64>() < dropout { T::zero() } else { *m * keep };
                }
            }
            a = z.iter().zip(&mask).map(|(&v, &m)| v * m).collect();
            masks.push(mask);
        } else {
            a = z.clone();
        }
    }
    let norm = log_sum_exp(&a);
    let loss = norm - a[y];
    let mut delta: Vec<T> = a.iter().map(|&l| (l - norm).exp()).collect();
    delta[y] = delta[y] - T::one();

    let mut offset = grad.len();
    for li in (0..layers.len()).rev() {
        let layer = &layers[li];
        offset -= layer.n_params();
        let (gw, gb) = grad[offset..offset + layer.n_params()].split_at_mut(layer.weights.len());
        let input = &acts[li];
        for (o, &d) in delta.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            gb[o] = gb[o] + d;
            let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
            for (g, &xi) in row.iter_mut().zip(input) {
                *g = *g + d * xi;
            }
        }
        if li > 0 {
            let mask = &masks[li - 1];
            let mut next = vec![T::zero(); layer.n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (n, &w) in next.iter_mut().zip(row) {
                    *n = *n + w * d;
                }
            }
            for (n, &m) in next.iter_mut().zip(mask) {
                *n = *n * m;
            }
            delta = next;
        }
    }
    loss
}

/// Mean cross-entropy gradient over `indices`, plus the summed loss.
fn batch_gradient<T: Real>(
    model: &MlpModel<T>,
    data: &LabeledFrameSet<T>,
    indices: &[usize],
    dropout: Option<(f64, u64)>,
) -> (Vec<T>, T) {
    let n = model.n_params();
    let partials: Vec<(Vec<T>, T)> = indices
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut g = vec![T::zero(); n];
            let mut loss = T::zero();
            for (k, &i) in chunk.iter().enumerate() {
                let mode = match dropout {
                    Some((p, seed)) => ForwardMode::Train {
                        dropout: p,
                        seed: mix(seed, (c * CHUNK + k) as u64, i as u64),
                    },
                    None => ForwardMode::Eval,
                };
                loss = loss + backprop(model, data.input(i), data.labels[i], mode, &mut g);
            }
            (g, loss)
        })
        .collect();
    let mut total = vec![T::zero(); n];
    let mut loss = T::zero();
    for (g, l) in partials {
        for (t, v) in total.iter_mut().zip(g) {
            *t = *t + v;
        }
        loss = loss + l;
    }
    let scale = T::one() / T::lit(indices.len() as f64);
    total.iter_mut().for_each(|g| *g = *g * scale);
    (total, loss)
}

fn params<T: Real>(model: &MlpModel<T>) -> Vec<T> {
    model
        .layers()
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

fn set_param<T: Real>(model: &mut MlpModel<T>, mut idx: usize, value: T) {
    for l in model.layers_mut() {
        if idx < l.weights.len() {
            l.weights[idx] = value;
            return;
        }
        idx -= l.weights.len();
        if idx < l.bias.len() {
            l.bias[idx] = value;
            return;
        }
        idx -= l.bias.len();
    }
    panic!("parameter index out of range");
}

fn apply_update<T: Real>(model: &mut MlpModel<T>, velocity: &[T]) {
    let mut k = 0;
    for l in model.layers_mut() {
        for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *w = *w + velocity[k];
            k += 1;
        }
    }
}

/// Mean cross entropy over the set plus `l1 · ‖W‖₁`, without dropout.
pub fn objective<T: Real>(model: &MlpModel<T>, data: &LabeledFrameSet<T>, l1: f64) -> Result<T> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty frame set".into()));
    }
    let ce: T = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let lp = model.log_posteriors(data.input(i), ForwardMode::Eval)?;
            Ok(-lp[data.labels[i]])
        })
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .sum();
    Ok(ce / T::lit(data.len() as f64) + T::lit(l1) * model.l1_norm())
}

/// Fraction of items whose argmax posterior matches the label.
pub fn accuracy<T: Real>(model: &MlpModel<T>, data: &LabeledFrameSet<T>) -> Result<f64> {
    let mut hits = 0usize;
    for i in 0..data.len() {
        let lp = model.log_posteriors(data.input(i), ForwardMode::Eval)?;
        let best = (0..lp.len()).fold(0, |b, s| if lp[s] > lp[b] { s } else { b });
        hits += usize::from(best == data.labels[i]);
    }
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Trains on `data` with shuffled minibatch SGD and momentum.
pub fn mlp_train<T: Real>(model: MlpModel<T>, data: &LabeledFrameSet<T>, cfg: &TrainConfig) -> Result<TrainedMlp<T>> {
    mlp_train_with_dev(model, data, None, cfg)
}

/// As [`mlp_train`], tracking held-out cross entropy on `dev`. The learning
/// rate is halved after `lr_patience` epochs without improvement of the dev
/// loss (training loss when no dev set is given).
pub fn mlp_train_with_dev<T: Real>(
    mut model: MlpModel<T>,
    data: &LabeledFrameSet<T>,
    dev: Option<&LabeledFrameSet<T>>,
    cfg: &TrainConfig,
) -> Result<TrainedMlp<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training frames".into()));
    }
    if data.input_dim() != model.input_dim() || data.n_states() != model.n_states() {
        return Err(Error::DimensionMismatch {
            context: "frame set vs network".into(),
            expected: model.input_dim(),
            found: data.input_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut velocity = vec![T::zero(); model.n_params()];
    let momentum = T::lit(cfg.momentum);
    let l1 = T::lit(cfg.l1);
    let mut lr = cfg.learning_rate;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let epoch_seed: u64 = rng.random();
        let mut total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let dropout = (cfg.dropout > 0.0).then(|| (cfg.dropout, mix(epoch_seed, b as u64, 0)));
            let (grad, loss) = batch_gradient(&model, data, batch, dropout);
            let penalty = if cfg.l1 > 0.0 { l1 * model.l1_norm() } else { T::zero() };
            total += (loss / T::lit(batch.len() as f64) + penalty).as_f64() * batch.len() as f64;
            let step = T::lit(lr);
            for ((v, g), p) in velocity.iter_mut().zip(&grad).zip(params(&model)) {
                let sub = if cfg.l1 > 0.0 && p != T::zero() { l1 * p.signum() } else { T::zero() };
                *v = momentum * *v - step * (*g + sub);
            }
            apply_update(&mut model, &velocity);
        }
        let loss = total / data.len() as f64;
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        let dev_metric = match dev {
            Some(d) if !d.is_empty() => Some(objective(&model, d, 0.0)?.as_f64()),
            _ => None,
        };
        log::debug!("epoch {epoch}: loss {loss:.6} dev {dev_metric:?} lr {lr}");
        trace.push(EpochStats {
            epoch,
            loss,
            dev_metric,
            learning_rate: lr,
        });
        let watched = dev_metric.unwrap_or(loss);
        if watched < best {
            best = watched;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.lr_patience {
                lr *= 0.5;
                stale = 0;
            }
        }
    }
    Ok(TrainedMlp { model, trace })
}

/// Outcome of comparing backprop gradients with finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Checks the analytic gradient of the objective (mean cross entropy plus
/// `l1 · ‖W‖₁`, no dropout) against central differences with step `1e-5`
/// on up to `n_params` randomly chosen parameters.
///
/// Parameters whose perturbation flips a ReLU on any example, or that lie
/// within the step of zero when `l1 > 0`, are skipped. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check<T: Real>(
    model: &MlpModel<T>,
    data: &LabeledFrameSet<T>,
    l1: f64,
    n_params: usize,
    seed: u64,
) -> Result<GradientCheck> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty frame set".into()));
    }
    let h = 1e-5;
    let indices: Vec<usize> = (0..data.len()).collect();
    let (grad, _) = batch_gradient(model, data, &indices, None);
    let base = params(model);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick: Vec<usize> = (0..base.len()).collect();
    pick.shuffle(&mut rng);
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    let mut probe = model.clone();
    let patterns = |m: &MlpModel<T>| relu_patterns(m, data);
    for &k in &pick {
        if out.checked >= n_params {
            break;
        }
        let p = base[k];
        if l1 > 0.0 && p.as_f64().abs() < h {
            out.skipped += 1;
            continue;
        }
        set_param(&mut probe, k, p + T::lit(h));
        let plus = objective(&probe, data, l1)?.as_f64();
        let plus_pattern = patterns(&probe);
        set_param(&mut probe, k, p - T::lit(h));
        let minus = objective(&probe, data, l1)?.as_f64();
        let minus_pattern = patterns(&probe);
        set_param(&mut probe, k, p);
        if plus_pattern != minus_pattern {
            out.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let analytic = grad[k].as_f64() + if l1 > 0.0 { l1 * p.as_f64().signum() } else { 0.0 };
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        out.max_relative_error = out.max_relative_error.max((analytic - numeric).abs() / denom);
        out.checked += 1;
    }
    Ok(out)
}

/// Sign pattern of every hidden pre-activation over the set.
fn relu_patterns<T: Real>(model: &MlpModel<T>, data: &LabeledFrameSet<T>) -> Vec<bool> {
    let layers = model.layers();
    let mut out = Vec::new();
    let mut a = Vec::new();
    let mut z = Vec::new();
    for i in 0..data.len() {
        model.normalize(data.input(i), &mut a);
        for layer in &layers[..layers.len() - 1] {
            layer.affine(&a, &mut z);
            out.extend(z.iter().map(|&v| v > T::zero()));
            a = z.iter().map(|&v| v.max(T::zero())).collect();
        }
    }
    out
}
