//! Feed-forward acoustic model for the hybrid stage: ReLU hidden layers,
//! softmax over HMM states, trained with cross entropy plus an l1 penalty.

mod checkpoint;
mod hybrid;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use hybrid::{scaled_loglik, HybridScorer, DEFAULT_PRIOR_FLOOR};
pub use train::{accuracy, gradient_check, mlp_train, mlp_train_with_dev, objective, EpochStats, GradientCheck, LabeledFrameSet, TrainConfig, TrainedMlp};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// One affine layer; `weights` is `n_out × n_in`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub n_in: usize,
    pub n_out: usize,
}

impl<T: Real> Layer<T> {
    fn affine(&self, input: &[T], out: &mut Vec<T>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = self.bias[o];
            for (&w, &x) in row.iter().zip(input) {
                acc = acc + w * x;
            }
            out.push(acc);
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Network parameters plus the input normalization and context window.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<Layer<T>>,
    frame_dim: usize,
    context: usize,
    input_mean: Vec<T>,
    input_scale: Vec<T>,
}

/// Whether dropout is applied in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    Eval,
    /// Inverted dropout on every hidden layer.
    Train { dropout: f64, seed: u64 },
}

impl<T: Real> MlpModel<T> {
    /// Random network over `2·context+1` stacked frames of `frame_dim`
    /// features. Weights are uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn new(frame_dim: usize, context: usize, hidden: &[usize], n_states: usize, seed: u64) -> Result<Self> {
        if frame_dim == 0 || n_states == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument("network layers must be nonempty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![frame_dim * (2 * context + 1)];
        sizes.extend_from_slice(hidden);
        sizes.push(n_states);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / n_in as f64).sqrt();
                Layer {
                    weights: (0..n_in * n_out)
                        .map(|_| T::lit(rng.random_range(-limit..limit)))
                        .collect(),
                    bias: vec![T::zero(); n_out],
                    n_in,
                    n_out,
                }
            })
            .collect();
        Ok(Self {
            layers,
            frame_dim,
            context,
            input_mean: vec![T::zero(); frame_dim],
            input_scale: vec![T::one(); frame_dim],
        })
    }

    /// Assembles a model from explicit parts, checking shapes and finiteness.
    pub fn from_parts(
        layers: Vec<Layer<T>>,
        frame_dim: usize,
        context: usize,
        input_mean: Vec<T>,
        input_scale: Vec<T>,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if layers.is_empty() || input_mean.len() != frame_dim || input_scale.len() != frame_dim {
            return bad("network shape".into());
        }
        if layers[0].n_in != frame_dim * (2 * context + 1) {
            return bad(format!("first layer expects {} inputs", layers[0].n_in));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return bad(format!("layer {i} parameter counts"));
            }
            if i > 0 && layers[i - 1].n_out != l.n_in {
                return bad(format!("layer {i} input size"));
            }
        }
        let model = Self {
            layers,
            frame_dim,
            context,
            input_mean,
            input_scale,
        };
        if !model.is_finite() {
            return Err(Error::Numeric("non-finite network parameters".into()));
        }
        Ok(model)
    }

    /// Sets per-dimension normalization from the frames' mean and deviation.
    pub fn fit_normalizer<'a>(&mut self, frames: impl IntoIterator<Item = &'a FeatureMatrix<T>>) {
        let d = self.frame_dim;
        let mut n = 0usize;
        let mut sum = vec![T::zero(); d];
        let mut sq = vec![T::zero(); d];
        for m in frames {
            for f in m.frames() {
                n += 1;
                for i in 0..d {
                    sum[i] = sum[i] + f[i];
                    sq[i] = sq[i] + f[i] * f[i];
                }
            }
        }
        if n == 0 {
            return;
        }
        let cnt = T::lit(n as f64);
        for i in 0..d {
            let mean = sum[i] / cnt;
            let var = (sq[i] / cnt - mean * mean).max(T::zero());
            self.input_mean[i] = mean;
            self.input_scale[i] = if var > T::lit(1e-12) { T::one() / var.sqrt() } else { T::one() };
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    /// Frames on each side of the centre frame.
    pub fn context(&self) -> usize {
        self.context
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_states(&self) -> usize {
        self.layers.last().expect("nonempty").n_out
    }

    pub fn input_mean(&self) -> &[T] {
        &self.input_mean
    }

    pub fn input_scale(&self) -> &[T] {
        &self.input_scale
    }

    /// Layer widths, input first.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    /// Sum of absolute values of all weights and biases.
    pub fn l1_norm(&self) -> T {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .map(|w| w.abs())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|w| w.is_finite()))
    }

    /// Concatenates frames `t-context ..= t+context` (edges replicated).
    pub fn stack(&self, features: &FeatureMatrix<T>, t: usize) -> Vec<T> {
        let last = features.n_frames() as isize - 1;
        let mut out = Vec::with_capacity(self.input_dim());
        for k in -(self.context as isize)..=self.context as isize {
            let tt = (t as isize + k).clamp(0, last) as usize;
            out.extend_from_slice(features.frame(tt));
        }
        out
    }

    fn normalize(&self, input: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            input
                .iter()
                .enumerate()
                .map(|(i, &x)| (x - self.input_mean[i % self.frame_dim]) * self.input_scale[i % self.frame_dim]),
        );
    }

    /// Output logits for one stacked input.
    fn logits(&self, input: &[T], mode: ForwardMode) -> Vec<T> {
        let mut rng = match mode {
            ForwardMode::Train { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
            ForwardMode::Eval => None,
        };
        let mut a = Vec::with_capacity(input.len());
        self.normalize(input, &mut a);
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.affine(&a, &mut z);
            if li < last {
                for v in z.iter_mut() {
                    *v = v.max(T::zero());
                }
                if let (Some(rng), ForwardMode::Train { dropout, .. }) = (rng.as_mut(), mode) {
                    let keep = T::lit(1.0 / (1.0 - dropout));
                    for v in z.iter_mut() {
                        *v = if rng.random::<f64>() < dropout { T::zero() } else { *v * keep };
                    }
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
    }

    /// Log posteriors (log-softmax of the output layer).
    pub fn log_posteriors(&self, input: &[T], mode: ForwardMode) -> Result<Vec<T>> {
        self.check_input(input)?;
        let logits = self.logits(input, mode);
        let norm = log_sum_exp(&logits);
        Ok(logits.into_iter().map(|l| l - norm).collect())
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input".into(),
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(())
    }
}

/// Posterior over HMM states for one stacked input.
pub fn mlp_forward<T: Real>(model: &MlpModel<T>, input: &[T], mode: ForwardMode) -> Result<Vec<T>> {
    Ok(model.log_posteriors(input, mode)?.into_iter().map(T::exp).collect())
}
