use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Appends regression deltas and delta-deltas, tripling the dimension.
///
/// `d_t = Σ_{k=1..window} k (c_{t+k} - c_{t-k}) / (2 Σ k²)`, with the first and
/// last frames replicated past the edges. Delta-deltas apply the same formula
/// to the deltas.
pub fn compute_deltas<T: Real>(features: &FeatureMatrix<T>, window: usize) -> Result<FeatureMatrix<T>> {
    if window == 0 {
        return Err(Error::InvalidArgument("delta window must be at least 1".into()));
    }
    let deltas = regression(features.as_flat(), features.dim(), window);
    let accel = regression(&deltas, features.dim(), window);
    let dim = features.dim();
    let mut out = Vec::with_capacity(features.as_flat().len() * 3);
    for t in 0..features.n_frames() {
        out.extend_from_slice(features.frame(t));
        out.extend_from_slice(&deltas[t * dim..(t + 1) * dim]);
        out.extend_from_slice(&accel[t * dim..(t + 1) * dim]);
    }
    FeatureMatrix::from_flat(out, dim * 3)
}

fn regression<T: Real>(data: &[T], dim: usize, window: usize) -> Vec<T> {
    let n = data.len() / dim;
    let last = n as isize - 1;
    let norm = T::lit(2.0 * (1..=window).map(|k| (k * k) as f64).sum::<f64>());
    let at = |t: isize, d: usize| data[t.clamp(0, last) as usize * dim + d];
    let mut out = vec![T::zero(); data.len()];
    for t in 0..n as isize {
        for d in 0..dim {
            let mut acc = T::zero();
            for k in 1..=window as isize {
                acc = acc + T::lit(k as f64) * (at(t + k, d) - at(t - k, d));
            }
            out[t as usize * dim + d] = acc / norm;
        }
    }
    out
}
