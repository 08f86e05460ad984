//! Per-unit emission models: diagonal Gaussians, mixtures, LBG initialization
//! and EM re-estimation.

mod em;
mod io;
mod lbg;

pub use em::{em_reestimate, split_mixtures, EmOutcome, GmmAccumulator};
pub use io::{format_models, parse_models, read_models, write_models};
pub use lbg::{lbg_cluster, lbg_cluster_oversplit, lbg_cluster_with, LbgConfig, LbgOutcome};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Real};

/// Gaussian with diagonal covariance and a cached log normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian<T> {
    mean: Vec<T>,
    variance: Vec<T>,
    log_const: T,
}

impl<T: Real> DiagGaussian<T> {
    pub fn new(mean: Vec<T>, variance: Vec<T>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            return Err(Error::DimensionMismatch {
                context: "gaussian variance".into(),
                expected: mean.len(),
                found: variance.len(),
            });
        }
        if variance.iter().any(|v| !(v.is_finite() && *v > T::zero())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("gaussian parameters must be finite with positive variance".into()));
        }
        let log_const = Self::normalizer(&variance);
        Ok(Self {
            mean,
            variance,
            log_const,
        })
    }

    fn normalizer(variance: &[T]) -> T {
        let d = T::lit(variance.len() as f64);
        let log_det: T = variance.iter().map(|v| v.ln()).sum();
        -T::lit(0.5) * (d * T::ln_2pi() + log_det)
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn variance(&self) -> &[T] {
        &self.variance
    }

    pub fn log_const(&self) -> T {
        self.log_const
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density; `x` must have the model's dimension.
    pub fn logpdf(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.mean.len());
        let mut q = T::zero();
        for ((&xi, &m), &v) in x.iter().zip(&self.mean).zip(&self.variance) {
            let d = xi - m;
            q = q + d * d / v;
        }
        self.log_const - T::lit(0.5) * q
    }
}

/// Mixture of diagonal Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmEmission<T> {
    weights: Vec<T>,
    log_weights: Vec<T>,
    components: Vec<DiagGaussian<T>>,
}

fn weight_tolerance<T: Real>(n: usize) -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(16.0 * n as f64))
}

impl<T: Real> GmmEmission<T> {
    pub fn new(weights: Vec<T>, components: Vec<DiagGaussian<T>>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument(format!(
                "mixture needs matching weights and components ({} vs {})",
                weights.len(),
                components.len()
            )));
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                context: "mixture component".into(),
                expected: dim,
                found: c.dim(),
            });
        }
        let total: T = weights.iter().copied().sum();
        if weights.iter().any(|w| !(w.is_finite() && *w >= T::zero()))
            || (total - T::one()).abs() > weight_tolerance(weights.len())
        {
            return Err(Error::Numeric(format!("mixture weights sum to {total}, not 1")));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
            components,
        })
    }

    /// Single-component mixture.
    pub fn single(component: DiagGaussian<T>) -> Self {
        Self {
            weights: vec![T::one()],
            log_weights: vec![T::zero()],
            components: vec![component],
        }
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[DiagGaussian<T>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// `ln Σ_k w_k N(x; μ_k, diag σ²_k)` with log-sum-exp stabilization.
    pub fn logpdf(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "gmm_logpdf input".into(),
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.logpdf_unchecked(x))
    }

    pub(crate) fn logpdf_unchecked(&self, x: &[T]) -> T {
        if self.components.len() == 1 {
            return self.components[0].logpdf(x);
        }
        let mut buf = Vec::with_capacity(self.components.len());
        self.component_logs(x, &mut buf);
        log_sum_exp(&buf)
    }

    /// Fills `out` with `ln w_k + ln N_k(x)`.
    pub(crate) fn component_logs(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.components
                .iter()
                .zip(&self.log_weights)
                .map(|(c, &lw)| lw + c.logpdf(x)),
        );
    }
}

/// The N unit models: one HMM state per unit with a self-loop and an exit arc.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticModelSet<T> {
    units: Vec<GmmEmission<T>>,
    stay: Vec<T>,
    exit: Vec<T>,
    var_floor: Vec<T>,
}

impl<T: Real> AcousticModelSet<T> {
    /// Builds a set from emissions and log stay/exit probabilities.
    pub fn new(units: Vec<GmmEmission<T>>, stay: Vec<T>, exit: Vec<T>, var_floor: Vec<T>) -> Result<Self> {
        if units.is_empty() || stay.len() != units.len() || exit.len() != units.len() {
            return Err(Error::InvalidArgument("model set needs one stay/exit pair per unit".into()));
        }
        let dim = var_floor.len();
        for (u, g) in units.iter().enumerate() {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: format!("unit {u}"),
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        for (u, (&s, &e)) in stay.iter().zip(&exit).enumerate() {
            let total = s.exp() + e.exp();
            if !(s <= T::zero() && e <= T::zero()) || (total - T::one()).abs() > weight_tolerance(2) {
                return Err(Error::Numeric(format!("unit {u}: stay/exit probabilities sum to {total}")));
            }
        }
        Ok(Self {
            units,
            stay,
            exit,
            var_floor,
        })
    }

    /// Single-Gaussian units with 0.5/0.5 transitions.
    pub fn from_gaussians(gaussians: Vec<DiagGaussian<T>>, var_floor: Vec<T>) -> Result<Self> {
        let n = gaussians.len();
        let half = T::lit(0.5).ln();
        Self::new(
            gaussians.into_iter().map(GmmEmission::single).collect(),
            vec![half; n],
            vec![half; n],
            var_floor,
        )
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn dim(&self) -> usize {
        self.var_floor.len()
    }

    pub fn unit(&self, u: usize) -> &GmmEmission<T> {
        &self.units[u]
    }

    pub fn units(&self) -> &[GmmEmission<T>] {
        &self.units
    }

    pub fn stay_logprobs(&self) -> &[T] {
        &self.stay
    }

    pub fn exit_logprobs(&self) -> &[T] {
        &self.exit
    }

    pub fn var_floor(&self) -> &[T] {
        &self.var_floor
    }

    /// Largest component count over all units.
    pub fn max_components(&self) -> usize {
        self.units.iter().map(GmmEmission::n_components).max().unwrap_or(0)
    }

    /// Applies [`split_mixtures`] to every unit.
    pub fn split_all(&self, epsilon: T) -> Self {
        Self {
            units: self.units.iter().map(|g| split_mixtures(g, epsilon)).collect(),
            ..self.clone()
        }
    }

    /// Replaces the stay/exit pair of every unit from a stay probability.
    pub fn with_stay_probabilities(&self, stay_prob: &[T]) -> Result<Self> {
        let stay = stay_prob.iter().map(|p| p.ln()).collect();
        let exit = stay_prob.iter().map(|p| (-*p).ln_1p()).collect();
        Self::new(self.units.clone(), stay, exit, self.var_floor.clone())
    }

    pub(crate) fn with_parts(&self, units: Vec<GmmEmission<T>>, stay: Vec<T>, exit: Vec<T>) -> Self {
        Self {
            units,
            stay,
            exit,
            var_floor: self.var_floor.clone(),
        }
    }
}

/// Per-dimension population variance of a set of frames.
pub fn global_variance<T: Real>(frames: &crate::corpus::FeatureMatrix<T>) -> Vec<T> {
    let n = T::lit(frames.n_frames() as f64);
    let dim = frames.dim();
    let mut mean = vec![T::zero(); dim];
    for f in frames.frames() {
        for (m, &x) in mean.iter_mut().zip(f) {
            *m = *m + x;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![T::zero(); dim];
    for f in frames.frames() {
        for ((v, &x), &m) in var.iter_mut().zip(f).zip(&mean) {
            *v = *v + (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v = *v / n);
    var
}
