use crate::acoustic::AcousticModelSet;
use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Frame-by-unit table of emission log-scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions<T> {
    n_units: usize,
    data: Vec<T>,
}

impl<T: Real> Emissions<T> {
    /// Wraps a row-major `frames × units` table.
    pub fn from_flat(data: Vec<T>, n_units: usize) -> Result<Self> {
        if n_units == 0 || data.is_empty() || data.len() % n_units != 0 {
            return Err(Error::InvalidArgument("emission table shape".into()));
        }
        Ok(Self { n_units, data })
    }

    pub fn from_fn(n_frames: usize, n_units: usize, f: impl Fn(usize, usize) -> T) -> Result<Self> {
        let data = (0..n_frames)
            .flat_map(|t| (0..n_units).map(move |u| (t, u)))
            .map(|(t, u)| f(t, u))
            .collect();
        Self::from_flat(data, n_units)
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.n_units
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    #[inline]
    pub fn get(&self, t: usize, unit: usize) -> T {
        self.data[t * self.n_units + unit]
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.n_units..(t + 1) * self.n_units]
    }

    /// Rows `start..end` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            n_units: self.n_units,
            data: self.data[start * self.n_units..end * self.n_units].to_vec(),
        }
    }
}

/// Anything that scores frames against units and supplies the per-unit
/// self-loop and exit log-probabilities.
pub trait Scorer<T: Real>: Sync {
    fn n_units(&self) -> usize;

    fn emissions(&self, features: &FeatureMatrix<T>) -> Result<Emissions<T>>;

    fn stay_logprob(&self, unit: usize) -> T;

    fn exit_logprob(&self, unit: usize) -> T;
}

impl<T: Real> Scorer<T> for AcousticModelSet<T> {
    fn n_units(&self) -> usize {
        AcousticModelSet::n_units(self)
    }

    fn emissions(&self, features: &FeatureMatrix<T>) -> Result<Emissions<T>> {
        if features.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "features vs acoustic models".into(),
                expected: self.dim(),
                found: features.dim(),
            });
        }
        let mut data = Vec::with_capacity(features.n_frames() * self.n_units());
        for frame in features.frames() {
            data.extend(self.units().iter().map(|g| g.logpdf_unchecked(frame)));
        }
        Emissions::from_flat(data, self.n_units())
    }

    fn stay_logprob(&self, unit: usize) -> T {
        self.stay_logprobs()[unit]
    }

    fn exit_logprob(&self, unit: usize) -> T {
        self.exit_logprobs()[unit]
    }
}

impl<T: Real, S: Scorer<T> + ?Sized> Scorer<T> for &S {
    fn n_units(&self) -> usize {
        (**self).n_units()
    }

    fn emissions(&self, features: &FeatureMatrix<T>) -> Result<Emissions<T>> {
        (**self).emissions(features)
    }

    fn stay_logprob(&self, unit: usize) -> T {
        (**self).stay_logprob(unit)
    }

    fn exit_logprob(&self, unit: usize) -> T {
        (**self).exit_logprob(unit)
    }
}
