use super::{DiagGaussian, GmmEmission};
use crate::scalar::{log_sum_exp, Real};

/// Components whose responsibility mass falls below this fraction of the
/// total weight are re-seeded from the heaviest component.
const MIN_OCCUPANCY_FRACTION: f64 = 1e-5;

/// Sufficient statistics for one EM iteration of a fixed mixture.
///
/// Accumulators built over disjoint frame sets can be merged; the result
/// matches single-pass accumulation up to floating-point reassociation.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmAccumulator<T> {
    occupancy: Vec<T>,
    sum_x: Vec<Vec<T>>,
    sum_xx: Vec<Vec<T>>,
    total_weight: T,
    loglik: T,
}

impl<T: Real> GmmAccumulator<T> {
    pub fn new(n_components: usize, dim: usize) -> Self {
        Self {
            occupancy: vec![T::zero(); n_components],
            sum_x: vec![vec![T::zero(); dim]; n_components],
            sum_xx: vec![vec![T::zero(); dim]; n_components],
            total_weight: T::zero(),
            loglik: T::zero(),
        }
    }

    pub fn for_gmm(gmm: &GmmEmission<T>) -> Self {
        Self::new(gmm.n_components(), gmm.dim())
    }

    /// Adds frame `x` with weight `w`, distributing it by responsibility under `gmm`.
    pub fn add(&mut self, gmm: &GmmEmission<T>, x: &[T], w: T) {
        let mut logs = Vec::with_capacity(gmm.n_components());
        gmm.component_logs(x, &mut logs);
        let norm = log_sum_exp(&logs);
        self.loglik = self.loglik + w * norm;
        self.total_weight = self.total_weight + w;
        for (k, lp) in logs.iter().enumerate() {
            let r = w * (*lp - norm).exp();
            if r == T::zero() {
                continue;
            }
            self.occupancy[k] = self.occupancy[k] + r;
            for ((sx, sxx), &xi) in self.sum_x[k].iter_mut().zip(self.sum_xx[k].iter_mut()).zip(x) {
                *sx = *sx + r * xi;
                *sxx = *sxx + r * xi * xi;
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.total_weight = self.total_weight + other.total_weight;
        self.loglik = self.loglik + other.loglik;
        for k in 0..self.occupancy.len() {
            self.occupancy[k] = self.occupancy[k] + other.occupancy[k];
            for d in 0..self.sum_x[k].len() {
                self.sum_x[k][d] = self.sum_x[k][d] + other.sum_x[k][d];
                self.sum_xx[k][d] = self.sum_xx[k][d] + other.sum_xx[k][d];
            }
        }
    }

    pub fn total_weight(&self) -> T {
        self.total_weight
    }

    /// Weighted log-likelihood of the accumulated frames under the mixture
    /// they were accumulated with.
    pub fn loglik(&self) -> T {
        self.loglik
    }

    /// M-step. Variances are floored per dimension at `floor`.
    pub fn finalize(&self, gmm: &GmmEmission<T>, floor: &[T], epsilon: T) -> EmOutcome<T> {
        let k = self.occupancy.len();
        let threshold = self.total_weight * T::lit(MIN_OCCUPANCY_FRACTION);
        let mut weights = Vec::with_capacity(k);
        let mut comps: Vec<Option<DiagGaussian<T>>> = Vec::with_capacity(k);
        for c in 0..k {
            let n = self.occupancy[c];
            if !(n > threshold) || n <= T::zero() {
                weights.push(T::zero());
                comps.push(None);
                continue;
            }
            let mean: Vec<T> = self.sum_x[c].iter().map(|&s| s / n).collect();
            let var: Vec<T> = self.sum_xx[c]
                .iter()
                .zip(&mean)
                .zip(floor)
                .map(|((&s, &m), &f)| (s / n - m * m).max(f))
                .collect();
            weights.push(n / self.total_weight);
            comps.push(Some(
                DiagGaussian::new(mean, var).unwrap_or_else(|_| gmm.components()[c].clone()),
            ));
        }
        let mut resets = 0;
        if comps.iter().all(Option::is_none) {
            return EmOutcome {
                gmm: gmm.clone(),
                resets: 0,
            };
        }
        for c in 0..k {
            if comps[c].is_some() {
                continue;
            }
            resets += 1;
            let heaviest = (0..k)
                .filter(|&i| comps[i].is_some())
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if weights[b] >= weights[i] => Some(b),
                    _ => Some(i),
                })
                .expect("at least one live component");
            let src = comps[heaviest].clone().expect("live");
            let (lo, hi) = perturbed_pair(&src, epsilon);
            let half = weights[heaviest] / T::lit(2.0);
            weights[heaviest] = half;
            weights[c] = half;
            comps[heaviest] = Some(lo);
            comps[c] = Some(hi);
        }
        let total: T = weights.iter().copied().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        let gmm = GmmEmission::new(weights, comps.into_iter().map(|c| c.expect("filled")).collect())
            .expect("re-estimated mixture is valid");
        EmOutcome { gmm, resets }
    }
}

/// Result of one EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome<T> {
    pub gmm: GmmEmission<T>,
    /// Components that captured almost no responsibility and were re-seeded.
    pub resets: usize,
}

/// One EM iteration of `gmm` on weighted frames `(weight, frame)`.
///
/// The data log-likelihood under the result is at least that under `gmm`
/// unless a component had to be re-seeded. Re-seeding splits the heaviest
/// component with perturbation `0.2` standard deviations.
pub fn em_reestimate<T: Real>(gmm: &GmmEmission<T>, frames: &[(T, &[T])], floor: &[T]) -> EmOutcome<T> {
    let mut acc = GmmAccumulator::for_gmm(gmm);
    for &(w, x) in frames {
        acc.add(gmm, x, w);
    }
    if !(acc.total_weight() > T::zero()) {
        return EmOutcome {
            gmm: gmm.clone(),
            resets: 0,
        };
    }
    acc.finalize(gmm, floor, T::lit(0.2))
}

fn perturbed_pair<T: Real>(g: &DiagGaussian<T>, epsilon: T) -> (DiagGaussian<T>, DiagGaussian<T>) {
    let shift: Vec<T> = g.variance().iter().map(|v| epsilon * v.sqrt()).collect();
    let lo = g.mean().iter().zip(&shift).map(|(&m, &s)| m - s).collect();
    let hi = g.mean().iter().zip(&shift).map(|(&m, &s)| m + s).collect();
    (
        DiagGaussian::new(lo, g.variance().to_vec()).expect("finite"),
        DiagGaussian::new(hi, g.variance().to_vec()).expect("finite"),
    )
}

/// Doubles the component count: each component becomes two children with
/// half its weight and means `μ ± ε·σ`.
pub fn split_mixtures<T: Real>(gmm: &GmmEmission<T>, epsilon: T) -> GmmEmission<T> {
    let half = T::lit(0.5);
    let mut weights = Vec::with_capacity(gmm.n_components() * 2);
    let mut comps = Vec::with_capacity(gmm.n_components() * 2);
    for (w, c) in gmm.weights().iter().zip(gmm.components()) {
        let (lo, hi) = perturbed_pair(c, epsilon);
        weights.extend([*w * half, *w * half]);
        comps.extend([lo, hi]);
    }
    GmmEmission::new(weights, comps).expect("split preserves normalization")
}
