//! Linde-Buzo-Gray codebook design with squared-error distortion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::FeatureMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct LbgConfig {
    /// Split perturbation in per-dimension standard deviations of the cluster.
    pub split_epsilon: f64,
    /// k-means stops when the relative distortion change drops below this.
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LbgConfig {
    fn default() -> Self {
        Self {
            split_epsilon: 0.2,
            rel_tolerance: 1e-6,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbgOutcome<T> {
    pub centroids: Vec<Vec<T>>,
    /// Nearest centroid of every input frame.
    pub assignments: Vec<usize>,
    pub occupancy: Vec<usize>,
    /// Mean squared error after each k-means iteration, one list per round
    /// (the initial single-centroid round, each split round, and a final
    /// round after merging when the target is not a power of two).
    pub distortion_trace: Vec<Vec<T>>,
}

impl<T: Real> LbgOutcome<T> {
    /// Converged distortion of every round.
    pub fn round_distortions(&self) -> Vec<T> {
        self.distortion_trace.iter().filter_map(|r| r.last().copied()).collect()
    }
}

pub fn lbg_cluster<T: Real>(frames: &FeatureMatrix<T>, target_n: usize, seed: u64) -> Result<LbgOutcome<T>> {
    lbg_cluster_with(frames, target_n, seed, &LbgConfig::default())
}

/// Clusters `frames` into `target_n` centroids by repeated binary splitting
/// and k-means refinement.
///
/// Targets that are not powers of two are reached by splitting to the next
/// power of two and then merging the least-occupied cluster into its nearest
/// neighbour until `target_n` remain, followed by one more refinement.
pub fn lbg_cluster_with<T: Real>(
    frames: &FeatureMatrix<T>,
    target_n: usize,
    seed: u64,
    cfg: &LbgConfig,
) -> Result<LbgOutcome<T>> {
    let n = frames.n_frames();
    if target_n == 0 {
        return Err(Error::InvalidArgument("LBG target must be at least 1".into()));
    }
    if target_n > n {
        return Err(Error::InvalidArgument(format!(
            "LBG target {target_n} exceeds the {n} available frames"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut km = KMeans {
        frames,
        assignments: vec![0; n],
        cfg,
    };
    let mut centroids = vec![mean_of(frames, (0..n).collect::<Vec<_>>().as_slice())];
    let mut trace = vec![km.refine(&mut centroids, &mut rng)];

    let eps = T::lit(cfg.split_epsilon);
    while centroids.len() < target_n {
        let mut next = Vec::with_capacity(centroids.len() * 2);
        for (c, centroid) in centroids.iter().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| km.assignments[i] == c).collect();
            let std = std_of(frames, &members, centroid);
            next.push(centroid.iter().zip(&std).map(|(&m, &s)| m - eps * s).collect());
            next.push(centroid.iter().zip(&std).map(|(&m, &s)| m + eps * s).collect());
        }
        centroids = next;
        trace.push(km.refine(&mut centroids, &mut rng));
    }

    if centroids.len() > target_n {
        let mut occupancy = km.occupancy(centroids.len());
        while centroids.len() > target_n {
            let smallest = (0..centroids.len())
                .min_by_key(|&c| occupancy[c])
                .expect("nonempty");
            let nearest = (0..centroids.len())
                .filter(|&c| c != smallest)
                .min_by(|&a, &b| {
                    sq_dist(&centroids[a], &centroids[smallest])
                        .partial_cmp(&sq_dist(&centroids[b], &centroids[smallest]))
                        .expect("finite distances")
                })
                .expect("at least two centroids");
            let (na, nb) = (occupancy[smallest], occupancy[nearest]);
            let total = (na + nb).max(1);
            let wa = T::lit(na as f64 / total as f64);
            let wb = T::lit(if na + nb == 0 { 1.0 } else { nb as f64 / total as f64 });
            let merged: Vec<T> = centroids[smallest]
                .iter()
                .zip(&centroids[nearest])
                .map(|(&a, &b)| a * wa + b * wb)
                .collect();
            centroids[nearest] = merged;
            occupancy[nearest] = na + nb;
            centroids.remove(smallest);
            occupancy.remove(smallest);
        }
        trace.push(km.refine(&mut centroids, &mut rng));
    }

    let occupancy = km.occupancy(centroids.len());
    Ok(LbgOutcome {
        centroids,
        assignments: km.assignments,
        occupancy,
        distortion_trace: trace,
    })
}

/// Clusters into `target_n * factor` cells with [`lbg_cluster_with`], then
/// repeatedly merges the pair of cells whose union raises the total squared
/// error least (Ward's criterion) until `target_n` remain, and refines.
///
/// Plain splitting can settle with two centroids inside one dense cloud and
/// one centroid straddling two others; clustering finer first and merging
/// back avoids most of those configurations. `factor = 1` is plain LBG.
pub fn lbg_cluster_oversplit<T: Real>(
    frames: &FeatureMatrix<T>,
    target_n: usize,
    factor: usize,
    seed: u64,
    cfg: &LbgConfig,
) -> Result<LbgOutcome<T>> {
    let fine = (target_n * factor.max(1)).min(frames.n_frames());
    let mut out = lbg_cluster_with(frames, fine, seed, cfg)?;
    if out.centroids.len() <= target_n {
        return Ok(out);
    }
    let mut centroids = out.centroids;
    let mut occupancy = out.occupancy;
    while centroids.len() > target_n {
        let mut best: Option<(usize, usize, T)> = None;
        for a in 0..centroids.len() {
            for b in a + 1..centroids.len() {
                let (na, nb) = (occupancy[a] as f64, occupancy[b] as f64);
                let w = if na + nb > 0.0 { na * nb / (na + nb) } else { 0.0 };
                let cost = T::lit(w) * sq_dist(&centroids[a], &centroids[b]);
                if best.is_none_or(|(_, _, c)| cost < c) {
                    best = Some((a, b, cost));
                }
            }
        }
        let (a, b, _) = best.expect("at least two cells");
        let (na, nb) = (occupancy[a], occupancy[b]);
        let total = (na + nb).max(1) as f64;
        let (wa, wb) = if na + nb == 0 {
            (T::lit(0.5), T::lit(0.5))
        } else {
            (T::lit(na as f64 / total), T::lit(nb as f64 / total))
        };
        centroids[a] = centroids[a]
            .iter()
            .zip(&centroids[b])
            .map(|(&x, &y)| x * wa + y * wb)
            .collect();
        occupancy[a] = na + nb;
        centroids.remove(b);
        occupancy.remove(b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3a3d);
    let mut km = KMeans {
        frames,
        assignments: out.assignments,
        cfg,
    };
    out.distortion_trace.push(km.refine(&mut centroids, &mut rng));
    Ok(LbgOutcome {
        occupancy: km.occupancy(centroids.len()),
        centroids,
        assignments: km.assignments,
        distortion_trace: out.distortion_trace,
    })
}

struct KMeans<'a, T> {
    frames: &'a FeatureMatrix<T>,
    assignments: Vec<usize>,
    cfg: &'a LbgConfig,
}

impl<T: Real> KMeans<'_, T> {
    /// Lloyd iterations until the relative distortion change is small.
    /// Returns the distortion after each assignment step.
    fn refine(&mut self, centroids: &mut [Vec<T>], rng: &mut ChaCha8Rng) -> Vec<T> {
        let n = self.frames.n_frames();
        let k = centroids.len();
        let dim = self.frames.dim();
        let mut trace = Vec::new();
        let mut errors = vec![T::zero(); n];
        for _ in 0..self.cfg.max_iterations.max(1) {
            let mut total = T::zero();
            for (i, frame) in self.frames.frames().enumerate() {
                let (best, d) = nearest(centroids, frame);
                self.assignments[i] = best;
                errors[i] = d;
                total = total + d;
            }
            let distortion = total / T::lit(n as f64);
            let converged = trace.last().is_some_and(|&prev: &T| {
                prev <= T::zero() || (prev - distortion) / prev < T::lit(self.cfg.rel_tolerance)
            });
            trace.push(distortion);
            if converged {
                break;
            }

            let mut sums = vec![vec![T::zero(); dim]; k];
            let mut counts = vec![0usize; k];
            for (i, frame) in self.frames.frames().enumerate() {
                let c = self.assignments[i];
                counts[c] += 1;
                for (s, &x) in sums[c].iter_mut().zip(frame) {
                    *s = *s + x;
                }
            }
            for c in 0..k {
                if counts[c] > 0 {
                    let cnt = T::lit(counts[c] as f64);
                    centroids[c] = sums[c].iter().map(|&s| s / cnt).collect();
                } else {
                    // Empty cell: move the centroid onto a frame that currently has
                    // nonzero error, which cannot increase the distortion.
                    let candidates: Vec<usize> = (0..n).filter(|&i| errors[i] > T::zero()).collect();
                    if !candidates.is_empty() {
                        let pick = candidates[rng.random_range(0..candidates.len())];
                        centroids[c] = self.frames.frame(pick).to_vec();
                        errors[pick] = T::zero();
                    }
                }
            }
        }
        trace
    }

    fn occupancy(&self, k: usize) -> Vec<usize> {
        let mut occ = vec![0; k];
        for &a in &self.assignments {
            occ[a] += 1;
        }
        occ
    }
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Real>(centroids: &[Vec<T>], x: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn mean_of<T: Real>(frames: &FeatureMatrix<T>, members: &[usize]) -> Vec<T> {
    let mut m = vec![T::zero(); frames.dim()];
    for &i in members {
        for (a, &x) in m.iter_mut().zip(frames.frame(i)) {
            *a = *a + x;
        }
    }
    let cnt = T::lit(members.len().max(1) as f64);
    m.into_iter().map(|a| a / cnt).collect()
}

fn std_of<T: Real>(frames: &FeatureMatrix<T>, members: &[usize], centre: &[T]) -> Vec<T> {
    let mut v = vec![T::zero(); frames.dim()];
    for &i in members {
        for ((a, &x), &c) in v.iter_mut().zip(frames.frame(i)).zip(centre) {
            *a = *a + (x - c) * (x - c);
        }
    }
    let cnt = T::lit(members.len().max(1) as f64);
    let std: Vec<T> = v.into_iter().map(|a| (a / cnt).sqrt()).collect();
    if std.iter().all(|s| *s == T::zero()) {
        // degenerate cell: fall back to a unit perturbation
        vec![T::one(); frames.dim()]
    } else {
        std
    }
}
