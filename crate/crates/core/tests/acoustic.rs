mod common;

use aaelex::acoustic::{
    em_reestimate, format_models, lbg_cluster, parse_models, split_mixtures, DiagGaussian, GmmAccumulator, GmmEmission,
};
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Density evaluated directly in the linear domain, then logged.
fn naive_logpdf(gmm: &GmmEmission<f64>, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for (w, c) in gmm.weights().iter().zip(gmm.components()) {
        let mut p = *w;
        for ((xi, m), v) in x.iter().zip(c.mean()).zip(c.variance()) {
            p *= (-(xi - m) * (xi - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        }
        total += p;
    }
    total.ln()
}

fn random_gmm(r: &mut ChaCha8, comps: usize, dim: usize) -> GmmEmission<f64> {
    let raw: Vec<f64> = (0..comps).map(|_| r.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let cs = (0..comps)
        .map(|_| {
            DiagGaussian::new(
                (0..dim).map(|_| r.random_range(-3.0..3.0)).collect(),
                (0..dim).map(|_| r.random_range(0.3..2.0)).collect(),
            )
            .unwrap()
        })
        .collect();
    GmmEmission::new(raw.iter().map(|w| w / s).collect(), cs).unwrap()
}

type ChaCha8 = rand_chacha::ChaCha8Rng;

fn data_loglik(gmm: &GmmEmission<f64>, xs: &[Vec<f64>]) -> f64 {
    xs.iter().map(|x| gmm.logpdf(x).unwrap()).sum()
}

#[test]
fn logpdf_matches_direct_evaluation() {
    let mut r = rng(10);
    for _ in 0..500 {
        let comps = r.random_range(1..=4);
        let dim = r.random_range(1..=5);
        let gmm = random_gmm(&mut r, comps, dim);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-4.0..4.0)).collect();
        let got = gmm.logpdf(&x).unwrap();
        let want = naive_logpdf(&gmm, &x);
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn single_precision_tracks_double() {
    let mut r = rng(11);
    for _ in 0..100 {
        let gmm = random_gmm(&mut r, 3, 4);
        let g32 = GmmEmission::<f32>::new(
            gmm.weights().iter().map(|&w| w as f32).collect(),
            gmm.components()
                .iter()
                .map(|c| {
                    DiagGaussian::new(
                        c.mean().iter().map(|&m| m as f32).collect(),
                        c.variance().iter().map(|&v| v as f32).collect(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let a = gmm.logpdf(&x).unwrap();
        let b = g32.logpdf(&x32).unwrap() as f64;
        assert!((a - b).abs() < 1e-3 * a.abs().max(1.0));
    }
}

#[test]
fn em_never_lowers_the_likelihood() {
    let mut r = rng(12);
    let mut checked = 0;
    for _ in 0..100 {
        let dim = r.random_range(1..=3);
        let source = random_gmm(&mut r, 3, dim);
        let xs: Vec<Vec<f64>> = (0..80)
            .map(|_| {
                let k = r.random_range(0..3);
                let c = &source.components()[k];
                (0..dim)
                    .map(|d| c.mean()[d] + c.variance()[d].sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect()
            })
            .collect();
        let comps = r.random_range(1..=4);
        let mut gmm = random_gmm(&mut r, comps, dim);
        let floor = vec![1e-3; dim];
        let weighted: Vec<(f64, &[f64])> = xs.iter().map(|x| (1.0, x.as_slice())).collect();
        let mut prev = data_loglik(&gmm, &xs);
        for _ in 0..8 {
            let out = em_reestimate(&gmm, &weighted, &floor);
            let next = data_loglik(&out.gmm, &xs);
            if out.resets == 0 {
                assert!(next >= prev - 1e-9 * prev.abs(), "{prev} -> {next}");
                checked += 1;
            }
            gmm = out.gmm;
            prev = next;
        }
    }
    assert!(checked >= 700, "only {checked} steps without re-seeding");
}

#[test]
fn sharded_accumulation_is_order_insensitive() {
    let mut r = rng(13);
    let gmm = random_gmm(&mut r, 3, 2);
    let xs: Vec<Vec<f64>> = (0..300).map(|_| (0..2).map(|_| r.random_range(-4.0..4.0)).collect()).collect();
    let mut whole = GmmAccumulator::for_gmm(&gmm);
    for x in &xs {
        whole.add(&gmm, x, 1.0);
    }
    let mut shards: Vec<GmmAccumulator<f64>> = xs
        .chunks(37)
        .map(|c| {
            let mut a = GmmAccumulator::for_gmm(&gmm);
            for x in c {
                a.add(&gmm, x, 1.0);
            }
            a
        })
        .collect();
    shards.reverse();
    let mut merged = GmmAccumulator::for_gmm(&gmm);
    for s in &shards {
        merged.merge(s);
    }
    let floor = [1e-3, 1e-3];
    let a = whole.finalize(&gmm, &floor, 0.2).gmm;
    let b = merged.finalize(&gmm, &floor, 0.2).gmm;
    for (ca, cb) in a.components().iter().zip(b.components()) {
        for (x, y) in ca.mean().iter().zip(cb.mean()).chain(ca.variance().iter().zip(cb.variance())) {
            assert!((x - y).abs() < 1e-9);
        }
    }
    assert!((whole.loglik() - merged.loglik()).abs() < 1e-9 * whole.loglik().abs());
}

#[test]
fn lbg_is_deterministic_per_seed() {
    let mut r = rng(14);
    let f = random_features(&mut r, 200, 3);
    let a = lbg_cluster(&f, 6, 7).unwrap();
    let b = lbg_cluster(&f, 6, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.centroids.len(), 6);
    assert_eq!(a.occupancy.iter().sum::<usize>(), 200);
}

#[test]
fn model_text_round_trips_exactly() {
    let mut r = rng(15);
    for _ in 0..20 {
        let models = random_mixture_models(&mut r, 5, 3, 3);
        let text = format_models(&models);
        let back = parse_models::<f64>(&text, "m").unwrap();
        assert_eq!(back, models);
        assert_eq!(format_models(&back), text);
    }
}

fn gmm_strategy() -> impl Strategy<Value = (GmmEmission<f64>, Vec<f64>, Vec<usize>)> {
    (1usize..=5, 1usize..=4, any::<u64>()).prop_flat_map(|(k, dim, seed)| {
        let mut r = rng(seed);
        let gmm = random_gmm(&mut r, k, dim);
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-5.0..5.0)).collect();
        (Just(gmm), Just(x), Just((0..k).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn invariants_hold(g: &GmmEmission<f64>, floor: &[f64]) -> bool {
    let s: f64 = g.weights().iter().sum();
    (s - 1.0).abs() < 1e-9
        && g.weights().iter().all(|&w| w >= 0.0)
        && g.components().iter().all(|c| c.variance().iter().zip(floor).all(|(v, f)| v >= f))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn logpdf_ignores_component_order((gmm, x, perm) in gmm_strategy()) {
        let permuted = GmmEmission::new(
            perm.iter().map(|&i| gmm.weights()[i]).collect(),
            perm.iter().map(|&i| gmm.components()[i].clone()).collect(),
        ).unwrap();
        let a = gmm.logpdf(&x).unwrap();
        let b = permuted.logpdf(&x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn em_and_split_keep_mixtures_valid(seed in any::<u64>(), ops in proptest::collection::vec(any::<bool>(), 1..6)) {
        let mut r = rng(seed);
        let dim = 2;
        let floor = vec![0.05; dim];
        let mut g = random_gmm(&mut r, 1, dim);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let weighted: Vec<(f64, &[f64])> = xs.iter().map(|x| (1.0, x.as_slice())).collect();
        for split in ops {
            g = if split && g.n_components() < 8 { split_mixtures(&g, 0.2) } else { em_reestimate(&g, &weighted, &floor).gmm };
            let s: f64 = g.weights().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
        let g = em_reestimate(&g, &weighted, &floor).gmm;
        prop_assert!(invariants_hold(&g, &floor));
    }
}

