mod common;

use aaelex::corpus::{synth_corpus, FeatureMatrix, SynthSpec};
use aaelex::hmm::{collapse, free_loop_viterbi, Emissions, Scorer};
use aaelex::mlp::{
    gradient_check, mlp_forward, mlp_train, objective, read_checkpoint, scaled_loglik, write_checkpoint,
    ForwardMode, HybridScorer, LabeledFrameSet, MlpModel, TrainConfig,
};
use common::*;
use rand::Rng;

fn random_set(r: &mut impl Rng, n: usize, dim: usize, states: usize) -> LabeledFrameSet<f64> {
    let inputs = (0..n).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let labels = (0..n).map(|_| r.random_range(0..states)).collect();
    LabeledFrameSet::from_stacked(inputs, labels, states).unwrap()
}

#[test]
fn posteriors_are_normalized() {
    let mut r = rng(50);
    let net = MlpModel::<f64>::new(3, 2, &[16, 8], 6, 1).unwrap();
    for i in 0..1000 {
        let x: Vec<f64> = (0..net.input_dim()).map(|_| r.random_range(-5.0..5.0)).collect();
        let mode = if i % 2 == 0 { ForwardMode::Eval } else { ForwardMode::Train { dropout: 0.5, seed: i } };
        let p = mlp_forward(&net, &x, mode).unwrap();
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() <= 1e-10, "{s}");
        assert!(p.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn eval_forward_is_deterministic() {
    let mut r = rng(51);
    let net = MlpModel::<f64>::new(2, 1, &[8], 3, 9).unwrap();
    let x: Vec<f64> = (0..net.input_dim()).map(|_| r.random_range(-1.0..1.0)).collect();
    assert_eq!(
        mlp_forward(&net, &x, ForwardMode::Eval).unwrap(),
        mlp_forward(&net, &x, ForwardMode::Eval).unwrap()
    );
}

#[test]
fn l1_term_at_the_shared_starting_point() {
    let mut r = rng(52);
    let data = random_set(&mut r, 64, 6, 4);
    let net = MlpModel::<f64>::new(6, 0, &[12, 12], 4, 3).unwrap();
    let rho = 1e-6;
    let plain = objective(&net, &data, 0.0).unwrap();
    let penalized = objective(&net, &data, rho).unwrap();
    let manual: f64 = net
        .layers()
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias))
        .map(|w| w.abs())
        .sum();
    assert!(((penalized - plain) - rho * manual).abs() < 1e-12);
}

#[test]
fn finite_difference_gradients() {
    let mut r = rng(53);
    let data = random_set(&mut r, 40, 5, 3);
    let net = MlpModel::<f64>::new(5, 0, &[20, 16], 3, 4).unwrap();
    for rho in [0.0, 1e-6] {
        let g = gradient_check(&net, &data, rho, 300, 11).unwrap();
        assert!(g.checked >= 200, "only {} parameters checked", g.checked);
        assert!(g.max_relative_error <= 1e-4, "rho {rho}: {}", g.max_relative_error);
    }
}

#[test]
fn training_lowers_the_objective() {
    let mut r = rng(54);
    // labels follow the sign pattern of the first two inputs
    let inputs: Vec<Vec<f64>> = (0..400).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let labels = inputs.iter().map(|x| usize::from(x[0] > 0.0) * 2 + usize::from(x[1] > 0.0)).collect();
    let data = LabeledFrameSet::from_stacked(inputs, labels, 4).unwrap();
    let net = MlpModel::<f64>::new(4, 0, &[32], 4, 5).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        batch_size: 32,
        dropout: 0.0,
        epochs: 10,
        ..TrainConfig::default()
    };
    let before = objective(&net, &data, cfg.l1).unwrap();
    let trained = mlp_train(net, &data, &cfg).unwrap();
    let after = objective(&trained.model, &data, cfg.l1).unwrap();
    assert!(after < before, "{before} -> {after}");
    assert_eq!(trained.trace.len(), 10);
    assert!(trained.trace.last().unwrap().loss < trained.trace[0].loss);
}

#[test]
fn thread_count_does_not_change_training() {
    let mut r = rng(55);
    let data = random_set(&mut r, 300, 6, 5);
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 50,
        ..TrainConfig::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let net = MlpModel::<f64>::new(6, 0, &[16, 16], 5, 6).unwrap();
            mlp_train(net, &data, &cfg).unwrap()
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.model, four.model);
    assert_eq!(one.trace_csv(), four.trace_csv());
}

#[test]
fn single_precision_training_runs() {
    let mut r = rng(56);
    let inputs: Vec<Vec<f32>> = (0..200).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let labels = inputs.iter().map(|x| usize::from(x[0] + x[1] > 0.0)).collect();
    let data = LabeledFrameSet::from_stacked(inputs, labels, 2).unwrap();
    let net = MlpModel::<f32>::new(3, 0, &[8], 2, 7).unwrap();
    let cfg = TrainConfig { dropout: 0.0, epochs: 20, batch_size: 16, ..TrainConfig::default() };
    let trained = mlp_train(net, &data, &cfg).unwrap();
    assert!(trained.model.is_finite());
    assert!(aaelex::mlp::accuracy(&trained.model, &data).unwrap() > 0.9);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.ckpt");
    let mut r = rng(57);
    let mut net = MlpModel::<f64>::new(3, 1, &[7], 3, 8).unwrap();
    let frames = random_features(&mut r, 40, 3);
    net.fit_normalizer([&frames]);
    let priors = vec![0.25, 0.5, 0.25];
    write_checkpoint(&path, &net, &priors).unwrap();
    let (back, back_priors) = read_checkpoint::<f64>(&path).unwrap();
    assert_eq!(back, net);
    assert_eq!(back_priors, priors);
}

/// A network stand-in that returns near one-hot posteriors for the true
/// unit of each frame.
struct Oracle {
    labels: Vec<usize>,
    priors: Vec<f64>,
}

impl Scorer<f64> for Oracle {
    fn n_units(&self) -> usize {
        self.priors.len()
    }
    fn emissions(&self, f: &FeatureMatrix<f64>) -> aaelex::Result<Emissions<f64>> {
        let n = self.priors.len();
        let rows: Vec<Vec<f64>> = (0..f.n_frames())
            .map(|t| {
                let post: Vec<f64> = (0..n).map(|s| if s == self.labels[t] { 1.0 - 1e-6 } else { 1e-6 / (n - 1) as f64 }).collect();
                scaled_loglik(&post, &self.priors, 1e-8)
            })
            .collect();
        Emissions::from_fn(rows.len(), n, |t, s| rows[t][s])
    }
    fn stay_logprob(&self, _: usize) -> f64 {
        0.5f64.ln()
    }
    fn exit_logprob(&self, _: usize) -> f64 {
        0.5f64.ln()
    }
}

#[test]
fn oracle_posteriors_recover_the_unit_sequence() {
    let (corpus, gt) = synth_corpus::<f64>(&SynthSpec::default(), 58).unwrap();
    let mut counts = vec![1.0; gt.true_unit_count];
    for l in gt.frame_labels.values().flatten() {
        counts[*l] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let priors: Vec<f64> = counts.iter().map(|c| c / total).collect();
    for u in corpus.utterances().iter().take(50) {
        let labels = gt.frame_labels[&u.id].clone();
        let oracle = Oracle { labels: labels.clone(), priors: priors.clone() };
        let e = oracle.emissions(&u.features).unwrap();
        let (path, _) = free_loop_viterbi(&e, &oracle);
        assert_eq!(collapse(&path), gt.true_dictionary[&u.transcript[0]]);
        assert_eq!(path, labels);
    }
}

#[test]
fn hybrid_scorer_matches_scaled_posteriors() {
    let mut r = rng(59);
    let net = MlpModel::<f64>::new(2, 1, &[6], 3, 10).unwrap();
    let priors = vec![0.5, 0.3, 0.2];
    let stay = vec![0.7f64.ln(); 3];
    let exit = vec![0.3f64.ln(); 3];
    let scorer = HybridScorer::with_transitions(net.clone(), priors.clone(), 1e-8, stay, exit).unwrap();
    let f = random_features(&mut r, 5, 2);
    let e = scorer.emissions(&f).unwrap();
    for t in 0..5 {
        let post = mlp_forward(&net, &net.stack(&f, t), ForwardMode::Eval).unwrap();
        let want = scaled_loglik(&post, &priors, 1e-8);
        for s in 0..3 {
            assert!((e.get(t, s) - want[s]).abs() < 1e-12);
        }
    }
}
