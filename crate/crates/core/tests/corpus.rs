mod common;

use std::path::Path;

use aaelex::corpus::{compute_deltas, load_corpus, synth_corpus, FeatureMatrix, SynthSpec};
use aaelex::{Error, ErrorKind};
use common::*;
use proptest::prelude::*;

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn loads_two_utterances_of_one_word() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.feat", "# two frames\n1 2\n3 4\n");
    write(dir.path(), "b.feat", "5 6\n");
    write(dir.path(), "list.scp", "u1 a.feat\nu2 b.feat\n");
    write(dir.path(), "list.trn", "u1\tcat\nu2\tCat\n");
    let c = load_corpus::<f64>(&dir.path().join("list.scp"), &dir.path().join("list.trn")).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.vocabulary(), &["CAT".to_string()]);
    assert_eq!(c.utterances_of("CAT"), &[0, 1]);
    assert_eq!(c.dim(), 2);
    assert_eq!(c.total_frames(), 3);
}

#[test]
fn missing_transcript_names_the_id() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.feat", "1 2\n");
    write(dir.path(), "list.scp", "u1 a.feat\nu3 a.feat\n");
    write(dir.path(), "list.trn", "u1\tcat\n");
    let err = load_corpus::<f64>(&dir.path().join("list.scp"), &dir.path().join("list.trn")).unwrap_err();
    assert!(matches!(&err, Error::MissingTranscript(id) if id == "u3"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn mixed_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.feat", &format!("{}\n", vec!["0"; 13].join(" ")));
    write(dir.path(), "b.feat", &format!("{}\n", vec!["0"; 39].join(" ")));
    write(dir.path(), "list.scp", "u1 a.feat\nu2 b.feat\n");
    write(dir.path(), "list.trn", "u1\tcat\nu2\tdog\n");
    let err = load_corpus::<f64>(&dir.path().join("list.scp"), &dir.path().join("list.trn")).unwrap_err();
    assert!(
        matches!(err, Error::DimensionMismatch { expected: 13, found: 39, .. }),
        "{err}"
    );
}

#[test]
fn empty_transcript_and_unreadable_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.feat", "1\n");
    write(dir.path(), "list.scp", "u1 a.feat\n");
    write(dir.path(), "empty.trn", "u1\t\n");
    let err = load_corpus::<f64>(&dir.path().join("list.scp"), &dir.path().join("empty.trn")).unwrap_err();
    assert!(matches!(&err, Error::EmptyTranscript(id) if id == "u1"), "{err}");

    write(dir.path(), "gone.scp", "u1 missing.feat\n");
    write(dir.path(), "ok.trn", "u1\tcat\n");
    let err = load_corpus::<f64>(&dir.path().join("gone.scp"), &dir.path().join("ok.trn")).unwrap_err();
    assert!(err.to_string().contains("u1"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn synthetic_counts_and_word_index() {
    let (c, gt) = synth_corpus::<f64>(&SynthSpec::default(), 60).unwrap();
    assert_eq!(c.len(), 400);
    assert_eq!(c.vocabulary().len(), 20);
    for w in c.vocabulary() {
        let idx = c.utterances_of(w);
        assert_eq!(idx.len(), 20);
        assert!(idx.iter().all(|&i| c.utterances()[i].transcript.contains(w)));
        assert!(!gt.true_dictionary[w].is_empty());
    }
    assert!(c.utterances_of("NOT-A-WORD").is_empty());
}

#[test]
fn first_unit_frames_sit_near_their_mean() {
    let spec = SynthSpec {
        frames_per_unit: (3, 3),
        utterances_per_word: 30,
        ..SynthSpec::default()
    };
    let (c, gt) = synth_corpus::<f64>(&spec, 61).unwrap();
    let word = &c.vocabulary()[0];
    let first = gt.true_dictionary[word][0];
    let dim = c.dim();
    let mut mean = vec![0.0; dim];
    let mut n = 0.0;
    for &i in c.utterances_of(word) {
        let u = &c.utterances()[i];
        assert_eq!(u.features.n_frames(), 3 * gt.true_dictionary[word].len());
        for t in 0..3 {
            for (m, x) in mean.iter_mut().zip(u.features.frame(t)) {
                *m += x;
            }
            n += 1.0;
        }
    }
    // 90 draws of unit-variance noise: the sample mean is within 0.5 per dimension
    for (m, want) in mean.iter().zip(&gt.unit_means[first]) {
        assert!((m / n - want).abs() < 0.5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deltas_triple_the_dimension(seed in any::<u64>(), frames in 1usize..20, dim in 1usize..6, window in 1usize..4) {
        let mut r = rng(seed);
        let f = random_features(&mut r, frames, dim);
        let d = compute_deltas(&f, window).unwrap();
        prop_assert_eq!(d.n_frames(), frames);
        prop_assert_eq!(d.dim(), 3 * dim);
        for t in 0..frames {
            prop_assert_eq!(&d.frame(t)[..dim], f.frame(t));
        }
    }

    #[test]
    fn synthesis_is_a_function_of_spec_and_seed(seed in 0u64..1000) {
        let spec = SynthSpec { n_words: 4, utterances_per_word: 3, ..SynthSpec::default() };
        let a = synth_corpus::<f64>(&spec, seed).unwrap();
        let b = synth_corpus::<f64>(&spec, seed).unwrap();
        prop_assert_eq!(a.0, b.0);
        prop_assert_eq!(a.1, b.1);
    }
}

#[test]
fn constant_signal_has_flat_deltas() {
    let f = FeatureMatrix::from_rows(&vec![[2.5, -1.0]; 7]).unwrap();
    let d = compute_deltas(&f, 2).unwrap();
    for t in 0..7 {
        assert!(d.frame(t)[2..].iter().all(|&v| v == 0.0));
    }
}
