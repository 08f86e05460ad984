use std::path::Path;
use std::process::{Command, Output};

fn aaelex(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aaelex"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&aaelex(dir.path(), &["no-such-command"])), 1);
    assert_eq!(code(&aaelex(dir.path(), &["align"])), 1);
    // a corpus must be named somewhere
    assert_eq!(code(&aaelex(dir.path(), &["init"])), 1);
}

#[test]
fn missing_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = aaelex(dir.path(), &["init", "--scp", "nowhere.scp", "--trn", "nowhere.trn"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.scp"));
}

#[test]
fn synth_train_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = aaelex(d, &["synth", "--words", "4", "--units", "4", "--utterances", "8", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["train.scp", "train.trn", "test.scp", "test.trn", "truth.txt", "synth.ini"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let ini = d.join("synth.ini");
    let mut text = std::fs::read_to_string(&ini).unwrap();
    text.push_str("max_gmm_iterations = 3\nmax_mixtures = 2\n");
    std::fs::write(&ini, text).unwrap();
    let ini = ini.to_str().unwrap();

    let out = aaelex(d, &["init", "--config", ini]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("models_init.txt").is_file() && d.join("dict_init.txt").is_file());

    let out = aaelex(d, &["train-gmm", "--config", ini]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let reports = std::fs::read_to_string(d.join("gmm_reports.csv")).unwrap();
    assert!(reports.starts_with("iteration,stage"));
    assert!(reports.lines().count() >= 2);

    let models = d.join("gmm_models.txt");
    let dict = d.join("dict.txt");
    let (models, dict) = (models.to_str().unwrap(), dict.to_str().unwrap());
    let out = aaelex(d, &["eval", "--config", ini, "--models", models, "--dict", dict]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("WER "));
    assert!(d.join("hyp.txt").is_file() && d.join("wer.txt").is_file());

    let out = aaelex(d, &["report", d.join("gmm_reports.csv").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(d.join("summary.txt")).unwrap().contains("best gmm"));
}
