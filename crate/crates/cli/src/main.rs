use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use aaelex::acoustic::{read_models, write_models, AcousticModelSet};
use aaelex::corpus::{load_corpus, load_feature_list, write_features, write_scp, write_transcripts, Corpus, SynthSpec, SyntheticGroundTruth};
use aaelex::decoder::{load_arpa_bigram, BigramLm, WerReport};
use aaelex::hmm::{Dictionary, Scorer};
use aaelex::mlp::{read_checkpoint, write_checkpoint, HybridScorer};
use aaelex::pipeline::{
    align_labels, derive_seed, evaluate, initialize, parse_reports_csv, reports_to_csv, run_gmm_stage, run_mlp_stage,
    split_dev, summary_text, wer_vs_n_table, DecodeMode, DecodeSettings, PipelineConfig, SystemScorer,
};
use aaelex::pronunciation::{format_estimation_report, update_dictionary, Segmentation, UpdateConfig};
use aaelex::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "aaelex", version, about = "Learn sub-word units and a pronunciation dictionary from transcribed features")]
struct Cli {
    /// ini-style `key = value` settings file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for all written artifacts
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known units and pronunciations
    Synth(SynthArgs),
    /// Cluster frames into initial units and estimate a first dictionary
    Init(CorpusArgs),
    /// Run the GMM loop (dictionary update, mixture doubling, training)
    TrainGmm(TrainArgs),
    /// Run the network loop on top of trained GMM units
    TrainMlp(TrainArgs),
    /// Re-estimate every word's pronunciation once
    UpdateDict(SystemArgs),
    /// Force-align transcripts and write per-frame unit labels
    Align(SystemArgs),
    /// Recognize utterances and write hypotheses
    Decode(DecodeArgs),
    /// Recognize utterances and score them against their transcripts
    Eval(DecodeArgs),
    /// Render iteration reports as CSV and a text summary
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    words: usize,
    #[arg(long, default_value_t = 8)]
    units: usize,
    #[arg(long, default_value_t = 20)]
    utterances: usize,
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Minimum distance between unit means in noise deviations
    #[arg(long, default_value_t = 6.0)]
    separation: f64,
    /// Maximum words per utterance
    #[arg(long, default_value_t = 1)]
    max_words: usize,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    scp: Option<PathBuf>,
    #[arg(long)]
    trn: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Starting models (default: run initialization)
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    dict: Option<PathBuf>,
    /// Keep the dictionary fixed
    #[arg(long)]
    freeze_dict: bool,
}

#[derive(Args)]
struct SystemArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Network checkpoint; scores with the hybrid model when given
    #[arg(long)]
    mlp: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Isolated,
    Continuous,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// ARPA bigram for continuous decoding
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    lm_weight: Option<f64>,
    #[arg(long)]
    insertion_penalty: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report CSV files, optionally as `N=path` to tabulate WER against N
    #[arg(required = true)]
    reports: Vec<String>,
}

/// Failures outside the library (usage problems in argument combinations).
fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

struct Ctx {
    cfg: PipelineConfig,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&self, name: &str, text: &str) -> aaelex::Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| io_error(&p, e))?;
        log::info!("wrote {}", p.display());
        Ok(p)
    }

    fn corpus(&self, args: &CorpusArgs) -> aaelex::Result<Corpus<f64>> {
        let scp = args.scp.clone().or_else(|| self.cfg.paths.train_scp.clone());
        let trn = args.trn.clone().or_else(|| self.cfg.paths.train_trn.clone());
        match (scp, trn) {
            (Some(s), Some(t)) => load_corpus(&s, &t),
            _ => Err(usage("a corpus needs --scp and --trn (or train_scp/train_trn in the config)")),
        }
    }

    fn eval_corpus(&self, args: &CorpusArgs) -> Option<(PathBuf, Option<PathBuf>)> {
        let scp = args.scp.clone().or_else(|| self.cfg.paths.test_scp.clone())?;
        let trn = args.trn.clone().or_else(|| self.cfg.paths.test_trn.clone());
        Some((scp, trn))
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn run(cli: Cli) -> aaelex::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::default().load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    std::fs::create_dir_all(&cli.out_dir).map_err(|e| io_error(&cli.out_dir, e))?;
    let ctx = Ctx { cfg, out: cli.out_dir };
    match cli.command {
        Command::Synth(a) => synth(&ctx, &a),
        Command::Init(a) => init(&ctx, &a),
        Command::TrainGmm(a) => train_gmm(&ctx, &a),
        Command::TrainMlp(a) => train_mlp(&ctx, &a),
        Command::UpdateDict(a) => update_dict(&ctx, &a),
        Command::Align(a) => align(&ctx, &a),
        Command::Decode(a) => decode(&ctx, &a, false),
        Command::Eval(a) => decode(&ctx, &a, true),
        Command::Report(a) => report(&ctx, &a),
    }
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> aaelex::Result<()> {
    let spec = SynthSpec {
        n_words: a.words,
        n_units: a.units,
        utterances_per_word: a.utterances,
        dim: a.dim,
        separation: a.separation,
        words_per_utterance: (1, a.max_words.max(1)),
        ..SynthSpec::default()
    };
    let seed = ctx.cfg.seed;
    let gt = SyntheticGroundTruth::generate(&spec, seed)?;
    let feats = ctx.path("feats");
    std::fs::create_dir_all(&feats).map_err(|e| io_error(&feats, e))?;
    for (name, stream) in [("train", 1), ("test", 2)] {
        let (corpus, _) = gt.sample_corpus::<f64>(&spec, derive_seed(seed, stream), &format!("{name}_"))?;
        let mut entries = Vec::new();
        for u in corpus.utterances() {
            let rel = PathBuf::from("feats").join(format!("{}.feat", u.id));
            write_features(&ctx.path(&rel.to_string_lossy()), &u.features)?;
            entries.push((u.id.clone(), rel));
        }
        write_scp(
            &ctx.path(&format!("{name}.scp")),
            entries.iter().map(|(id, p)| (id.as_str(), p.as_path())),
        )?;
        write_transcripts(&ctx.path(&format!("{name}.trn")), &corpus)?;
    }
    ctx.write("truth.txt", &gt.to_text())?;
    let mut ini = PipelineConfig::synthetic();
    ini.n_aae = a.units;
    ini.seed = seed;
    let text = format!(
        "{}train_scp = train.scp\ntrain_trn = train.trn\ntest_scp = test.scp\ntest_trn = test.trn\n",
        ini.to_ini()
    );
    ctx.write("synth.ini", &text)?;
    Ok(())
}

fn init(ctx: &Ctx, a: &CorpusArgs) -> aaelex::Result<()> {
    let corpus = ctx.corpus(a)?;
    let (models, dict) = initialize(&corpus, &ctx.cfg)?;
    write_models(&ctx.path("models_init.txt"), &models)?;
    dict.write(&ctx.path("dict_init.txt"))?;
    log::info!("initialized {} units, {} words", models.n_units(), dict.len());
    Ok(())
}

fn starting_point(ctx: &Ctx, a: &TrainArgs, train: &Corpus<f64>) -> aaelex::Result<(AcousticModelSet<f64>, Dictionary)> {
    let dict_path = a.dict.clone().or_else(|| ctx.cfg.paths.dictionary.clone());
    match (&a.models, dict_path) {
        (Some(m), Some(d)) => Ok((read_models(m)?, Dictionary::read(&d)?)),
        (None, d) => {
            let (models, est) = initialize(train, &ctx.cfg)?;
            let dict = match d {
                Some(p) => Dictionary::read(&p)?,
                None => est,
            };
            Ok((models, dict))
        }
        (Some(_), None) => Err(usage("--models needs --dict")),
    }
}

fn split(ctx: &Ctx, corpus: &Corpus<f64>) -> aaelex::Result<(Corpus<f64>, Corpus<f64>)> {
    let s = split_dev(corpus, ctx.cfg.dev_fraction, derive_seed(ctx.cfg.seed, 1));
    let train = corpus.subset(&s.train)?;
    let dev = if s.dev.is_empty() { train.clone() } else { corpus.subset(&s.dev)? };
    let ids: String = dev.utterances().iter().map(|u| format!("{}\n", u.id)).collect();
    ctx.write("dev_ids.txt", &ids)?;
    Ok((train, dev))
}

fn load_lm(ctx: &Ctx, explicit: Option<&PathBuf>) -> aaelex::Result<Option<BigramLm>> {
    explicit
        .or(ctx.cfg.paths.lm.as_ref())
        .map(|p| load_arpa_bigram(p))
        .transpose()
}

fn train_gmm(ctx: &Ctx, a: &TrainArgs) -> aaelex::Result<()> {
    let mut cfg = ctx.cfg.clone();
    cfg.freeze_dictionary |= a.freeze_dict;
    let corpus = ctx.corpus(&a.corpus)?;
    let (train, dev) = split(ctx, &corpus)?;
    let (models, dict) = starting_point(ctx, a, &train)?;
    let lm = load_lm(ctx, None)?;
    let stage = run_gmm_stage(&train, &dev, models, dict, &cfg, lm.as_ref())?;
    write_models(&ctx.path("gmm_models.txt"), &stage.models)?;
    stage.dictionary.write(&ctx.path("dict.txt"))?;
    ctx.write("gmm_reports.csv", &reports_to_csv(&stage.reports))?;
    log::info!("best GMM iteration {}", stage.best_iteration);
    Ok(())
}

fn train_mlp(ctx: &Ctx, a: &TrainArgs) -> aaelex::Result<()> {
    let mut cfg = ctx.cfg.clone();
    cfg.freeze_dictionary |= a.freeze_dict;
    let corpus = ctx.corpus(&a.corpus)?;
    let (train, dev) = split(ctx, &corpus)?;
    let models = read_models(a.models.as_ref().ok_or_else(|| usage("train-mlp needs --models"))?)?;
    let dict_path = a.dict.clone().or_else(|| cfg.paths.dictionary.clone()).ok_or_else(|| usage("train-mlp needs --dict"))?;
    let dict = Dictionary::read(&dict_path)?;
    let lm = load_lm(ctx, None)?;
    let stage = run_mlp_stage(&train, &dev, &models, dict, &cfg, lm.as_ref())?;
    write_checkpoint(&ctx.path("mlp.ckpt"), stage.scorer.model(), stage.scorer.priors())?;
    stage.dictionary.write(&ctx.path("dict_mlp.txt"))?;
    ctx.write("mlp_reports.csv", &reports_to_csv(&stage.reports))?;
    for (i, t) in stage.traces.iter().enumerate() {
        ctx.write(&format!("mlp_trace_{i}.csv"), t)?;
    }
    if stage.diverged {
        log::warn!("training diverged; kept the last good network");
    }
    Ok(())
}

fn system(ctx: &Ctx, a: &SystemArgs) -> aaelex::Result<(SystemScorer<f64>, Dictionary)> {
    let models = read_models(&a.models)?;
    let dict = Dictionary::read(&a.dict)?;
    dict.validate(models.n_units())?;
    let scorer = match &a.mlp {
        Some(p) => {
            let (net, priors) = read_checkpoint(p)?;
            SystemScorer::Hybrid(HybridScorer::new(net, priors, ctx.cfg.prior_floor, &models)?)
        }
        None => SystemScorer::Gmm(models),
    };
    Ok((scorer, dict))
}

fn update_dict(ctx: &Ctx, a: &SystemArgs) -> aaelex::Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let (scorer, dict) = system(ctx, a)?;
    let cfg = UpdateConfig {
        min_examples: ctx.cfg.min_examples,
        max_units: ctx.cfg.max_units,
        order: ctx.cfg.merge_order,
        segmentation: Segmentation::ForcedAlignment,
    };
    let up = update_dictionary(&corpus, &scorer, &dict, &cfg)?;
    up.dictionary.write(&ctx.path("dict_updated.txt"))?;
    ctx.write("estimation_report.tsv", &format_estimation_report(&up.report))?;
    log::info!("{} pronunciations changed", up.dictionary.changes_from(&dict));
    Ok(())
}

fn align(ctx: &Ctx, a: &SystemArgs) -> aaelex::Result<()> {
    let corpus = ctx.corpus(&a.corpus)?;
    let (scorer, dict) = system(ctx, a)?;
    let labels = align_labels(&corpus, &dict, &scorer)?;
    let mut out = String::new();
    for (u, l) in corpus.utterances().iter().zip(labels) {
        match l {
            Some((lab, ll)) => {
                let units: Vec<String> = lab.iter().map(|x| format!("a{x}")).collect();
                out.push_str(&format!("{}\t{}\t{}\n", u.id, ll, units.join(" ")));
            }
            None => log::warn!("{}: no alignment", u.id),
        }
    }
    ctx.write("alignments.txt", &out)?;
    Ok(())
}

fn decode(ctx: &Ctx, a: &DecodeArgs, score: bool) -> aaelex::Result<()> {
    let mut cfg = ctx.cfg.clone();
    if let Some(m) = a.mode {
        cfg.decode_mode = match m {
            Mode::Isolated => DecodeMode::Isolated,
            Mode::Continuous => DecodeMode::Continuous,
        };
    }
    if let Some(w) = a.lm_weight {
        cfg.lm_weight = w;
    }
    if let Some(p) = a.insertion_penalty {
        cfg.insertion_penalty = p;
    }
    let (scp, trn) = ctx
        .eval_corpus(&a.system.corpus)
        .ok_or_else(|| usage("decoding needs --scp (or test_scp in the config)"))?;
    let (scorer, dict) = system(ctx, &a.system)?;
    let lm = load_lm(ctx, a.lm.as_ref())?;
    let settings = DecodeSettings::from_config(&cfg, lm.as_ref());
    let report: WerReport = match (trn, score) {
        (Some(t), _) => evaluate(&load_corpus(&scp, &t)?, &dict, &scorer, &settings)?,
        (None, true) => return Err(usage("eval needs --trn (or test_trn in the config)")),
        (None, false) => decode_unlabeled(&scp, &dict, &scorer, &settings)?,
    };
    ctx.write("hyp.txt", &report.hypotheses_text())?;
    if score {
        ctx.write("wer.txt", &report.to_text())?;
        println!("WER {:.4} ({} errors / {} words)", report.rate(), report.total.errors(), report.total.ref_len);
    }
    Ok(())
}

fn decode_unlabeled(
    scp: &Path,
    dict: &Dictionary,
    scorer: &SystemScorer<f64>,
    settings: &DecodeSettings,
) -> aaelex::Result<WerReport> {
    use rayon::prelude::*;
    let list = load_feature_list::<f64>(scp)?;
    let hyps = list
        .par_iter()
        .map(|(_, f)| {
            let em = scorer.emissions(f)?;
            match settings.mode {
                DecodeMode::Isolated => {
                    aaelex::decoder::decode_isolated_emissions(&em, dict, scorer).map(|(w, _)| vec![w])
                }
                DecodeMode::Continuous => {
                    aaelex::decoder::decode_continuous_emissions(&em, dict, scorer, settings.lm, settings.weights)
                        .map(|r| r.words)
                }
            }
        })
        .collect::<aaelex::Result<Vec<_>>>()?;
    let mut report = WerReport::default();
    for ((id, _), h) in list.into_iter().zip(hyps) {
        report.push(id, Vec::new(), h);
    }
    Ok(report)
}

fn report(ctx: &Ctx, a: &ReportArgs) -> aaelex::Result<()> {
    let mut all = Vec::new();
    let mut table = Vec::new();
    for arg in &a.reports {
        let (n, path) = match arg.split_once('=') {
            Some((n, p)) => (Some(n.parse::<usize>().map_err(|_| usage(format!("bad N in {arg:?}")))?), PathBuf::from(p)),
            None => (None, PathBuf::from(arg)),
        };
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let reports = parse_reports_csv(&text, &path.display().to_string())?;
        if let Some(n) = n {
            let best = reports.iter().map(|r| r.dev_wer).fold(f64::INFINITY, f64::min);
            table.push((path.display().to_string(), n, best));
        }
        all.extend(reports);
    }
    ctx.write("report.csv", &reports_to_csv(&all))?;
    let mut summary = summary_text(&all);
    if !table.is_empty() {
        summary.push('\n');
        summary.push_str(&wer_vs_n_table(&table));
    }
    ctx.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}
