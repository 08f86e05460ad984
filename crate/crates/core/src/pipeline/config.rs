use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mlp::TrainConfig;
use crate::pronunciation::MergeOrder;

/// How evaluation decodes each utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// One word per utterance, chosen among all dictionary words.
    Isolated,
    /// Word-loop decoding with an optional bigram.
    Continuous,
}

/// Input and output files named in a config file. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathConfig {
    pub train_scp: Option<PathBuf>,
    pub train_trn: Option<PathBuf>,
    pub test_scp: Option<PathBuf>,
    pub test_trn: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Number of data-driven units.
    pub n_aae: usize,
    pub max_mixtures: usize,
    pub min_examples: usize,
    pub max_units: usize,
    pub dev_fraction: f64,
    pub patience: usize,
    pub seed: u64,
    pub max_gmm_iterations: usize,
    pub max_mlp_iterations: usize,
    /// Upper bound on segmental training steps per iteration.
    pub train_steps: usize,
    /// Relative log-likelihood gain below which segmental training stops.
    pub train_tolerance: f64,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub var_floor_scale: f64,
    /// Initial clustering goes to `n_aae * init_oversplit` cells before
    /// merging back to `n_aae`; 1 disables the extra step.
    pub init_oversplit: usize,
    pub split_epsilon: f64,
    pub merge_order: MergeOrder,
    pub decode_mode: DecodeMode,
    pub lm_weight: f64,
    pub insertion_penalty: f64,
    /// Keep the initial (or supplied) dictionary fixed.
    pub freeze_dictionary: bool,
    pub mlp_stage: bool,
    pub hidden: Vec<usize>,
    pub context: usize,
    pub prior_floor: f64,
    pub mlp: TrainConfig,
    pub paths: PathConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_aae: 384,
            max_mixtures: 128,
            min_examples: 4,
            max_units: 64,
            dev_fraction: 0.15,
            patience: 2,
            seed: 0,
            max_gmm_iterations: 12,
            max_mlp_iterations: 4,
            train_steps: 10,
            train_tolerance: 1e-4,
            var_floor_scale: 1e-3,
            init_oversplit: 4,
            split_epsilon: 0.2,
            merge_order: MergeOrder::LongestFirst,
            decode_mode: DecodeMode::Isolated,
            lm_weight: 1.0,
            insertion_penalty: 0.0,
            freeze_dictionary: false,
            mlp_stage: true,
            hidden: vec![2048, 1024, 1024, 1024, 1024, 1024],
            context: 5,
            prior_floor: crate::mlp::DEFAULT_PRIOR_FLOOR,
            mlp: TrainConfig::default(),
            paths: PathConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Settings sized for the synthetic corpus: 8 units, small mixtures
    /// and two hidden layers of 64.
    pub fn synthetic() -> Self {
        Self {
            n_aae: 8,
            max_mixtures: 4,
            hidden: vec![64, 64],
            mlp: TrainConfig {
                epochs: 15,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_aae < 2 {
            return bad(format!("n_aae must be at least 2, got {}", self.n_aae));
        }
        if !self.max_mixtures.is_power_of_two() {
            return bad(format!("max_mixtures must be a power of two, got {}", self.max_mixtures));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 0.5) {
            return bad(format!("dev_fraction must lie in (0, 0.5), got {}", self.dev_fraction));
        }
        if self.max_units == 0 || self.hidden.contains(&0) {
            return bad("max_units and hidden sizes must be positive".into());
        }
        if !(self.var_floor_scale > 0.0) || !(self.split_epsilon > 0.0) || !(self.prior_floor > 0.0) {
            return bad("var_floor_scale, split_epsilon and prior_floor must be positive".into());
        }
        self.mlp.validate()
    }

    /// Applies `key = value` settings; `[section]` headers are ignored.
    pub fn apply_ini(&mut self, text: &str, origin: &str, base_dir: &Path) -> Result<()> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::parse(origin, e.line, e.msg.to_string()))?;
        for (_, props) in ini.iter() {
            for (key, value) in props.iter() {
                self.set(key, value, base_dir)
                    .map_err(|m| Error::InvalidArgument(format!("{origin}: {key}: {m}")))?;
            }
        }
        Ok(())
    }

    /// Reads a config file over the defaults in `self`.
    pub fn load(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        self.apply_ini(&text, &path.display().to_string(), base)?;
        Ok(self)
    }

    /// Sets one option by name.
    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> std::result::Result<(), String> {
        fn num<V: std::str::FromStr>(v: &str) -> std::result::Result<V, String> {
            v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            match v.trim() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(format!("expected true or false, got {v:?}")),
            }
        }
        let path = |v: &str| Some(base_dir.join(v.trim()));
        match key {
            "n_aae" => self.n_aae = num(value)?,
            "max_mixtures" => self.max_mixtures = num(value)?,
            "min_examples" => self.min_examples = num(value)?,
            "max_units" => self.max_units = num(value)?,
            "dev_fraction" => self.dev_fraction = num(value)?,
            "patience" => self.patience = num(value)?,
            "seed" => self.seed = num(value)?,
            "max_gmm_iterations" => self.max_gmm_iterations = num(value)?,
            "max_mlp_iterations" => self.max_mlp_iterations = num(value)?,
            "train_steps" => self.train_steps = num(value)?,
            "train_tolerance" => self.train_tolerance = num(value)?,
            "var_floor_scale" => self.var_floor_scale = num(value)?,
            "init_oversplit" => self.init_oversplit = num(value)?,
            "split_epsilon" => self.split_epsilon = num(value)?,
            "merge_order" => {
                self.merge_order = match value.trim() {
                    "longest_first" => MergeOrder::LongestFirst,
                    "as_given" => MergeOrder::AsGiven,
                    v => return Err(format!("unknown merge order {v:?}")),
                }
            }
            "decode_mode" => {
                self.decode_mode = match value.trim() {
                    "isolated" => DecodeMode::Isolated,
                    "continuous" => DecodeMode::Continuous,
                    v => return Err(format!("unknown decode mode {v:?}")),
                }
            }
            "lm_weight" => self.lm_weight = num(value)?,
            "insertion_penalty" => self.insertion_penalty = num(value)?,
            "freeze_dictionary" => self.freeze_dictionary = flag(value)?,
            "mlp_stage" => self.mlp_stage = flag(value)?,
            "hidden" => {
                self.hidden = value
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(num)
                    .collect::<std::result::Result<_, _>>()?
            }
            "context" => self.context = num(value)?,
            "prior_floor" => self.prior_floor = num(value)?,
            "learning_rate" => self.mlp.learning_rate = num(value)?,
            "momentum" => self.mlp.momentum = num(value)?,
            "batch_size" => self.mlp.batch_size = num(value)?,
            "dropout" => self.mlp.dropout = num(value)?,
            "l1" => self.mlp.l1 = num(value)?,
            "epochs" => self.mlp.epochs = num(value)?,
            "lr_patience" => self.mlp.lr_patience = num(value)?,
            "train_scp" => self.paths.train_scp = path(value),
            "train_trn" => self.paths.train_trn = path(value),
            "test_scp" => self.paths.test_scp = path(value),
            "test_trn" => self.paths.test_trn = path(value),
            "lm" => self.paths.lm = path(value),
            "dictionary" => self.paths.dictionary = path(value),
            _ => return Err("unknown option".into()),
        }
        Ok(())
    }

    /// The settings as `key = value` lines (paths omitted).
    pub fn to_ini(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        let order = match self.merge_order {
            MergeOrder::LongestFirst => "longest_first",
            MergeOrder::AsGiven => "as_given",
        };
        let mode = match self.decode_mode {
            DecodeMode::Isolated => "isolated",
            DecodeMode::Continuous => "continuous",
        };
        let m = &self.mlp;
        format!(
            "n_aae = {}\nmax_mixtures = {}\nmin_examples = {}\nmax_units = {}\ndev_fraction = {}\n\
             patience = {}\nseed = {}\nmax_gmm_iterations = {}\nmax_mlp_iterations = {}\n\
             train_steps = {}\ntrain_tolerance = {}\nvar_floor_scale = {}\ninit_oversplit = {}\n\
             split_epsilon = {}\n\
             merge_order = {order}\ndecode_mode = {mode}\nlm_weight = {}\ninsertion_penalty = {}\n\
             freeze_dictionary = {}\nmlp_stage = {}\nhidden = {}\ncontext = {}\nprior_floor = {}\n\
             learning_rate = {}\nmomentum = {}\nbatch_size = {}\ndropout = {}\nl1 = {}\nepochs = {}\n\
             lr_patience = {}\n",
            self.n_aae,
            self.max_mixtures,
            self.min_examples,
            self.max_units,
            self.dev_fraction,
            self.patience,
            self.seed,
            self.max_gmm_iterations,
            self.max_mlp_iterations,
            self.train_steps,
            self.train_tolerance,
            self.var_floor_scale,
            self.init_oversplit,
            self.split_epsilon,
            self.lm_weight,
            self.insertion_penalty,
            self.freeze_dictionary,
            self.mlp_stage,
            hidden.join(","),
            self.context,
            self.prior_floor,
            m.learning_rate,
            m.momentum,
            m.batch_size,
            m.dropout,
            m.l1,
            m.epochs,
            m.lr_patience,
        )
    }
}
