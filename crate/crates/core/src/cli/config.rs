//! Flat `key = value` run configuration for training.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{default_sigma, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::eval::Pipeline;
use crate::model::TrainConfig;
use crate::tensor::Activation;

const KEYS: &[&str] = &[
    "initial_lr",
    "final_lr",
    "lr_decay_factor",
    "plateau_threshold",
    "patience_epochs",
    "final_layer_lr_scale",
    "batch_size",
    "momentum",
    "seed",
    "max_epochs",
    "train_dir",
    "val_dir",
    "model_out",
    "history_out",
    "scale",
    "sigma",
    "activation",
    "patch_size",
    "pipeline",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub train_dir: PathBuf,
    pub val_dir: Option<PathBuf>,
    pub model_out: PathBuf,
    /// Defaults to the model path with a `.history.csv` extension.
    pub history_out: Option<PathBuf>,
    pub scale: usize,
    /// Defaults to [`default_sigma`] of the scale.
    pub sigma: Option<f64>,
    pub activation: Activation,
    /// LR patch side; the HR-space pipeline trains on `patch_size * scale`.
    pub patch_size: usize,
    pub pipeline: Pipeline,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub scale: Option<usize>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub activation: Option<Activation>,
    pub model_out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value '{value}' for {key}")))
}

impl RunConfig {
    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut train = TrainConfig::default();
        let mut seen = BTreeSet::new();
        let (mut train_dir, mut val_dir, mut model_out, mut history_out) = (None, None, None, None);
        let (mut scale, mut sigma, mut activation, mut patch_size, mut pipeline) =
            (None, None, Activation::Tanh, PATCH_SIZE, Pipeline::EspcnLrSpace);
        let path = |v: &str| base.join(v);

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {line}: unknown key '{key}'")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {line}: duplicate key '{key}'")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {line}: empty value for {key}")));
            }
            match key {
                "initial_lr" => train.initial_lr = parse_value(key, value, line)?,
                "final_lr" => train.final_lr = parse_value(key, value, line)?,
                "lr_decay_factor" => train.lr_decay_factor = parse_value(key, value, line)?,
                "plateau_threshold" => train.plateau_threshold = parse_value(key, value, line)?,
                "patience_epochs" => train.patience_epochs = parse_value(key, value, line)?,
                "final_layer_lr_scale" => train.final_layer_lr_scale = parse_value(key, value, line)?,
                "batch_size" => train.batch_size = parse_value(key, value, line)?,
                "momentum" => train.momentum = parse_value(key, value, line)?,
                "seed" => train.rng_seed = parse_value(key, value, line)?,
                "max_epochs" => train.max_epochs = parse_value(key, value, line)?,
                "train_dir" => train_dir = Some(path(value)),
                "val_dir" => val_dir = Some(path(value)),
                "model_out" => model_out = Some(path(value)),
                "history_out" => history_out = Some(path(value)),
                "scale" => scale = Some(parse_value(key, value, line)?),
                "sigma" => sigma = Some(parse_value(key, value, line)?),
                "activation" => {
                    activation = value
                        .parse()
                        .map_err(|e: String| Error::Config(format!("line {line}: {e}")))?
                }
                "patch_size" => patch_size = parse_value(key, value, line)?,
                "pipeline" => pipeline = value.parse()?,
                _ => unreachable!("key list and match arms agree"),
            }
        }
        let missing = |k: &str| Error::Config(format!("missing required key '{k}'"));
        Ok(RunConfig {
            train,
            train_dir: train_dir.ok_or_else(|| missing("train_dir"))?,
            val_dir,
            model_out: model_out.ok_or_else(|| missing("model_out"))?,
            history_out,
            scale: scale.ok_or_else(|| missing("scale"))?,
            sigma,
            activation,
            patch_size,
            pipeline,
        })
    }

    /// Reads and parses a config file. A missing or unreadable file is a
    /// config error naming the path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        RunConfig::parse(&text, base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.scale {
            self.scale = s;
        }
        if let Some(s) = o.seed {
            self.train.rng_seed = s;
        }
        if let Some(s) = o.sigma {
            self.sigma = Some(s);
        }
        if let Some(a) = o.activation {
            self.activation = a;
        }
        if let Some(p) = &o.model_out {
            self.model_out = p.clone();
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or_else(|| default_sigma(self.scale))
    }

    pub fn history_path(&self) -> PathBuf {
        self.history_out
            .clone()
            .unwrap_or_else(|| self.model_out.with_extension("history.csv"))
    }

    /// Checks values and paths before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.scale == 0 {
            return Err(Error::Config("scale must be >= 1".into()));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be >= 1".into()));
        }
        if !(self.sigma() >= 0.0 && self.sigma().is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {}", self.sigma())));
        }
        for dir in std::iter::once(&self.train_dir).chain(&self.val_dir) {
            if !dir.is_dir() {
                return Err(Error::Config(format!("not a directory: {}", dir.display())));
            }
        }
        for out in [self.model_out.clone(), self.history_path()] {
            let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::Config(format!("output directory does not exist: {}", parent.display())));
            }
            if out.is_dir() {
                return Err(Error::Config(format!("output path is a directory: {}", out.display())));
            }
        }
        Ok(())
    }
}
