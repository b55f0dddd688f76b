//! Flat `key = value` run configuration.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Every key
//! has a default, so an empty file is a valid configuration. Unknown keys are
//! rejected.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use bnnprune::graph::{LrSchedule, Rule};
use bnnprune::models::{Arch, ModelSpec};
use bnnprune::pipeline::PruneSchedule;
use bnnprune::subsidiary::MaskInitConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Prune,
    BaselineLayerwise,
    BaselineCascade,
    Analyze,
    Compare,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Train,
        Mode::Prune,
        Mode::BaselineLayerwise,
        Mode::BaselineCascade,
        Mode::Analyze,
        Mode::Compare,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Prune => "prune",
            Mode::BaselineLayerwise => "baseline-layerwise",
            Mode::BaselineCascade => "baseline-cascade",
            Mode::Analyze => "analyze",
            Mode::Compare => "compare",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| format!("expected one of {}", Mode::ALL.map(Mode::id).join(", ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Synth,
    Mnist,
    Cifar10,
}

impl DatasetId {
    pub fn id(self) -> &'static str {
        match self {
            DatasetId::Synth => "synth",
            DatasetId::Mnist => "mnist",
            DatasetId::Cifar10 => "cifar10",
        }
    }
}

impl FromStr for DatasetId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synth" => Ok(DatasetId::Synth),
            "mnist" => Ok(DatasetId::Mnist),
            "cifar10" => Ok(DatasetId::Cifar10),
            _ => Err("expected synth, mnist or cifar10".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optim {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,

    pub dataset: DatasetId,
    /// Directory holding the IDX or CIFAR-10 binary files.
    pub data_path: PathBuf,
    /// Keep only the first n samples (0 keeps all).
    pub train_limit: usize,
    pub test_limit: usize,
    pub normalize: bool,
    pub synth_classes: usize,
    pub synth_train: usize,
    pub synth_test: usize,
    pub synth_shape: [usize; 3],
    pub synth_separation: f64,
    pub synth_noise: f64,

    pub arch: Arch,
    /// Empty selects the architecture's default widths.
    pub widths: Vec<usize>,

    pub feature_epochs: usize,
    pub select_epochs: usize,
    pub retrain_epochs: usize,
    pub batch_size: usize,
    pub alpha_reg: f64,
    pub beta: f64,
    pub temperature: f64,
    pub sub_lr: f64,
    pub main_lr: f64,
    pub lr_decay: f64,
    pub lr_interval: usize,
    pub optimizer: Optim,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub mask_sigma: f64,
    pub mask_pnr: f64,

    /// Per-layer PFR used by the standalone baseline modes.
    pub baseline_pfr: f64,
    pub ops_per_mac: f64,
    /// Checkpoint analysed by `analyze`; empty analyses a freshly built model.
    pub checkpoint: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = PruneSchedule::default();
        let (beta1, beta2, eps) = match Rule::adam() {
            Rule::Adam { beta1, beta2, eps } => (beta1, beta2, eps),
            Rule::Sgd { .. } => unreachable!(),
        };
        RunConfig {
            mode: Mode::Prune,
            seed: 0,
            out: PathBuf::from("runs/default"),
            dataset: DatasetId::Synth,
            data_path: PathBuf::new(),
            train_limit: 0,
            test_limit: 0,
            normalize: true,
            synth_classes: 4,
            synth_train: 256,
            synth_test: 128,
            synth_shape: [3, 16, 16],
            synth_separation: 1.0,
            synth_noise: 0.5,
            arch: Arch::NinMini,
            widths: Vec::new(),
            feature_epochs: s.feature_epochs,
            select_epochs: s.select_epochs,
            retrain_epochs: s.retrain_epochs,
            batch_size: s.batch_size,
            alpha_reg: s.alpha_reg,
            beta: s.beta,
            temperature: s.temperature,
            sub_lr: s.sub_lr,
            main_lr: s.main_lr.initial,
            lr_decay: s.main_lr.decay,
            lr_interval: s.main_lr.interval,
            optimizer: Optim::Adam,
            momentum: 0.9,
            adam_beta1: beta1,
            adam_beta2: beta2,
            adam_eps: eps,
            mask_sigma: s.mask_init.sigma,
            mask_pnr: s.mask_init.pnr,
            baseline_pfr: 0.3,
            ops_per_mac: 1.0,
            checkpoint: PathBuf::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_shape(v: &str) -> Result<[usize; 3], String> {
    let dims: Vec<usize> = v.split('x').map(|d| d.trim().parse().map_err(|_| "expected CxHxW")).collect::<Result<_, _>>()?;
    dims.try_into().map_err(|_| "expected CxHxW".into())
}

fn parse_list(v: &str) -> Result<Vec<usize>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|d| d.trim().parse().map_err(|_| "expected comma-separated integers".to_string())).collect()
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "mode", "seed", "out", "dataset", "data_path", "train_limit", "test_limit", "normalize",
        "synth_classes", "synth_train", "synth_test", "synth_shape", "synth_separation", "synth_noise",
        "arch", "widths", "feature_epochs", "select_epochs", "retrain_epochs", "batch_size",
        "alpha_reg", "beta", "temperature", "sub_lr", "main_lr", "lr_decay", "lr_interval",
        "optimizer", "momentum", "adam_beta1", "adam_beta2", "adam_eps", "mask_sigma", "mask_pnr",
        "baseline_pfr", "ops_per_mac", "checkpoint",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let custom = |reason: String| ConfigError::BadValue { key: key.into(), value: v.into(), reason };
        match key {
            "mode" => self.mode = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = v.into(),
            "dataset" => self.dataset = parse(key, v)?,
            "data_path" => self.data_path = v.into(),
            "train_limit" => self.train_limit = parse(key, v)?,
            "test_limit" => self.test_limit = parse(key, v)?,
            "normalize" => self.normalize = parse(key, v)?,
            "synth_classes" => self.synth_classes = parse(key, v)?,
            "synth_train" => self.synth_train = parse(key, v)?,
            "synth_test" => self.synth_test = parse(key, v)?,
            "synth_shape" => self.synth_shape = parse_shape(v).map_err(custom)?,
            "synth_separation" => self.synth_separation = parse(key, v)?,
            "synth_noise" => self.synth_noise = parse(key, v)?,
            "arch" => self.arch = parse(key, v)?,
            "widths" => self.widths = parse_list(v).map_err(custom)?,
            "feature_epochs" => self.feature_epochs = parse(key, v)?,
            "select_epochs" => self.select_epochs = parse(key, v)?,
            "retrain_epochs" => self.retrain_epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "alpha_reg" => self.alpha_reg = parse(key, v)?,
            "beta" => self.beta = parse(key, v)?,
            "temperature" => self.temperature = parse(key, v)?,
            "sub_lr" => self.sub_lr = parse(key, v)?,
            "main_lr" => self.main_lr = parse(key, v)?,
            "lr_decay" => self.lr_decay = parse(key, v)?,
            "lr_interval" => self.lr_interval = parse(key, v)?,
            "optimizer" => {
                self.optimizer = match v {
                    "adam" => Optim::Adam,
                    "sgd" => Optim::Sgd,
                    _ => return Err(custom("expected adam or sgd".into())),
                }
            }
            "momentum" => self.momentum = parse(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "adam_eps" => self.adam_eps = parse(key, v)?,
            "mask_sigma" => self.mask_sigma = parse(key, v)?,
            "mask_pnr" => self.mask_pnr = parse(key, v)?,
            "baseline_pfr" => self.baseline_pfr = parse(key, v)?,
            "ops_per_mac" => self.ops_per_mac = parse(key, v)?,
            "checkpoint" => self.checkpoint = v.into(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        c.merge_text(text)?;
        Ok(c)
    }

    fn value(&self, key: &str) -> String {
        let join = |v: &[usize], sep: &str| v.iter().map(usize::to_string).collect::<Vec<_>>().join(sep);
        match key {
            "mode" => self.mode.id().into(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "dataset" => self.dataset.id().into(),
            "data_path" => self.data_path.display().to_string(),
            "train_limit" => self.train_limit.to_string(),
            "test_limit" => self.test_limit.to_string(),
            "normalize" => self.normalize.to_string(),
            "synth_classes" => self.synth_classes.to_string(),
            "synth_train" => self.synth_train.to_string(),
            "synth_test" => self.synth_test.to_string(),
            "synth_shape" => join(&self.synth_shape, "x"),
            "synth_separation" => self.synth_separation.to_string(),
            "synth_noise" => self.synth_noise.to_string(),
            "arch" => self.arch.id().into(),
            "widths" => join(&self.widths, ","),
            "feature_epochs" => self.feature_epochs.to_string(),
            "select_epochs" => self.select_epochs.to_string(),
            "retrain_epochs" => self.retrain_epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "alpha_reg" => self.alpha_reg.to_string(),
            "beta" => self.beta.to_string(),
            "temperature" => self.temperature.to_string(),
            "sub_lr" => self.sub_lr.to_string(),
            "main_lr" => self.main_lr.to_string(),
            "lr_decay" => self.lr_decay.to_string(),
            "lr_interval" => self.lr_interval.to_string(),
            "optimizer" => match self.optimizer {
                Optim::Adam => "adam".into(),
                Optim::Sgd => "sgd".into(),
            },
            "momentum" => self.momentum.to_string(),
            "adam_beta1" => self.adam_beta1.to_string(),
            "adam_beta2" => self.adam_beta2.to_string(),
            "adam_eps" => self.adam_eps.to_string(),
            "mask_sigma" => self.mask_sigma.to_string(),
            "mask_pnr" => self.mask_pnr.to_string(),
            "baseline_pfr" => self.baseline_pfr.to_string(),
            "ops_per_mac" => self.ops_per_mac.to_string(),
            "checkpoint" => self.checkpoint.display().to_string(),
            _ => unreachable!("{key}"),
        }
    }

    /// Every key with its value, in a form [`RunConfig::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for k in Self::KEYS {
            let _ = writeln!(s, "{k} = {}", self.value(k));
        }
        s
    }

    pub fn schedule(&self) -> PruneSchedule {
        PruneSchedule {
            feature_epochs: self.feature_epochs,
            select_epochs: self.select_epochs,
            retrain_epochs: self.retrain_epochs,
            batch_size: self.batch_size,
            alpha_reg: self.alpha_reg,
            beta: self.beta,
            temperature: self.temperature,
            sub_lr: self.sub_lr,
            main_lr: LrSchedule {
                initial: self.main_lr,
                decay: self.lr_decay,
                interval: self.lr_interval,
            },
            rule: match self.optimizer {
                Optim::Adam => Rule::Adam {
                    beta1: self.adam_beta1,
                    beta2: self.adam_beta2,
                    eps: self.adam_eps,
                },
                Optim::Sgd => Rule::Sgd { momentum: self.momentum },
            },
            mask_init: MaskInitConfig {
                sigma: self.mask_sigma,
                pnr: self.mask_pnr,
            },
            seed: self.seed,
        }
    }

    pub fn model_spec(&self, input_shape: [usize; 3], classes: usize) -> ModelSpec {
        let widths = if self.widths.is_empty() { self.arch.default_widths() } else { self.widths.clone() };
        ModelSpec::new(self.arch, widths, input_shape, classes)
    }
}
