use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::synth::{SynthKind, SynthSpec};
use crate::bmm::{EmConfig, InitMode};
use crate::classifier::TrainConfig;
use crate::error::{Error, Result};
use crate::memory::ClassWeighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Per-class mixture memory with generated replay.
    Gbm,
    /// Stored real embeddings.
    Lr,
    /// No replay; lower reference.
    Finetune,
    /// Retrains on every seen class; upper reference.
    Joint,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbm" => Ok(Method::Gbm),
            "lr" => Ok(Method::Lr),
            "finetune" => Ok(Method::Finetune),
            "joint" => Ok(Method::Joint),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Gbm => "gbm",
            Method::Lr => "lr",
            Method::Finetune => "finetune",
            Method::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binarizer {
    None,
    Thermometer,
    Heaviside,
}

/// Flat run configuration, read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub method: Method,
    pub binarizer: Binarizer,

    /// Embedding files; when unset, synthetic data is generated.
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,

    pub n_classes: usize,
    pub modes_per_class: usize,
    pub dim: usize,
    pub n_per_class: usize,
    pub base_prob: f64,
    pub alt_prob: f64,
    pub flip_noise: f64,
    pub alt_fraction: f64,
    pub class_divergence: f64,
    pub mode_divergence: f64,
    pub synth_kind: SynthKind,
    pub real_noise: f64,

    pub tasks: usize,
    pub init_classes: usize,

    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_decay: f64,
    pub lr_decay_period: usize,

    pub gbm_k: usize,
    pub gbm_q: u8,
    pub gbm_eps: f64,
    pub gbm_n_max: usize,
    pub gbm_n_init: usize,
    pub gbm_n_iter: usize,
    pub gbm_pi_trainable: bool,
    pub gbm_init: InitMode,
    pub class_weighting: ClassWeighting,

    pub lr_exemplars: usize,

    pub therm_p: usize,
    pub heaviside_factor: usize,
    pub binarizer_epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::default();
        let train = TrainConfig::default();
        let em = EmConfig::default();
        Self {
            seed: 0,
            method: Method::Gbm,
            binarizer: Binarizer::None,
            train_path: None,
            test_path: None,
            n_classes: synth.n_classes,
            modes_per_class: synth.modes_per_class,
            dim: synth.d,
            n_per_class: synth.n_per_class,
            base_prob: synth.base_prob,
            alt_prob: synth.alt_prob,
            flip_noise: synth.flip_noise,
            alt_fraction: synth.alt_fraction,
            class_divergence: synth.class_divergence,
            mode_divergence: synth.mode_divergence,
            synth_kind: synth.kind,
            real_noise: synth.real_noise,
            tasks: 5,
            init_classes: 10,
            learning_rate: train.learning_rate,
            momentum: train.momentum,
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr_decay: train.lr_decay,
            lr_decay_period: train.lr_decay_period,
            gbm_k: 2,
            gbm_q: 32,
            gbm_eps: em.eps,
            gbm_n_max: em.n_max,
            gbm_n_init: em.n_init,
            gbm_n_iter: em.n_iter,
            gbm_pi_trainable: em.pi_trainable,
            gbm_init: em.init_mode,
            class_weighting: ClassWeighting::Uniform,
            lr_exemplars: 20,
            therm_p: 8,
            heaviside_factor: 2,
            binarizer_epochs: 20,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            n_classes: self.n_classes,
            modes_per_class: self.modes_per_class,
            d: self.dim,
            n_per_class: self.n_per_class,
            base_prob: self.base_prob,
            alt_prob: self.alt_prob,
            flip_noise: self.flip_noise,
            alt_fraction: self.alt_fraction,
            class_divergence: self.class_divergence,
            mode_divergence: self.mode_divergence,
            kind: self.synth_kind,
            real_noise: self.real_noise,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_decay: self.lr_decay,
            lr_decay_period: self.lr_decay_period,
        }
    }

    pub fn binarizer_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.binarizer_epochs,
            ..self.train_config()
        }
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            k: self.gbm_k,
            eps: self.gbm_eps,
            n_max: self.gbm_n_max,
            n_init: self.gbm_n_init,
            n_iter: self.gbm_n_iter,
            pi_trainable: self.gbm_pi_trainable,
            init_mode: self.gbm_init,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let to_config = |e: Error| match e {
            Error::InvalidParameter(m) => Error::Config(m),
            other => other,
        };
        if self.train_path.is_some() != self.test_path.is_some() {
            return Err(Error::Config(
                "train_path and test_path must be given together".into(),
            ));
        }
        if self.train_path.is_none() {
            self.synth_spec().validate()?;
        }
        self.train_config().validate().map_err(to_config)?;
        if self.method == Method::Gbm {
            self.em_config().validate().map_err(to_config)?;
            if !(1..=crate::bmm::MAX_Q).contains(&self.gbm_q) {
                return Err(Error::Config(format!(
                    "gbm_q={} is out of range",
                    self.gbm_q
                )));
            }
        }
        if self.method == Method::Lr && self.lr_exemplars == 0 {
            return Err(Error::Config("lr_exemplars must be positive".into()));
        }
        if self.therm_p == 0 || self.heaviside_factor == 0 {
            return Err(Error::Config(
                "therm_p and heaviside_factor must be positive".into(),
            ));
        }
        Ok(())
    }
}
