//! Flat `key = value` run configuration with `--key value` overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::SynthSpec;
use crate::error::{Error, Result};
use crate::softlabel::SoftLabelMode;
use crate::train::{TrainConfig, ValSplit};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthSpec,
    /// Unset means "follow `seed`".
    pub synth_seed: Option<u64>,
    pub attributes_path: Option<PathBuf>,
    pub train_path: Option<PathBuf>,
    pub test_seen_path: Option<PathBuf>,
    pub test_unseen_path: Option<PathBuf>,
    pub val_seen_path: Option<PathBuf>,
    pub val_unseen_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub val_classes: usize,
    pub val_holdout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            synth: SynthSpec::default(),
            synth_seed: None,
            attributes_path: None,
            train_path: None,
            test_seen_path: None,
            test_unseen_path: None,
            val_seen_path: None,
            val_unseen_path: None,
            checkpoint_path: None,
            out_dir: PathBuf::from("out"),
            val_classes: ValSplit::default().num_val_classes,
            val_holdout: ValSplit::default().holdout_fraction,
        }
    }
}

pub const KEYS: &[&str] = &[
    "hidden_size",
    "activation",
    "tau",
    "q",
    "mode",
    "learning_rate",
    "epochs",
    "batch_size",
    "lambda_l2",
    "gamma_l1",
    "seed",
    "standardize",
    "l2_normalize",
    "attributes_path",
    "train_path",
    "test_seen_path",
    "test_unseen_path",
    "val_seen_path",
    "val_unseen_path",
    "checkpoint_path",
    "out_dir",
    "val_classes",
    "val_holdout",
    "synth_dim_a",
    "synth_dim_d",
    "synth_num_seen",
    "synth_num_unseen",
    "synth_train_per_class",
    "synth_test_per_class",
    "synth_noise_sigma",
    "synth_seed",
];

fn parse_value<T: FromStr>(key: &str, value: &str, location: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        key: key.to_string(),
        location: location.to_string(),
        msg: format!("cannot parse `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str, location: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config {
            key: key.to_string(),
            location: location.to_string(),
            msg: format!("expected a boolean, got `{value}`"),
        }),
    }
}

impl RunConfig {
    /// Sets one key. `location` names where the value came from (for errors).
    pub fn set(&mut self, key: &str, value: &str, location: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        let s = &mut self.synth;
        let path = || Some(PathBuf::from(value));
        match key {
            "hidden_size" => t.hidden_size = parse_value(key, value, location)?,
            "activation" => {
                t.activation = value.parse().map_err(|e: Error| Error::Config {
                    key: key.into(),
                    location: location.into(),
                    msg: e.to_string(),
                })?
            }
            "tau" => t.tau = parse_value(key, value, location)?,
            "q" => t.q = parse_value(key, value, location)?,
            "mode" => {
                t.mode = value.parse::<SoftLabelMode>().map_err(|e| Error::Config {
                    key: key.into(),
                    location: location.into(),
                    msg: e.to_string(),
                })?
            }
            "learning_rate" => t.learning_rate = parse_value(key, value, location)?,
            "epochs" => t.epochs = parse_value(key, value, location)?,
            "batch_size" => t.batch_size = parse_value(key, value, location)?,
            "lambda_l2" => t.lambda_l2 = parse_value(key, value, location)?,
            "gamma_l1" => t.gamma_l1 = parse_value(key, value, location)?,
            "seed" => t.seed = parse_value(key, value, location)?,
            "standardize" => t.standardize = parse_bool(key, value, location)?,
            "l2_normalize" => t.l2_normalize = parse_bool(key, value, location)?,
            "attributes_path" => self.attributes_path = path(),
            "train_path" => self.train_path = path(),
            "test_seen_path" => self.test_seen_path = path(),
            "test_unseen_path" => self.test_unseen_path = path(),
            "val_seen_path" => self.val_seen_path = path(),
            "val_unseen_path" => self.val_unseen_path = path(),
            "checkpoint_path" => self.checkpoint_path = path(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "val_classes" => self.val_classes = parse_value(key, value, location)?,
            "val_holdout" => self.val_holdout = parse_value(key, value, location)?,
            "synth_dim_a" => s.dim_a = parse_value(key, value, location)?,
            "synth_dim_d" => s.dim_d = parse_value(key, value, location)?,
            "synth_num_seen" => s.num_seen = parse_value(key, value, location)?,
            "synth_num_unseen" => s.num_unseen = parse_value(key, value, location)?,
            "synth_train_per_class" => s.train_per_class = parse_value(key, value, location)?,
            "synth_test_per_class" => s.test_per_class = parse_value(key, value, location)?,
            "synth_noise_sigma" => s.noise_sigma = parse_value(key, value, location)?,
            "synth_seed" => self.synth_seed = Some(parse_value(key, value, location)?),
            _ => {
                return Err(Error::Config {
                    key: key.to_string(),
                    location: location.to_string(),
                    msg: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("line {}", i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                location: location.clone(),
                msg: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value, &location)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            key: "--config".into(),
            location: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_text(&text)
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec {
            seed: self.synth_seed.unwrap_or(self.train.seed),
            ..self.synth.clone()
        }
    }

    pub fn val_split(&self) -> ValSplit {
        ValSplit {
            num_val_classes: self.val_classes,
            holdout_fraction: self.val_holdout,
            seed: self.train.seed,
        }
    }

    fn or_out(&self, p: &Option<PathBuf>, file: &str) -> PathBuf {
        p.clone().unwrap_or_else(|| self.out_dir.join(file))
    }

    pub fn attributes(&self) -> PathBuf {
        self.or_out(&self.attributes_path, "attributes.csv")
    }

    pub fn train_file(&self) -> PathBuf {
        self.or_out(&self.train_path, "train.zsfb")
    }

    pub fn test_seen_file(&self) -> PathBuf {
        self.or_out(&self.test_seen_path, "test_seen.zsfb")
    }

    pub fn test_unseen_file(&self) -> PathBuf {
        self.or_out(&self.test_unseen_path, "test_unseen.zsfb")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.or_out(&self.checkpoint_path, "model.zsfm")
    }

    /// Cross-key consistency.
    pub fn validate(&self) -> Result<()> {
        let wrap = |key: &str, e: Error| Error::Config {
            key: key.into(),
            location: "config".into(),
            msg: e.to_string(),
        };
        if self.train.mode == SoftLabelMode::Distribution && !(self.train.tau > 0.0) {
            return Err(Error::Config {
                key: "tau".into(),
                location: "config".into(),
                msg: "DU mode requires a positive tau".into(),
            });
        }
        self.train.validate().map_err(|e| wrap("train", e))?;
        if self.val_seen_path.is_some() != self.val_unseen_path.is_some() {
            return Err(Error::Config {
                key: "val_seen_path".into(),
                location: "config".into(),
                msg: "val_seen_path and val_unseen_path must be given together".into(),
            });
        }
        Ok(())
    }
}
