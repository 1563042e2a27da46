//! Mini-batch SGD over the soft-labeled objective and grid-search model
//! selection on validation harmonic accuracy.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{l2_normalize, AttributeMatrix, FeatureSet, Standardizer};
use crate::error::{Error, Result};
use crate::eval::{evaluate_gzsl, GzslMetrics};
use crate::model::{batch_loss_and_gradients, ModelParams, RegConfig};
use crate::numeric::Activation;
use crate::softlabel::{build_table, SoftLabelConfig, SoftLabelMode};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub activation: Activation,
    pub mode: SoftLabelMode,
    pub q: f64,
    pub tau: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_l2: f64,
    pub gamma_l1: f64,
    pub seed: u64,
    /// Standardize features with training-set moments; the transform is
    /// folded into the first layer of the returned model.
    pub standardize: bool,
    /// Scale every sample to unit norm before anything else. Unlike
    /// standardization this cannot be folded into the weights, so callers
    /// must normalize evaluation inputs themselves.
    pub l2_normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 64,
            activation: Activation::Tanh,
            mode: SoftLabelMode::Distribution,
            q: 0.3,
            tau: 0.5,
            learning_rate: 0.05,
            epochs: 100,
            batch_size: 32,
            lambda_l2: 0.0,
            gamma_l1: 0.0,
            seed: 0,
            standardize: true,
            l2_normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.hidden_size == 0 {
            return Err(Error::invalid("hidden_size must be at least 1"));
        }
        self.soft_labels()?;
        RegConfig::new(self.lambda_l2, self.gamma_l1)?;
        Ok(())
    }

    pub fn soft_labels(&self) -> Result<SoftLabelConfig> {
        SoftLabelConfig::new(self.mode, self.q, self.tau)
    }

    pub fn reg(&self) -> RegConfig {
        RegConfig {
            lambda_l2: self.lambda_l2,
            gamma_l1: self.gamma_l1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted mean of the mini-batch objectives seen during the epoch.
    pub loss: f64,
    pub val_ah: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.loss)
    }

    /// `epoch,loss,val_ah`; `val_ah` is empty when no validation data was given.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_ah\n");
        for r in &self.epochs {
            let _ = write!(out, "{},{}", r.epoch, r.loss);
            match r.val_ah {
                Some(v) => {
                    let _ = writeln!(out, ",{v}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }
}

/// Held-out seen and unseen sets, labeled in the same class space as training.
#[derive(Clone, Copy, Debug)]
pub struct ValidationSets<'a> {
    pub seen: &'a FeatureSet,
    pub unseen: &'a FeatureSet,
}

pub fn train(
    config: &TrainConfig,
    attrs: &AttributeMatrix,
    train_set: &FeatureSet,
    val: Option<ValidationSets<'_>>,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    train_set.ensure_seen_only(attrs.num_seen())?;

    let mut data = if config.l2_normalize {
        l2_normalize(train_set)
    } else {
        train_set.clone()
    };
    let mut val_data = val.map(|v| {
        let prep = |s: &FeatureSet| {
            if config.l2_normalize {
                l2_normalize(s)
            } else {
                s.clone()
            }
        };
        (prep(v.seen), prep(v.unseen))
    });
    let standardizer = if config.standardize {
        let st = Standardizer::fit(&data)?;
        data = st.transform(&data)?;
        if let Some((s, u)) = val_data.as_mut() {
            *s = st.transform(s)?;
            *u = st.transform(u)?;
        }
        Some(st)
    } else {
        None
    };

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let mut params = ModelParams::init(
        data.dim(),
        config.hidden_size,
        config.activation,
        attrs.clone(),
        &mut init_rng,
    )?;
    let table = build_table(attrs, &config.soft_labels()?)?;
    let reg = config.reg();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (batch, indices) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads) = batch_loss_and_gradients(&data, indices, &table, &params, &reg)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            total += loss * indices.len() as f64;
            params.sgd_step(&grads, config.learning_rate);
        }
        let val_ah = match &val_data {
            Some((s, u)) => Some(evaluate_gzsl(&params, s, u)?.a_harmonic),
            None => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            loss: total / data.len() as f64,
            val_ah,
        });
    }

    if let Some(st) = &standardizer {
        params.fold_input_transform(st)?;
    }
    Ok((params, history))
}

/// How to carve a GZSL validation problem out of seen-class training data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValSplit {
    /// Seen classes treated as unseen during validation.
    pub num_val_classes: usize,
    /// Fraction of each remaining class's samples held out as validation-seen.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for ValSplit {
    fn default() -> Self {
        ValSplit {
            num_val_classes: 2,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

/// A self-contained GZSL sub-problem over the original seen classes.
#[derive(Clone, Debug)]
pub struct ValidationFold {
    pub attrs: AttributeMatrix,
    pub train: FeatureSet,
    pub val_seen: FeatureSet,
    pub val_unseen: FeatureSet,
    /// Original class index of each fold class.
    pub classes: Vec<usize>,
}

pub fn make_validation_fold(
    attrs: &AttributeMatrix,
    train_set: &FeatureSet,
    split: &ValSplit,
) -> Result<ValidationFold> {
    let cs = attrs.num_seen();
    if split.num_val_classes == 0 || split.num_val_classes >= cs {
        return Err(Error::invalid(format!(
            "num_val_classes must lie in 1..{cs}, got {}",
            split.num_val_classes
        )));
    }
    if !(0.0..1.0).contains(&split.holdout_fraction) {
        return Err(Error::invalid("holdout_fraction must lie in [0, 1)"));
    }
    train_set.ensure_seen_only(cs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(split.seed);
    let mut seen: Vec<usize> = (0..cs).collect();
    seen.shuffle(&mut rng);
    let mut val_classes = seen[..split.num_val_classes].to_vec();
    let mut kept = seen[split.num_val_classes..].to_vec();
    val_classes.sort_unstable();
    kept.sort_unstable();

    let classes: Vec<usize> = kept.iter().chain(&val_classes).copied().collect();
    let mut new_index = vec![usize::MAX; cs];
    for (i, &k) in classes.iter().enumerate() {
        new_index[k] = i;
    }
    let fold_attrs = attrs.select(&classes, kept.len())?;
    let nc = classes.len();

    let mut train_idx = Vec::new();
    let mut seen_idx = Vec::new();
    let mut unseen_idx = Vec::new();
    for &k in &kept {
        let mut members: Vec<usize> = (0..train_set.len())
            .filter(|&i| train_set.label(i) == k)
            .collect();
        members.shuffle(&mut rng);
        let mut hold = (split.holdout_fraction * members.len() as f64).round() as usize;
        if split.holdout_fraction > 0.0 && members.len() >= 2 {
            hold = hold.clamp(1, members.len() - 1);
        }
        seen_idx.extend_from_slice(&members[..hold]);
        train_idx.extend_from_slice(&members[hold..]);
    }
    for i in 0..train_set.len() {
        if val_classes.contains(&train_set.label(i)) {
            unseen_idx.push(i);
        }
    }
    for v in [&mut train_idx, &mut seen_idx] {
        v.sort_unstable();
    }
    let remap = |idx: &[usize]| train_set.subset(idx).relabel(|l| new_index[l], nc);
    Ok(ValidationFold {
        attrs: fold_attrs,
        train: remap(&train_idx)?,
        val_seen: remap(&seen_idx)?,
        val_unseen: remap(&unseen_idx)?,
        classes,
    })
}

#[derive(Clone, Debug)]
pub struct CrossValidation {
    pub best_index: usize,
    pub best: TrainConfig,
    /// Validation metrics per grid entry, in grid order.
    pub metrics: Vec<GzslMetrics>,
}

/// Trains every config on `fold.train` and keeps the one with the highest
/// validation harmonic accuracy; ties go to the earliest grid entry.
pub fn cross_validate_fold(grid: &[TrainConfig], fold: &ValidationFold) -> Result<CrossValidation> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("hyperparameter grid"));
    }
    let metrics = grid
        .par_iter()
        .map(|cfg| {
            let (params, _) = train(cfg, &fold.attrs, &fold.train, None)?;
            let (seen, unseen) = if cfg.l2_normalize {
                (l2_normalize(&fold.val_seen), l2_normalize(&fold.val_unseen))
            } else {
                (fold.val_seen.clone(), fold.val_unseen.clone())
            };
            evaluate_gzsl(&params, &seen, &unseen)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best_index = 0;
    for (i, m) in metrics.iter().enumerate() {
        if m.a_harmonic > metrics[best_index].a_harmonic {
            best_index = i;
        }
    }
    Ok(CrossValidation {
        best_index,
        best: grid[best_index].clone(),
        metrics,
    })
}

pub fn cross_validate(
    grid: &[TrainConfig],
    attrs: &AttributeMatrix,
    train_set: &FeatureSet,
    split: &ValSplit,
) -> Result<CrossValidation> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("hyperparameter grid"));
    }
    let fold = make_validation_fold(attrs, train_set, split)?;
    cross_validate_fold(grid, &fold)
}

/// Cartesian grid over the tuned hyperparameters; empty lists keep the base value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridSpec {
    pub tau: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub q: Vec<f64>,
    pub hidden_size: Vec<usize>,
    pub activation: Vec<Activation>,
}

impl GridSpec {
    /// Points spanning the ranges tuned for the real benchmarks.
    pub fn reference() -> Self {
        GridSpec {
            tau: vec![0.01, 0.1, 0.2, 1.0, 10.0],
            batch_size: vec![64, 128, 256, 512, 1024],
            q: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            hidden_size: vec![128, 256, 512, 1024, 1500],
            activation: Activation::ALL.to_vec(),
        }
    }

    pub fn expand(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        fn or_base<T: Clone>(v: &[T], b: T) -> Vec<T> {
            if v.is_empty() {
                vec![b]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &tau in &or_base(&self.tau, base.tau) {
            for &batch_size in &or_base(&self.batch_size, base.batch_size) {
                for &q in &or_base(&self.q, base.q) {
                    for &hidden_size in &or_base(&self.hidden_size, base.hidden_size) {
                        for &activation in &or_base(&self.activation, base.activation) {
                            out.push(TrainConfig {
                                tau,
                                batch_size,
                                q,
                                hidden_size,
                                activation,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
