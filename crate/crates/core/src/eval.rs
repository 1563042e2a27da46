//! GZSL / ZSL accuracy and hyperparameter sweeps.
//!
//! Accuracies are per-class (macro) averages: each class present in the test
//! split contributes its own hit rate, and classes absent from the split are
//! skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{AttributeMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::model::{scores, ModelParams};
use crate::numeric::argmax;
use crate::train::{train, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GzslMetrics {
    pub a_seen: f64,
    pub a_unseen: f64,
    pub a_harmonic: f64,
}

impl GzslMetrics {
    pub fn new(a_seen: f64, a_unseen: f64) -> Self {
        GzslMetrics {
            a_seen,
            a_unseen,
            a_harmonic: harmonic(a_seen, a_unseen),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "a_seen": self.a_seen,
            "a_unseen": self.a_unseen,
            "a_harmonic": self.a_harmonic,
        })
    }
}

/// `2·a_s·a_u / (a_s + a_u)`, or 0 when both are 0.
pub fn harmonic(a_seen: f64, a_unseen: f64) -> f64 {
    let sum = a_seen + a_unseen;
    if sum > 0.0 {
        2.0 * a_seen * a_unseen / sum
    } else {
        0.0
    }
}

/// Mean over the classes of `class_set` that occur in `truths` of the
/// fraction of that class's samples predicted correctly.
pub fn per_class_accuracy(predictions: &[usize], truths: &[usize], class_set: &[usize]) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::EmptyInput("accuracy inputs"));
    }
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            op: "per_class_accuracy",
            left: (predictions.len(), 1),
            right: (truths.len(), 1),
        });
    }
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (&p, &t) in predictions.iter().zip(truths) {
        if !class_set.contains(&t) {
            return Err(Error::invalid(format!("true class {t} is not in the evaluated class set")));
        }
        let e = tally.entry(t).or_default();
        e.1 += 1;
        if p == t {
            e.0 += 1;
        }
    }
    let sum: f64 = tally
        .values()
        .map(|&(hit, total)| hit as f64 / total as f64)
        .sum();
    Ok(sum / tally.len() as f64)
}

fn predictions(params: &ModelParams, set: &FeatureSet, candidates: std::ops::Range<usize>) -> Result<Vec<usize>> {
    if set.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "evaluate",
            left: params.w1.shape(),
            right: (set.len(), set.dim()),
        });
    }
    set.iter()
        .map(|(x, _)| {
            let s = scores(x, params)?;
            let offset = candidates.start;
            Ok(offset + argmax(&s[candidates.clone()]).expect("non-empty candidate set"))
        })
        .collect()
}

fn range_vec(r: std::ops::Range<usize>) -> Vec<usize> {
    r.collect()
}

/// Argmax over all classes; `A_S` from `test_seen`, `A_U` from `test_unseen`.
pub fn evaluate_gzsl(params: &ModelParams, test_seen: &FeatureSet, test_unseen: &FeatureSet) -> Result<GzslMetrics> {
    if test_seen.is_empty() || test_unseen.is_empty() {
        return Err(Error::EmptyInput("GZSL test split"));
    }
    let attrs = params.attrs();
    let all = 0..attrs.num_classes();
    let seen_pred = predictions(params, test_seen, all.clone())?;
    let unseen_pred = predictions(params, test_unseen, all)?;
    let a_seen = per_class_accuracy(&seen_pred, test_seen.labels(), &range_vec(attrs.seen_classes()))?;
    let a_unseen = per_class_accuracy(&unseen_pred, test_unseen.labels(), &range_vec(attrs.unseen_classes()))?;
    Ok(GzslMetrics::new(a_seen, a_unseen))
}

/// Per-class accuracy on `test_unseen` with the argmax restricted to unseen classes.
pub fn evaluate_zsl(params: &ModelParams, test_unseen: &FeatureSet) -> Result<f64> {
    if test_unseen.is_empty() {
        return Err(Error::EmptyInput("ZSL test split"));
    }
    let unseen = params.attrs().unseen_classes();
    let pred = predictions(params, test_unseen, unseen.clone())?;
    per_class_accuracy(&pred, test_unseen.labels(), &range_vec(unseen))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Q,
    Tau,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Q => "q",
            SweepParam::Tau => "tau",
        })
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(SweepParam::Q),
            "tau" => Ok(SweepParam::Tau),
            other => Err(Error::invalid(format!("unknown sweep parameter `{other}` (q|tau)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: GzslMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    /// Sorted by swept value.
    pub rows: Vec<SweepRow>,
    /// Row with the highest `A_H` (earliest on ties).
    pub best: usize,
}

impl Sweep {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }

    /// `param,a_seen,a_unseen,a_harmonic` with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,a_seen,a_unseen,a_harmonic\n");
        for r in &self.rows {
            let m = r.metrics;
            let _ = writeln!(
                out,
                "{:.6},{:.6},{:.6},{:.6}",
                r.value, m.a_seen, m.a_unseen, m.a_harmonic
            );
        }
        out
    }
}

/// Training and test splits for sweeps.
#[derive(Clone, Copy, Debug)]
pub struct DataSplits<'a> {
    pub train: &'a FeatureSet,
    pub test_seen: &'a FeatureSet,
    pub test_unseen: &'a FeatureSet,
}

/// Retrains `base` once per value (same seed throughout) and evaluates GZSL.
pub fn sweep(
    base: &TrainConfig,
    attrs: &AttributeMatrix,
    data: DataSplits<'_>,
    param: SweepParam,
    values: &[f64],
) -> Result<Sweep> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values"));
    }
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    let configs = values
        .iter()
        .map(|&v| {
            let cfg = match param {
                SweepParam::Q => TrainConfig { q: v, ..base.clone() },
                SweepParam::Tau => TrainConfig { tau: v, ..base.clone() },
            };
            cfg.validate()?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let prep = |s: &FeatureSet| {
        if base.l2_normalize {
            crate::data::l2_normalize(s)
        } else {
            s.clone()
        }
    };
    let (test_seen, test_unseen) = (prep(data.test_seen), prep(data.test_unseen));
    let rows = configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &value)| {
            let (params, _) = train(cfg, attrs, data.train, None)?;
            Ok(SweepRow {
                value,
                metrics: evaluate_gzsl(&params, &test_seen, &test_unseen)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.metrics.a_harmonic > rows[best].metrics.a_harmonic {
            best = i;
        }
    }
    Ok(Sweep { param, rows, best })
}

pub fn sweep_q(base: &TrainConfig, attrs: &AttributeMatrix, data: DataSplits<'_>, q_values: &[f64]) -> Result<Sweep> {
    sweep(base, attrs, data, SweepParam::Q, q_values)
}

pub fn sweep_tau(base: &TrainConfig, attrs: &AttributeMatrix, data: DataSplits<'_>, tau_values: &[f64]) -> Result<Sweep> {
    sweep(base, attrs, data, SweepParam::Tau, tau_values)
}
