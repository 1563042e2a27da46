//! The network: a two-layer embedding `g(x) = W2·act(W1·x + b1) + b2` into
//! attribute space, followed by a frozen output layer whose weights are the
//! class attribute vectors. Class scores are `s_k = ⟨g(x), a_k⟩` and class
//! probabilities are `softmax(s)` over all seen and unseen classes.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rand::Rng;

use crate::data::{AttributeMatrix, FeatureSet, Standardizer};
use crate::error::{Error, Result};
use crate::numeric::{argmax, softmax, Activation, Matrix};
use crate::softlabel::SoftLabelTable;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `h × d`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `a × h`
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub activation: Activation,
    attrs: AttributeMatrix,
}

impl ModelParams {
    pub fn new(
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
        activation: Activation,
        attrs: AttributeMatrix,
    ) -> Result<Self> {
        let (h, _) = w1.shape();
        let shape_err = |left, right| Error::DimensionMismatch {
            op: "ModelParams::new",
            left,
            right,
        };
        if b1.len() != h {
            return Err(shape_err(w1.shape(), (b1.len(), 1)));
        }
        if w2.cols() != h {
            return Err(shape_err(w1.shape(), w2.shape()));
        }
        if w2.rows() != attrs.dim() {
            return Err(shape_err(w2.shape(), (attrs.dim(), attrs.num_classes())));
        }
        if b2.len() != w2.rows() {
            return Err(shape_err(w2.shape(), (b2.len(), 1)));
        }
        Ok(ModelParams {
            w1,
            b1,
            w2,
            b2,
            activation,
            attrs,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden: usize,
        activation: Activation,
        attrs: AttributeMatrix,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::invalid("input and hidden sizes must be at least 1"));
        }
        let a = attrs.dim();
        let w1 = glorot(hidden, input_dim, rng);
        let w2 = glorot(a, hidden, rng);
        Self::new(w1, vec![0.0; hidden], w2, vec![0.0; a], activation, attrs)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w1.rows()
    }

    pub fn attrs(&self) -> &AttributeMatrix {
        &self.attrs
    }

    pub fn num_classes(&self) -> usize {
        self.attrs.num_classes()
    }

    /// Rewrites the first layer so the model consumes raw features that
    /// `standardizer` would otherwise have mapped first.
    pub fn fold_input_transform(&mut self, standardizer: &Standardizer) -> Result<()> {
        let d = self.input_dim();
        if standardizer.mean.len() != d {
            return Err(Error::DimensionMismatch {
                op: "fold_input_transform",
                left: self.w1.shape(),
                right: (standardizer.mean.len(), 1),
            });
        }
        for i in 0..self.hidden_size() {
            let row = self.w1.row_mut(i);
            let mut shift = 0.0;
            for j in 0..d {
                row[j] /= standardizer.std[j];
                shift += row[j] * standardizer.mean[j];
            }
            self.b1[i] -= shift;
        }
        Ok(())
    }

    pub fn trainables(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn trainables_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// Plain SGD update `θ ← θ − lr·∇θ`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        for (p, g) in self.trainables_mut().into_iter().zip(grads.slices()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= learning_rate * gi;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.trainables()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::new(rows, cols, data).expect("shape")
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RegConfig {
    /// Weight on the squared Frobenius norms.
    pub lambda_l2: f64,
    /// Weight on the elementwise L1 norms.
    pub gamma_l1: f64,
}

impl RegConfig {
    pub fn new(lambda_l2: f64, gamma_l1: f64) -> Result<Self> {
        let reg = RegConfig { lambda_l2, gamma_l1 };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_l2 >= 0.0 && self.gamma_l1 >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("regularization factors must be non-negative"))
        }
    }

    /// Penalty on the weight matrices; biases are not penalized.
    pub fn penalty(&self, params: &ModelParams) -> f64 {
        let l2 = params.w1.frobenius_sq() + params.w2.frobenius_sq();
        let l1 = params.w1.l1_norm() + params.w2.l1_norm();
        self.lambda_l2 * l2 + self.gamma_l1 * l1
    }

    fn add_grad(&self, w: &[f64], dw: &mut [f64]) {
        if self.lambda_l2 == 0.0 && self.gamma_l1 == 0.0 {
            return;
        }
        for (g, &v) in dw.iter_mut().zip(w) {
            let sign = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            *g += 2.0 * self.lambda_l2 * v + self.gamma_l1 * sign;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub dw1: Matrix,
    pub db1: Vec<f64>,
    pub dw2: Matrix,
    pub db2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            dw1: Matrix::zeros(params.w1.rows(), params.w1.cols()),
            db1: vec![0.0; params.b1.len()],
            dw2: Matrix::zeros(params.w2.rows(), params.w2.cols()),
            db2: vec![0.0; params.b2.len()],
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [self.dw1.as_slice(), &self.db1, self.dw2.as_slice(), &self.db2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.dw1.as_mut_slice(),
            &mut self.db1,
            self.dw2.as_mut_slice(),
            &mut self.db2,
        ]
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug)]
pub struct Forward {
    pub pre_activation: Vec<f64>,
    pub hidden: Vec<f64>,
    pub embedding: Vec<f64>,
    pub scores: Vec<f64>,
    pub proba: Vec<f64>,
}

pub fn forward(x: &[f64], params: &ModelParams) -> Result<Forward> {
    let mut pre_activation = params.w1.matvec(x)?;
    pre_activation
        .iter_mut()
        .zip(&params.b1)
        .for_each(|(z, b)| *z += b);
    let hidden = params.activation.apply(&pre_activation);
    let mut embedding = params.w2.matvec(&hidden)?;
    embedding
        .iter_mut()
        .zip(&params.b2)
        .for_each(|(g, b)| *g += b);
    let scores = params.attrs.class_rows().matvec(&embedding)?;
    let proba = softmax(&scores, 1.0)?;
    Ok(Forward {
        pre_activation,
        hidden,
        embedding,
        scores,
        proba,
    })
}

/// `g(x)`: the sample mapped into attribute space.
pub fn embed(x: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let mut z = params.w1.matvec(x)?;
    z.iter_mut().zip(&params.b1).for_each(|(v, b)| *v += b);
    let h = params.activation.apply(&z);
    let mut g = params.w2.matvec(&h)?;
    g.iter_mut().zip(&params.b2).for_each(|(v, b)| *v += b);
    Ok(g)
}

/// `Aᵀ·g(x)`: one dot-product score per class.
pub fn scores(x: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    params.attrs.class_rows().matvec(&embed(x, params)?)
}

pub fn predict_proba(x: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    softmax(&scores(x, params)?, 1.0)
}

/// Highest-scoring class among all `C` classes.
pub fn predict(x: &[f64], params: &ModelParams) -> Result<usize> {
    Ok(argmax(&scores(x, params)?).expect("C >= 2"))
}

fn check_batch(batch: &FeatureSet, labels: &SoftLabelTable, params: &ModelParams) -> Result<()> {
    if batch.dim() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "loss",
            left: params.w1.shape(),
            right: (batch.len(), batch.dim()),
        });
    }
    if labels.num_classes() != params.num_classes() {
        return Err(Error::DimensionMismatch {
            op: "loss",
            left: (labels.num_seen(), labels.num_classes()),
            right: (params.attrs.num_seen(), params.num_classes()),
        });
    }
    batch.ensure_seen_only(labels.num_seen())
}

fn cross_entropy(label: &[f64], proba: &[f64]) -> f64 {
    label
        .iter()
        .zip(proba)
        .filter(|(&y, _)| y != 0.0)
        .map(|(&y, &p)| -y * p.max(LOG_FLOOR).ln())
        .sum()
}

/// Mean cross-entropy and (optionally) its gradient over `indices` of `set`,
/// without the weight penalty.
fn data_term(
    set: &FeatureSet,
    indices: &[usize],
    labels: &SoftLabelTable,
    params: &ModelParams,
    mut grads: Option<&mut Gradients>,
) -> Result<f64> {
    let scale = 1.0 / indices.len() as f64;
    let mut total = 0.0;
    let mut d_scores = vec![0.0; params.num_classes()];
    for &i in indices {
        let x = set.feature(i);
        let y = labels.row(set.label(i));
        let fw = forward(x, params)?;
        total += cross_entropy(y, &fw.proba);

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        let y_mass: f64 = y.iter().sum();
        for ((d, &p), &t) in d_scores.iter_mut().zip(&fw.proba).zip(y) {
            *d = scale * (p * y_mass - t);
        }
        // back through the frozen attribute layer: dg = Σ_k ds_k a_k
        let d_emb = params.attrs.class_rows().transpose_matvec(&d_scores)?;
        g.dw2.add_outer(1.0, &d_emb, &fw.hidden);
        g.db2.iter_mut().zip(&d_emb).for_each(|(a, b)| *a += b);
        let d_hidden = params.w2.transpose_matvec(&d_emb)?;
        let d_pre: Vec<f64> = d_hidden
            .iter()
            .zip(&fw.pre_activation)
            .map(|(dh, &z)| dh * params.activation.derivative(z))
            .collect();
        g.dw1.add_outer(1.0, &d_pre, x);
        g.db1.iter_mut().zip(&d_pre).for_each(|(a, b)| *a += b);
    }
    Ok(total * scale)
}

/// Loss and gradient over the samples `indices` of `set`.
pub fn batch_loss_and_gradients(
    set: &FeatureSet,
    indices: &[usize],
    labels: &SoftLabelTable,
    params: &ModelParams,
    reg: &RegConfig,
) -> Result<(f64, Gradients)> {
    if indices.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    check_batch(set, labels, params)?;
    let mut grads = Gradients::zeros_like(params);
    let ce = data_term(set, indices, labels, params, Some(&mut grads))?;
    reg.add_grad(params.w1.as_slice(), grads.dw1.as_mut_slice());
    reg.add_grad(params.w2.as_slice(), grads.dw2.as_mut_slice());
    Ok((ce + reg.penalty(params), grads))
}

/// Mean soft-label cross-entropy over `batch` plus the weight penalty.
/// Each sample's target is the table row of its (seen) class.
pub fn loss(
    batch: &FeatureSet,
    labels: &SoftLabelTable,
    params: &ModelParams,
    reg: &RegConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    check_batch(batch, labels, params)?;
    let all: Vec<usize> = (0..batch.len()).collect();
    Ok(data_term(batch, &all, labels, params, None)? + reg.penalty(params))
}

pub fn loss_and_gradients(
    batch: &FeatureSet,
    labels: &SoftLabelTable,
    params: &ModelParams,
    reg: &RegConfig,
) -> Result<(f64, Gradients)> {
    let all: Vec<usize> = (0..batch.len()).collect();
    batch_loss_and_gradients(batch, &all, labels, params, reg)
}

/// Analytic gradient of [`loss`] with respect to `W1, b1, W2, b2`.
pub fn gradients(
    batch: &FeatureSet,
    labels: &SoftLabelTable,
    params: &ModelParams,
    reg: &RegConfig,
) -> Result<Gradients> {
    Ok(loss_and_gradients(batch, labels, params, reg)?.1)
}

/// Cross-entropy split into a seen-class term, an unseen-class term and the
/// binary term between label and predicted seen/unseen mass:
///
/// `CE = (1−q)·seen_ce + q·unseen_ce + split_ce`
///
/// `seen_ce` and `unseen_ce` use labels and probabilities renormalized
/// within the seen and unseen blocks respectively.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossDecomposition {
    pub seen_ce: f64,
    pub unseen_ce: f64,
    pub split_ce: f64,
}

impl LossDecomposition {
    pub fn recombine(&self, q: f64) -> f64 {
        (1.0 - q) * self.seen_ce + q * self.unseen_ce + self.split_ce
    }
}

pub fn loss_decomposition(
    batch: &FeatureSet,
    labels: &SoftLabelTable,
    params: &ModelParams,
) -> Result<LossDecomposition> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("loss batch"));
    }
    check_batch(batch, labels, params)?;
    let q = labels.q();
    let cs = params.attrs.num_seen();
    let mut out = LossDecomposition {
        seen_ce: 0.0,
        unseen_ce: 0.0,
        split_ce: 0.0,
    };
    for (x, class) in batch.iter() {
        let y = labels.row(class);
        let p = predict_proba(x, params)?;
        let log_p: Vec<f64> = p.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
        let log_ps = p[..cs].iter().sum::<f64>().max(LOG_FLOOR).ln();
        let log_pu = p[cs..].iter().sum::<f64>().max(LOG_FLOOR).ln();
        let block_ce = |range: std::ops::Range<usize>, mass: f64, log_norm: f64| -> f64 {
            if mass == 0.0 {
                return 0.0;
            }
            range
                .filter(|&k| y[k] != 0.0)
                .map(|k| -(y[k] / mass) * (log_p[k] - log_norm))
                .sum()
        };
        out.seen_ce += block_ce(0..cs, 1.0 - q, log_ps);
        out.unseen_ce += block_ce(cs..y.len(), q, log_pu);
        let mut split = 0.0;
        if q < 1.0 {
            split -= (1.0 - q) * log_ps;
        }
        if q > 0.0 {
            split -= q * log_pu;
        }
        out.split_ce += split;
    }
    let n = batch.len() as f64;
    out.seen_ce /= n;
    out.unseen_ce /= n;
    out.split_ce /= n;
    Ok(out)
}
