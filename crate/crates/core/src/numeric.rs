//! Dense row-major `f64` kernels shared by the rest of the crate.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`; only matrices get a dedicated
//! type so that shape errors can be reported with both operands' shapes.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "Matrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "Matrix::from_rows",
                    left: (0, cols),
                    right: (i, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Elementwise L1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "transpose_matvec",
                left: (self.cols, self.rows),
                right: (x.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        Ok(out)
    }

    /// Adds `alpha · u vᵀ` in place.
    pub fn add_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (i, &ui) in u.iter().enumerate() {
            let s = alpha * ui;
            if s != 0.0 {
                axpy(s, v, self.row_mut(i));
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                axpy(aik, b.row(k), out_row);
            }
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        match best {
            Some(b) if v[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Temperature softmax `exp(v_k/τ) / Σ_j exp(v_j/τ)`, evaluated after
/// subtracting the maximum so large inputs cannot overflow.
pub fn softmax(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!(
            "softmax temperature must be positive, got {tau}"
        )));
    }
    if v.is_empty() {
        return Err(Error::EmptyInput("softmax input"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("softmax input contains non-finite values"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| ((x - max) / tau).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sigmoid,
    /// `clip(0.2x + 0.5, 0, 1)`
    HardSigmoid,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::HardSigmoid,
        Activation::Relu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::HardSigmoid => "hard-sigmoid",
            Activation::Relu => "relu",
        }
    }

    /// Stable code used by the checkpoint format.
    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
            Activation::HardSigmoid => 2,
            Activation::Relu => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Activation::ALL.into_iter().find(|a| a.code() == code)
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::HardSigmoid => (0.2 * x + 0.5).clamp(0.0, 1.0),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at `x`. Kinks (relu at 0, hard-sigmoid at ±2.5) get 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::HardSigmoid => {
                if x > -2.5 && x < 2.5 {
                    0.2
                } else {
                    0.0
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply(self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }

    pub fn grad(self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.derivative(v)).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "hard-sigmoid" | "hard_sigmoid" | "hardsigmoid" => Ok(Activation::HardSigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// `activation(name, x)` with the name parsed at the call site.
pub fn activation(name: &str, x: &[f64]) -> Result<Vec<f64>> {
    Ok(name.parse::<Activation>()?.apply(x))
}

pub fn activation_grad(name: &str, x: &[f64]) -> Result<Vec<f64>> {
    Ok(name.parse::<Activation>()?.grad(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::new(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &b).unwrap(), b);
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.as_slice(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 5, 7);
        let b = random_matrix(&mut rng, 7, 3);
        let c = matmul(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..7 {
                    s += a.as_slice()[i * 7 + k] * b.as_slice()[k * 3 + j];
                }
                assert!((c[(i, j)] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                left: (2, 3),
                right: (2, 3),
                ..
            }
        ));
    }

    #[test]
    fn matmul_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 8, 8);
            let b = random_matrix(&mut rng, 8, 8);
            let c = random_matrix(&mut rng, 8, 8);
            let l = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let r = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in l.as_slice().iter().zip(r.as_slice()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
            }
        }
    }

    #[test]
    fn transpose_matvec_matches_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 6);
        let x: Vec<f64> = (0..4).map(|i| i as f64 - 1.5).collect();
        let l = a.transpose_matvec(&x).unwrap();
        let r = a.transpose().matvec(&x).unwrap();
        for (p, q) in l.iter().zip(&r) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_examples() {
        for c in [-50.0, 0.0, 3.5, 700.0] {
            let p = softmax(&[c, c, c], 1.0).unwrap();
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let p = softmax(&[1f64.ln(), 3f64.ln()], 1.0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
        let p = softmax(&[1.0, 0.0], 0.001).unwrap();
        assert!(p[0] > 1.0 - 1e-12 && p[1] < 1e-12);
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(matches!(
            softmax(&[1.0], 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(softmax(&[1.0], -1.0).is_err());
    }

    #[test]
    fn activation_examples() {
        let relu = activation("relu", &[-2.0, 3.0]).unwrap();
        assert_eq!(relu, vec![0.0, 3.0]);
        assert_eq!(activation("sigmoid", &[0.0]).unwrap(), vec![0.5]);
        assert_eq!(activation("tanh", &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(activation("hard-sigmoid", &[0.0, 10.0]).unwrap(), vec![0.5, 1.0]);
        assert!(matches!(
            activation("swish", &[0.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(activation_grad("gelu", &[0.0]).is_err());
        // kink conventions
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::HardSigmoid.derivative(2.5), 0.0);
        assert_eq!(Activation::HardSigmoid.derivative(-2.5), 0.0);
    }

    #[test]
    fn activation_code_roundtrip() {
        for a in Activation::ALL {
            assert_eq!(Activation::from_code(a.code()), Some(a));
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
        }
        assert_eq!(Activation::from_code(9), None);
    }

    fn away_from_kinks(a: Activation, x: f64) -> bool {
        match a {
            Activation::Relu => x.abs() > 1e-3,
            Activation::HardSigmoid => (x - 2.5).abs() > 1e-3 && (x + 2.5).abs() > 1e-3,
            _ => true,
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-500.0f64..500.0, 1..20), tau in 1e-3f64..50.0) {
            let p = softmax(&v, tau).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|&x| x >= 0.0 && x <= 1.0));
        }

        #[test]
        fn softmax_shift_invariant(v in prop::collection::vec(-20.0f64..20.0, 1..10), c in -100.0f64..100.0, tau in 0.01f64..10.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = softmax(&v, tau).unwrap();
            let b = softmax(&shifted, tau).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_argmax(v in prop::collection::vec(-20.0f64..20.0, 2..10), tau in 0.01f64..10.0) {
            let am = argmax(&v).unwrap();
            prop_assume!(v.iter().enumerate().all(|(i, &x)| i == am || x < v[am]));
            let p = softmax(&v, tau).unwrap();
            prop_assert_eq!(argmax(&p), Some(am));
        }

        #[test]
        fn activation_grad_matches_central_difference(x in -6.0f64..6.0, which in 0usize..4) {
            let act = Activation::ALL[which];
            prop_assume!(away_from_kinks(act, x));
            let h = 1e-6;
            let fd = (act.eval(x + h) - act.eval(x - h)) / (2.0 * h);
            prop_assert!((fd - act.derivative(x)).abs() <= 1e-6);
        }
    }
}
