//! Similarity-based soft labels over unseen classes.
//!
//! Every seen class `s` gets one label vector of length `C`: mass `1 - q` on
//! `s` itself and mass `q` spread over the unseen classes, either all on the
//! most similar unseen class (NU) or by a temperature softmax over the raw
//! seen-to-unseen attribute dot products (DU).

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::data::AttributeMatrix;
use crate::error::{Error, Result};
use crate::numeric::{argmax, dot, softmax, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SoftLabelMode {
    /// Nearest unseen class takes all of `q`.
    Nearest,
    /// `q` distributed by temperature softmax over similarities.
    Distribution,
}

impl fmt::Display for SoftLabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SoftLabelMode::Nearest => "nu",
            SoftLabelMode::Distribution => "du",
        })
    }
}

impl FromStr for SoftLabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nu" => Ok(SoftLabelMode::Nearest),
            "du" => Ok(SoftLabelMode::Distribution),
            other => Err(Error::invalid(format!("unknown soft-label mode `{other}` (nu|du)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftLabelConfig {
    pub mode: SoftLabelMode,
    /// Total probability mass placed on unseen classes.
    pub q: f64,
    /// Temperature; only read in DU mode.
    pub tau: f64,
}

impl SoftLabelConfig {
    pub fn new(mode: SoftLabelMode, q: f64, tau: f64) -> Result<Self> {
        let cfg = SoftLabelConfig { mode, q, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        check_tau(self.tau)
    }
}

fn check_q(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::invalid(format!("q must lie in [0, 1], got {q}")))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("tau must be positive, got {tau}")))
    }
}

fn check_seen(attrs: &AttributeMatrix, seen_class: usize) -> Result<()> {
    if seen_class < attrs.num_seen() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "class {seen_class} is not a seen class (C_S = {})",
            attrs.num_seen()
        )))
    }
}

/// `C_S × C_U` matrix of raw dot products `⟨a_s, a_u⟩`.
pub fn seen_unseen_similarity(attrs: &AttributeMatrix) -> Matrix {
    let mut sim = Matrix::zeros(attrs.num_seen(), attrs.num_unseen());
    for s in attrs.seen_classes() {
        for (j, u) in attrs.unseen_classes().enumerate() {
            sim[(s, j)] = dot(attrs.vector(s), attrs.vector(u));
        }
    }
    sim
}

fn similarity_row(attrs: &AttributeMatrix, seen_class: usize) -> Vec<f64> {
    let a_s = attrs.vector(seen_class);
    attrs
        .unseen_classes()
        .map(|u| dot(a_s, attrs.vector(u)))
        .collect()
}

/// Unseen part of a DU label: `q · softmax(similarities / τ)`.
pub fn distribute_unseen_mass(similarities: &[f64], q: f64, tau: f64) -> Result<Vec<f64>> {
    check_q(q)?;
    let mut p = softmax(similarities, tau)?;
    p.iter_mut().for_each(|v| *v *= q);
    Ok(p)
}

fn assemble(attrs: &AttributeMatrix, seen_class: usize, q: f64, unseen: &[f64]) -> Vec<f64> {
    let mut label = vec![0.0; attrs.num_classes()];
    label[seen_class] = 1.0 - q;
    label[attrs.num_seen()..].copy_from_slice(unseen);
    label
}

pub fn soft_label_du(seen_class: usize, attrs: &AttributeMatrix, q: f64, tau: f64) -> Result<Vec<f64>> {
    check_seen(attrs, seen_class)?;
    check_q(q)?;
    check_tau(tau)?;
    let unseen = distribute_unseen_mass(&similarity_row(attrs, seen_class), q, tau)?;
    Ok(assemble(attrs, seen_class, q, &unseen))
}

pub fn soft_label_nu(seen_class: usize, attrs: &AttributeMatrix, q: f64) -> Result<Vec<f64>> {
    check_seen(attrs, seen_class)?;
    check_q(q)?;
    let sim = similarity_row(attrs, seen_class);
    let nearest = argmax(&sim).expect("at least one unseen class");
    let mut unseen = vec![0.0; sim.len()];
    unseen[nearest] = q;
    Ok(assemble(attrs, seen_class, q, &unseen))
}

/// One soft label per seen class.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabelTable {
    rows: Matrix,
    q: f64,
}

impl SoftLabelTable {
    pub fn build(attrs: &AttributeMatrix, config: &SoftLabelConfig) -> Result<Self> {
        config.validate()?;
        let rows = attrs
            .seen_classes()
            .map(|s| match config.mode {
                SoftLabelMode::Nearest => soft_label_nu(s, attrs, config.q),
                SoftLabelMode::Distribution => soft_label_du(s, attrs, config.q, config.tau),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SoftLabelTable {
            rows: Matrix::from_rows(&rows)?,
            q: config.q,
        })
    }

    /// One-hot labels (`q = 0`) for `num_seen` seen classes out of `num_classes`.
    pub fn one_hot(num_seen: usize, num_classes: usize) -> Self {
        let mut rows = Matrix::zeros(num_seen, num_classes);
        for s in 0..num_seen {
            rows[(s, s)] = 1.0;
        }
        SoftLabelTable { rows, q: 0.0 }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn num_seen(&self) -> usize {
        self.rows.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.rows.cols()
    }

    /// Label vector for a sample of seen class `class`.
    pub fn row(&self, class: usize) -> &[f64] {
        self.rows.row(class)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.rows
    }

    /// `class,<name_0>,…,<name_{C-1}>` header, then one row per seen class.
    pub fn to_csv(&self, attrs: &AttributeMatrix) -> String {
        let mut out = String::from("class");
        for name in attrs.class_names() {
            let _ = write!(out, ",{name}");
        }
        out.push('\n');
        for s in 0..self.num_seen() {
            out.push_str(attrs.class_name(s));
            for v in self.row(s) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_table(attrs: &AttributeMatrix, config: &SoftLabelConfig) -> Result<SoftLabelTable> {
    SoftLabelTable::build(attrs, config)
}

/// Shannon entropy (nats) of the unseen coordinates `label[num_seen..]`
/// after renormalizing them to sum to one.
pub fn unseen_entropy(label: &[f64], num_seen: usize) -> Result<f64> {
    if num_seen >= label.len() {
        return Err(Error::invalid("label has no unseen coordinates"));
    }
    let unseen = &label[num_seen..];
    let mass: f64 = unseen.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::invalid("unseen entropy undefined for zero unseen mass"));
    }
    Ok(unseen
        .iter()
        .map(|&v| v / mass)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_attrs(rng: &mut ChaCha8Rng, seen: usize, unseen: usize, dim: usize) -> AttributeMatrix {
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        };
        let s = draw(seen);
        let u = draw(unseen);
        AttributeMatrix::new(&s, &u).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let e = |i: usize| {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        let attrs = AttributeMatrix::new(&[e(0), e(1)], &[e(2), e(3)]).unwrap();
        assert!(seen_unseen_similarity(&attrs).as_slice().iter().all(|&v| v == 0.0));

        let attrs = AttributeMatrix::new(&[vec![1.0, 2.0]], &[vec![3.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(seen_unseen_similarity(&attrs)[(0, 1)], 5.0);
    }

    #[test]
    fn similarity_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let attrs = random_attrs(&mut rng, 4, 3, 6);
        let sim = seen_unseen_similarity(&attrs);
        for s in 0..4 {
            for u in 0..3 {
                let mut acc = 0.0;
                for j in 0..6 {
                    acc += attrs.vector(s)[j] * attrs.vector(4 + u)[j];
                }
                assert!((sim[(s, u)] - acc).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn du_worked_example() {
        let attrs = AttributeMatrix::new(&[vec![1.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = soft_label_du(0, &attrs, 0.3, 1.0).unwrap();
        // 0.3·e/(e+1), 0.3/(e+1) evaluated at 30 digits
        assert!((y[0] - 0.7).abs() < 1e-15);
        assert!((y[1] - 0.219_317_573_589_001_46).abs() < 1e-15);
        assert!((y[2] - 0.080_682_426_410_998_53).abs() < 1e-15);
    }

    #[test]
    fn du_symmetric_split_and_zero_mass() {
        let attrs = AttributeMatrix::new(
            &[vec![1.0, 1.0], vec![0.0, 1.0]],
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let y = soft_label_du(0, &attrs, 0.4, 0.7).unwrap();
        assert!((y[2] - 0.2).abs() < 1e-15 && (y[3] - 0.2).abs() < 1e-15);
        assert_eq!(soft_label_du(1, &attrs, 0.0, 0.5).unwrap(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn nu_examples() {
        let attrs = AttributeMatrix::new(
            &[vec![1.0, 0.0, 0.0]],
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]],
        )
        .unwrap();
        // similarities [1, 0, 1]: tie between unseen #0 and #2
        assert_eq!(soft_label_nu(0, &attrs, 0.25).unwrap(), vec![0.75, 0.25, 0.0, 0.0]);

        let attrs = AttributeMatrix::new(&[vec![0.0, 1.0]], &[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(soft_label_nu(0, &attrs, 0.1).unwrap(), vec![0.9, 0.0, 0.1]);
    }

    #[test]
    fn invalid_arguments() {
        let attrs = AttributeMatrix::new(&[vec![1.0]], &[vec![2.0]]).unwrap();
        assert!(soft_label_du(1, &attrs, 0.1, 1.0).is_err());
        assert!(soft_label_du(0, &attrs, 1.1, 1.0).is_err());
        assert!(soft_label_du(0, &attrs, 0.1, 0.0).is_err());
        assert!(soft_label_nu(0, &attrs, -0.1).is_err());
        assert!(SoftLabelConfig::new(SoftLabelMode::Distribution, 0.5, -2.0).is_err());
    }

    #[test]
    fn table_matches_per_row_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let attrs = random_attrs(&mut rng, 4, 3, 6);
        let cfg = SoftLabelConfig::new(SoftLabelMode::Distribution, 0.35, 0.8).unwrap();
        let table = build_table(&attrs, &cfg).unwrap();
        for s in 0..4 {
            assert_eq!(table.row(s), soft_label_du(s, &attrs, 0.35, 0.8).unwrap().as_slice());
            let sum: f64 = table.row(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let zero = build_table(
            &attrs,
            &SoftLabelConfig::new(SoftLabelMode::Nearest, 0.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(zero, SoftLabelTable::one_hot(4, 7));
    }

    #[test]
    fn entropy_examples() {
        let uniform = [0.5, 0.1, 0.1, 0.1, 0.1, 0.1];
        assert!((unseen_entropy(&uniform, 1).unwrap() - 5f64.ln()).abs() < 1e-12);
        assert_eq!(unseen_entropy(&[0.7, 0.0, 0.3], 1).unwrap(), 0.0);
        assert!(unseen_entropy(&[1.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn temperature_flattens_distribution() {
        let spec = crate::data::SynthSpec {
            dim_a: 85,
            num_seen: 40,
            num_unseen: 10,
            ..Default::default()
        };
        let attrs = crate::data::synth_generate(&spec).unwrap().attributes;
        let sim = seen_unseen_similarity(&attrs);
        let s = (0..40)
            .find(|&s| {
                let r = sim.row(s);
                r.iter().any(|&v| v != r[0])
            })
            .unwrap();
        let hot = unseen_entropy(&soft_label_du(s, &attrs, 0.5, 10.0).unwrap(), 40).unwrap();
        let cold = unseen_entropy(&soft_label_du(s, &attrs, 0.5, 0.01).unwrap(), 40).unwrap();
        assert!(hot > cold);
    }

    #[test]
    fn csv_has_one_row_per_seen_class() {
        let attrs = AttributeMatrix::new(&[vec![1.0], vec![2.0]], &[vec![3.0]]).unwrap();
        let cfg = SoftLabelConfig::new(SoftLabelMode::Nearest, 0.2, 1.0).unwrap();
        let csv = build_table(&attrs, &cfg).unwrap().to_csv(&attrs);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "class,class0,class1,class2");
        assert_eq!(lines[1], "class0,0.8,0,0.2");
        assert_eq!(lines.len(), 3);
    }
}
