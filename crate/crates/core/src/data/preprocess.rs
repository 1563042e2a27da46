use crate::data::FeatureSet;
use crate::error::{Error, Result};

/// Dimensions whose standard deviation falls below this are only centered.
pub const MIN_STD: f64 = 1e-12;

/// Per-dimension affine transform `(x - mean) / std` fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Divisor per dimension; 1 for near-constant dimensions.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &FeatureSet) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput("standardization training set"));
        }
        let n = train.len() as f64;
        let d = train.dim();
        let mut mean = vec![0.0; d];
        for (x, _) in train.iter() {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for (x, _) in train.iter() {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < MIN_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply_row(&self, x: &mut [f64]) {
        for ((v, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn transform(&self, set: &FeatureSet) -> Result<FeatureSet> {
        if set.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                op: "Standardizer::transform",
                left: (self.mean.len(), 1),
                right: (set.dim(), 1),
            });
        }
        Ok(set.map_features(|x| self.apply_row(x)))
    }
}

/// Fits on `train` and applies the same transform to `train` and every set in `others`.
pub fn standardize(
    train: &FeatureSet,
    others: &[&FeatureSet],
) -> Result<(FeatureSet, Vec<FeatureSet>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    let train_t = st.transform(train)?;
    let others_t = others
        .iter()
        .map(|s| st.transform(s))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_t, others_t, st))
}

/// Scales every sample to unit Euclidean norm (zero rows stay zero).
pub fn l2_normalize(set: &FeatureSet) -> FeatureSet {
    set.map_features(|x| {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|v| *v /= norm);
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(rows: &[&[f64]]) -> FeatureSet {
        let m = Matrix::from_rows(rows).unwrap();
        let n = m.rows();
        FeatureSet::new(m, vec![0; n], 1).unwrap()
    }

    fn moments(s: &FeatureSet, j: usize) -> (f64, f64) {
        let n = s.len() as f64;
        let mean = s.iter().map(|(x, _)| x[j]).sum::<f64>() / n;
        let var = s.iter().map(|(x, _)| (x[j] - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn constant_dimension_is_centered_not_scaled() {
        let s = set(&[&[5.0, 1.0], &[5.0, 3.0]]);
        let (t, _, st) = standardize(&s, &[]).unwrap();
        assert_eq!(st.std[0], 1.0);
        assert_eq!(t.feature(0)[0], 0.0);
        assert_eq!(t.feature(0)[1], -1.0);
        assert_eq!(t.feature(1)[1], 1.0);
    }

    #[test]
    fn random_data_has_zero_mean_unit_std_and_transfers() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..5).map(|j| rng.random_range(-3.0..7.0) * (j + 1) as f64).collect())
            .collect();
        let train = FeatureSet::new(Matrix::from_rows(&rows).unwrap(), vec![0; 200], 1).unwrap();
        let other = train.subset(&[3, 4]);
        let (t, o, _) = standardize(&train, &[&other]).unwrap();
        for j in 0..5 {
            let (m, s) = moments(&t, j);
            assert!(m.abs() < 1e-10);
            assert!((s - 1.0).abs() < 1e-10);
        }
        assert_eq!(o[0].feature(1), t.feature(4));
    }

    #[test]
    fn idempotent_on_standardized_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let train = FeatureSet::new(Matrix::from_rows(&rows).unwrap(), vec![0; 50], 1).unwrap();
        let (once, _, _) = standardize(&train, &[]).unwrap();
        let (twice, _, _) = standardize(&once, &[]).unwrap();
        for (a, b) in once.features().as_slice().iter().zip(twice.features().as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_training_set_errors() {
        assert!(matches!(
            standardize(&FeatureSet::empty(3, 1), &[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn l2_rows_have_unit_norm() {
        let s = l2_normalize(&set(&[&[3.0, 4.0], &[0.0, 0.0]]));
        assert_eq!(s.feature(0), &[0.6, 0.8]);
        assert_eq!(s.feature(1), &[0.0, 0.0]);
    }
}
