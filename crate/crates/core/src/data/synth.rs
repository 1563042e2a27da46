//! Synthetic GZSL benchmark: binary class signatures pushed through a random
//! linear map into feature space, plus isotropic Gaussian noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{AttributeMatrix, FeatureSet};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

const MAX_RESAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub dim_a: usize,
    pub dim_d: usize,
    pub num_seen: usize,
    pub num_unseen: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dim_a: 16,
            dim_d: 32,
            num_seen: 12,
            num_unseen: 4,
            train_per_class: 60,
            test_per_class: 20,
            noise_sigma: 0.3,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim_a", self.dim_a),
            ("dim_d", self.dim_d),
            ("num_seen", self.num_seen),
            ("num_unseen", self.num_unseen),
            ("train_per_class", self.train_per_class),
            ("test_per_class", self.test_per_class),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("synthetic {name} must be at least 1")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("synthetic noise_sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthBenchmark {
    pub attributes: AttributeMatrix,
    pub train: FeatureSet,
    pub test_seen: FeatureSet,
    pub test_unseen: FeatureSet,
    /// Ground-truth `d × a` map from attributes to noiseless features.
    pub projection: Matrix,
}

impl SynthBenchmark {
    /// Noiseless feature-space prototype `M·a_k` of class `k`.
    pub fn prototype(&self, class: usize) -> Vec<f64> {
        self.projection
            .matvec(self.attributes.vector(class))
            .expect("projection matches attribute dimension")
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthBenchmark> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let num_classes = spec.num_seen + spec.num_unseen;

    let mut signatures: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let mut attempt = 0;
        loop {
            let candidate: Vec<f64> = (0..spec.dim_a)
                .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
                .collect();
            if !signatures.contains(&candidate) {
                signatures.push(candidate);
                break;
            }
            attempt += 1;
            if attempt > MAX_RESAMPLES {
                return Err(Error::Degenerate(format!(
                    "class {k}: no distinct binary signature after {MAX_RESAMPLES} resamples"
                )));
            }
        }
    }
    let attributes = AttributeMatrix::new(
        &signatures[..spec.num_seen],
        &signatures[spec.num_seen..],
    )?;

    let scale = 1.0 / (spec.dim_a as f64).sqrt();
    let proj: Vec<f64> = (0..spec.dim_d * spec.dim_a)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let projection = Matrix::new(spec.dim_d, spec.dim_a, proj)?;
    let prototypes: Vec<Vec<f64>> = signatures
        .iter()
        .map(|a| projection.matvec(a))
        .collect::<Result<_>>()?;

    let mut draw = |classes: std::ops::Range<usize>, per_class: usize| -> Result<FeatureSet> {
        let n = classes.len() * per_class;
        let mut data = Vec::with_capacity(n * spec.dim_d);
        let mut labels = Vec::with_capacity(n);
        for k in classes {
            for _ in 0..per_class {
                for &m in &prototypes[k] {
                    let eps = if spec.noise_sigma > 0.0 {
                        spec.noise_sigma * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    // stored features are f32
                    data.push((m + eps) as f32 as f64);
                }
                labels.push(k);
            }
        }
        FeatureSet::new(Matrix::new(n, spec.dim_d, data)?, labels, num_classes)
    };
    let train = draw(0..spec.num_seen, spec.train_per_class)?;
    let test_seen = draw(0..spec.num_seen, spec.test_per_class)?;
    let test_unseen = draw(spec.num_seen..num_classes, spec.test_per_class)?;

    Ok(SynthBenchmark {
        attributes,
        train,
        test_seen,
        test_unseen,
        projection,
    })
}
