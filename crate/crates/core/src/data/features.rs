//! Labeled visual feature sets and the `ZSFB` binary container.
//!
//! Layout (little-endian): `b"ZSFB"`, `u32` version (=1), `u32 n`, `u32 d`,
//! `u32 num_classes`, `n·d` `f32` features row-major, `n` `u32` labels.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"ZSFB";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl FeatureSet {
    /// `features` is `n × d`; every label must be `< num_classes`.
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                op: "FeatureSet::new",
                left: features.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::invalid("feature matrix contains non-finite values"));
        }
        Ok(FeatureSet {
            features,
            labels,
            num_classes,
        })
    }

    pub fn empty(dim: usize, num_classes: usize) -> Self {
        FeatureSet {
            features: Matrix::zeros(0, dim),
            labels: Vec::new(),
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        (0..self.len()).map(move |i| (self.feature(i), self.labels[i]))
    }

    /// Errors unless every label indexes a seen class.
    pub fn ensure_seen_only(&self, num_seen: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l >= num_seen) {
            Some(i) => Err(Error::invalid(format!(
                "training sample {i} has label {} but only classes 0..{num_seen} are seen",
                self.labels[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim());
        for &i in indices {
            data.extend_from_slice(self.feature(i));
        }
        FeatureSet {
            features: Matrix::new(indices.len(), self.dim(), data).expect("consistent shape"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Applies `f` to every feature row in place.
    pub fn map_features(&self, mut f: impl FnMut(&mut [f64])) -> FeatureSet {
        let mut out = self.clone();
        for i in 0..out.len() {
            f(out.features.row_mut(i));
        }
        out
    }

    /// Remaps labels through `map` (old label → new label) under a new class count.
    pub fn relabel(&self, map: impl Fn(usize) -> usize, num_classes: usize) -> Result<FeatureSet> {
        FeatureSet::new(
            self.features.clone(),
            self.labels.iter().map(|&l| map(l)).collect(),
            num_classes,
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = to_u32(self.len(), "sample count")?;
        let d = to_u32(self.dim(), "feature dimension")?;
        let c = to_u32(self.num_classes, "class count")?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (self.dim() + 1) * 4);
        out.extend_from_slice(FEATURE_MAGIC);
        for v in [FEATURE_VERSION, n, d, c] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in self.features.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &l in &self.labels {
            out.extend_from_slice(&(l as u32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "feature file truncated: {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if &bytes[..4] != FEATURE_MAGIC {
            return Err(Error::Format("bad magic, expected `ZSFB`".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        let version = word(0);
        if version != FEATURE_VERSION {
            return Err(Error::Format(format!("unsupported feature file version {version}")));
        }
        let (n, d, c) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let expected = n
            .checked_mul(d)
            .and_then(|nd| nd.checked_add(n))
            .and_then(|w| w.checked_mul(4))
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("declared sizes overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "payload size mismatch: expected {expected} bytes for n={n}, d={d}, found {}",
                bytes.len()
            )));
        }
        let body = &bytes[HEADER_LEN..];
        let f32_at = |i: usize| f32::from_le_bytes(body[4 * i..4 * i + 4].try_into().unwrap());
        let data: Vec<f64> = (0..n * d).map(|i| f32_at(i) as f64).collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite feature value".into()));
        }
        let label_base = 4 * n * d;
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let off = label_base + 4 * i;
            let l = u32::from_le_bytes(body[off..off + 4].try_into().unwrap()) as usize;
            if l >= c {
                return Err(Error::Format(format!(
                    "sample {i}: label {l} >= declared class count {c}"
                )));
            }
            labels.push(l);
        }
        Ok(FeatureSet {
            features: Matrix::new(n, d, data)?,
            labels,
            num_classes: c,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    FeatureSet::load(path)
}

pub fn save_features(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    set.save(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Assembled with Python's struct module:
    //   b"ZSFB" + struct.pack("<IIII", 1, 3, 2, 4)
    //   + struct.pack("<6f", 1.5, -2.0, 0.25, 3.0, 0.0, -0.125)
    //   + struct.pack("<3I", 0, 3, 1)
    const HANDCRAFTED: &str = "5a5346420100000003000000020000000400000000\
        00c03f000000c00000803e0000404000000000000000be000000000300000001000000";

    fn hex_bytes(s: &str) -> Vec<u8> {
        let s: String = s.split_whitespace().collect();
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
            .collect()
    }

    #[test]
    fn parses_handcrafted_bytes() {
        let set = FeatureSet::from_bytes(&hex_bytes(HANDCRAFTED)).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.dim(), 2);
        assert_eq!(set.num_classes(), 4);
        assert_eq!(set.feature(0), &[1.5, -2.0]);
        assert_eq!(set.feature(1), &[0.25, 3.0]);
        assert_eq!(set.feature(2), &[0.0, -0.125]);
        assert_eq!(set.labels(), &[0, 3, 1]);
        assert_eq!(set.to_bytes().unwrap(), hex_bytes(HANDCRAFTED));
    }

    #[test]
    fn empty_set_is_valid() {
        let set = FeatureSet::empty(7, 3);
        let bytes = set.to_bytes().unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = FeatureSet::from_bytes(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dim(), 7);
    }

    #[test]
    fn rejects_malformed_files() {
        let good = hex_bytes(HANDCRAFTED);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(FeatureSet::from_bytes(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        let err = FeatureSet::from_bytes(&bad_version).unwrap_err();
        assert!(err.to_string().contains("version"));

        assert!(FeatureSet::from_bytes(&good[..good.len() - 1]).is_err());
        assert!(FeatureSet::from_bytes(&good[..10]).is_err());

        let mut bad_label = good.clone();
        let n = bad_label.len();
        bad_label[n - 4] = 4; // last label := 4 with 4 declared classes
        let err = FeatureSet::from_bytes(&bad_label).unwrap_err();
        assert!(err.to_string().contains("label 4"));
    }

    #[test]
    fn fuzz_roundtrip_1000_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (n, d, c) = (1000, 13, 17);
        let data: Vec<f64> = (0..n * d)
            .map(|_| rng.random_range(-1e3f32..1e3f32) as f64)
            .collect();
        let labels = (0..n).map(|_| rng.random_range(0..c)).collect();
        let set = FeatureSet::new(Matrix::new(n, d, data).unwrap(), labels, c).unwrap();
        let bytes = set.to_bytes().unwrap();
        let back = FeatureSet::from_bytes(&bytes).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn seen_only_check() {
        let set = FeatureSet::new(Matrix::zeros(2, 1), vec![0, 2], 3).unwrap();
        assert!(set.ensure_seen_only(3).is_ok());
        assert!(set.ensure_seen_only(2).is_err());
    }

    #[test]
    fn file_roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.zsfb");
        std::fs::write(&path, hex_bytes(HANDCRAFTED)).unwrap();
        let set = load_features(&path).unwrap();
        let out = dir.path().join("g.zsfb");
        save_features(&set, &out).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&out).unwrap());
    }
}
