//! `ZSFM` checkpoint: `b"ZSFM"`, `u32` version (=1), `u32` d, h, a, C_S, C_U,
//! `u8` activation code, then W1, b1, W2, b2 and the `a × C` attribute matrix
//! as little-endian `f64`, each row-major.
//!
//! Class names are not stored; a loaded model names its classes `class<k>`.

use std::fs;
use std::path::Path;

use super::ModelParams;
use crate::data::AttributeMatrix;
use crate::error::{Error, Result};
use crate::numeric::{Activation, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZSFM";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 6 * 4 + 1;

impl ModelParams {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let attrs = self.attrs();
        let dims = [
            CHECKPOINT_VERSION as usize,
            self.input_dim(),
            self.hidden_size(),
            attrs.dim(),
            attrs.num_seen(),
            attrs.num_unseen(),
        ];
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        for v in dims {
            let v = u32::try_from(v)
                .map_err(|_| Error::Format(format!("dimension {v} does not fit in u32")))?;
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(self.activation.code());
        let a_cols = attrs.as_columns();
        for block in [
            self.w1.as_slice(),
            &self.b1,
            self.w2.as_slice(),
            &self.b2,
            a_cols.as_slice(),
        ] {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format("checkpoint truncated in header".into()));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad magic, expected `ZSFM`".into()));
        }
        let word = |i: usize| {
            u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
        };
        let version = word(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let (d, h, a, cs, cu) = (word(1), word(2), word(3), word(4), word(5));
        let activation = Activation::from_code(bytes[HEADER_LEN - 1]).ok_or_else(|| {
            Error::Format(format!("unknown activation code {}", bytes[HEADER_LEN - 1]))
        })?;
        let c = cs + cu;
        let sizes = [h * d, h, a * h, a, a * c];
        let expected = HEADER_LEN + 8 * sizes.iter().sum::<usize>();
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "checkpoint size mismatch: expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut offset = HEADER_LEN;
        let mut blocks = sizes.iter().map(|&n| {
            let block: Vec<f64> = (0..n)
                .map(|i| {
                    let at = offset + 8 * i;
                    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
                })
                .collect();
            offset += 8 * n;
            block
        });
        let w1 = Matrix::new(h, d, blocks.next().unwrap())?;
        let b1 = blocks.next().unwrap();
        let w2 = Matrix::new(a, h, blocks.next().unwrap())?;
        let b2 = blocks.next().unwrap();
        let a_cols = Matrix::new(a, c, blocks.next().unwrap())?;
        let attrs = AttributeMatrix::from_class_rows(a_cols.transpose(), cs)?;
        let params = ModelParams::new(w1, b1, w2, b2, activation, attrs)?;
        if !params.is_finite() {
            return Err(Error::Format("checkpoint contains non-finite weights".into()));
        }
        Ok(params)
    }
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, params.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    ModelParams::from_bytes(&fs::read(path)?)
}
