// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary model container.
//!
//! ```text
//! offset  size  field
//! 0       12    magic "CPDKIT-MODEL"
//! 12      4     format version (u32 LE)
//! 16      4     input_dim (u32 LE)
//! 20      4     hidden_dim (u32 LE)
//! 24      4     fc_dims[0] (u32 LE)
//! 28      4     fc_dims[1] (u32 LE)
//! 32      1     cell kind (0 = lstm, 1 = gru)
//! 33      8     parameter count (u64 LE)
//! 41      8·n   parameters (f64 LE) in the layout documented on `model`
//! ```

use std::fs;
use std::path::Path;

use super::{CellKind, DetectorModel, ModelConfig};
use crate::error::{CpdError, Result};
use crate::fsutil::write_atomic;
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 12] = b"CPDKIT-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn encode_model<F: Scalar>(model: &DetectorModel<F>) -> Vec<u8> {
    let cfg = model.config();
    let mut out = Vec::with_capacity(41 + 8 * model.params().len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    for v in [
        cfg.input_dim,
        cfg.hidden_dim,
        cfg.fc_dims[0],
        cfg.fc_dims[1],
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.push(match cfg.cell_kind {
        CellKind::Lstm => 0,
        CellKind::Gru => 1,
    });
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.as_f64().to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CpdError::ModelParse {
                offset: self.pos,
                message: format!("truncated while reading {what}"),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_model<F: Scalar>(bytes: &[u8]) -> Result<DetectorModel<F>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MODEL_MAGIC.len(), "magic")? != MODEL_MAGIC {
        return Err(CpdError::ModelParse {
            offset: 0,
            message: "bad magic, not a CPDKIT-MODEL file".into(),
        });
    }
    let version = r.u32("version")?;
    if version != MODEL_FORMAT_VERSION {
        return Err(CpdError::UnsupportedVersion {
            found: version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let input_dim = r.u32("input_dim")? as usize;
    let hidden_dim = r.u32("hidden_dim")? as usize;
    let fc_dims = [r.u32("fc_dims")? as usize, r.u32("fc_dims")? as usize];
    let kind_at = r.pos;
    let cell_kind = match r.take(1, "cell kind")?[0] {
        0 => CellKind::Lstm,
        1 => CellKind::Gru,
        other => {
            return Err(CpdError::ModelParse {
                offset: kind_at,
                message: format!("unknown cell kind {other}"),
            })
        }
    };
    let config = ModelConfig {
        input_dim,
        hidden_dim,
        fc_dims,
        cell_kind,
    };
    config.validate().map_err(|e| CpdError::ModelParse {
        offset: 16,
        message: e.to_string(),
    })?;
    let count_at = r.pos;
    let count = u64::from_le_bytes(r.take(8, "parameter count")?.try_into().unwrap()) as usize;
    if count != config.param_count() {
        return Err(CpdError::ModelParse {
            offset: count_at,
            message: format!(
                "parameter count {count} does not match config ({} expected)",
                config.param_count()
            ),
        });
    }
    let raw = r.take(count.saturating_mul(8), "parameters")?;
    if r.pos != bytes.len() {
        return Err(CpdError::ModelParse {
            offset: r.pos,
            message: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    let params = raw
        .chunks_exact(8)
        .map(|c| F::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    DetectorModel::from_params(config, params)
}

pub fn save_model<F: Scalar>(model: &DetectorModel<F>, path: &Path) -> Result<()> {
    Ok(write_atomic(path, &encode_model(model))?)
}

pub fn load_model<F: Scalar>(path: &Path) -> Result<DetectorModel<F>> {
    decode_model(&fs::read(path)?)
}

/// Loads a model and checks it matches the architecture the caller needs.
pub fn load_model_expecting<F: Scalar>(
    path: &Path,
    expected: &ModelConfig,
) -> Result<DetectorModel<F>> {
    let model = load_model(path)?;
    if model.config() != expected {
        return Err(CpdError::ConfigMismatch(format!(
            "{} holds {:?}, expected {:?}",
            path.display(),
            model.config(),
            expected
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsutil::partial_path;

    fn model() -> DetectorModel<f64> {
        DetectorModel::init(
            ModelConfig {
                input_dim: 2,
                hidden_dim: 3,
                fc_dims: [2, 2],
                cell_kind: CellKind::Gru,
            },
            4,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back: DetectorModel<f64> = decode_model(&encode_model(&m)).unwrap();
        assert_eq!(back, m);
        assert!(back
            .params()
            .iter()
            .zip(m.params())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncation_and_version_errors() {
        let bytes = encode_model(&model());
        for cut in [0, 5, 12, 20, 40, bytes.len() - 1] {
            assert!(matches!(
                decode_model::<f64>(&bytes[..cut]),
                Err(CpdError::ModelParse { .. })
            ));
        }
        let mut bumped = bytes.clone();
        bumped[12..16].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_model::<f64>(&bumped),
            Err(CpdError::UnsupportedVersion { found: 7, .. })
        ));
        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode_model::<f64>(&trailing).is_err());
    }

    #[test]
    fn save_load_and_expected_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let m = model();
        save_model(&m, &path).unwrap();
        assert!(!partial_path(&path).exists());
        assert_eq!(load_model::<f64>(&path).unwrap(), m);
        assert!(load_model_expecting::<f64>(&path, m.config()).is_ok());
        let other = ModelConfig {
            hidden_dim: 4,
            ..*m.config()
        };
        assert!(matches!(
            load_model_expecting::<f64>(&path, &other),
            Err(CpdError::ConfigMismatch(_))
        ));
    }
}
