// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON Lines dataset files.
//!
//! One record per line:
//!
//! ```text
//! {"id":"k1-abn-…","dim":2,"length":3,"change_point":1,"change_type":1,"features":[x00,x01,x10,x11,x20,x21]}
//! ```
//!
//! `change_type` is omitted for sequences without a change, whose
//! `change_point` equals `length`. Features are row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::domain::{ChangeAnnotation, Sequence};
use crate::error::{CpdError, Result};
use crate::fsutil::write_atomic;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    dim: usize,
    length: usize,
    change_point: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    change_type: Option<u32>,
    features: Vec<f64>,
}

pub fn encode_dataset(data: &Dataset) -> String {
    let mut out = String::new();
    for (seq, ann) in data {
        let rec = Record {
            id: seq.id().to_owned(),
            dim: seq.dim(),
            length: seq.len(),
            change_point: ann.change_point(),
            change_type: ann.change_type(),
            features: seq.features().to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("records always serialise"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    Ok(write_atomic(path, encode_dataset(data).as_bytes())?)
}

pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let err = |line: usize, message: String| CpdError::DatasetParse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut data = Dataset::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(raw).map_err(|e| err(line, e.to_string()))?;
        match dim {
            None => dim = Some(rec.dim),
            Some(d) if d != rec.dim => {
                return Err(err(
                    line,
                    format!("dim {} differs from the first record's dim {d}", rec.dim),
                ))
            }
            _ => {}
        }
        let ann = ChangeAnnotation::from_parts(rec.length, rec.change_point, rec.change_type)
            .map_err(|e| err(line, e.to_string()))?;
        let seq = Sequence::new(rec.id, rec.features, rec.length, rec.dim)
            .map_err(|e| err(line, e.to_string()))?;
        data.push((seq, ann));
    }
    Ok(data)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&fs::read_to_string(path)?, path)
}
