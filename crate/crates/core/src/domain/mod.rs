// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared value types: observation sequences, ground-truth annotations,
//! per-step change probabilities and stopping outcomes.
//!
//! Time is 0-based throughout. A sequence of length `T` has observations and
//! probabilities at `0..T`; a change point `θ` is the index of the first
//! abnormal observation and `θ = T` means "no change".

mod oracle;

pub use oracle::{oracle_expected_alarm_time, oracle_expected_delay, stopping_distribution};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CpdError, Result};
use crate::scalar::{Prob, Scalar};

/// A `T × d` matrix of observations, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence<F> {
    id: String,
    features: Vec<F>,
    len: usize,
    dim: usize,
}

impl<F: Scalar> Sequence<F> {
    pub fn new(id: impl Into<String>, features: Vec<F>, len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(invalid(format!(
                "sequence needs T >= 1 and d >= 1, got T = {len}, d = {dim}"
            )));
        }
        if features.len() != len * dim {
            return Err(invalid(format!(
                "expected {} feature values for T = {len}, d = {dim}, got {}",
                len * dim,
                features.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite feature at row {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            id: id.into(),
            features,
            len,
            dim,
        })
    }

    pub fn from_rows(id: impl Into<String>, rows: &[Vec<F>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(CpdError::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        Self::new(id, rows.concat(), rows.len(), dim)
    }

    /// Converts every feature to another scalar type.
    pub fn cast<G: Scalar>(&self) -> Sequence<G> {
        Sequence {
            id: self.id.clone(),
            features: self
                .features
                .iter()
                .map(|v| G::from_f64_lossy(v.as_f64()))
                .collect(),
            len: self.len,
            dim: self.dim,
        }
    }
}

impl<F> Sequence<F> {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[F] {
        &self.features[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[F]> {
        self.features.chunks_exact(self.dim)
    }

    /// Row-major feature values.
    pub fn features(&self) -> &[F] {
        &self.features
    }
}

/// Ground truth for one sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChangeAnnotation {
    change_point: usize,
    change_type: Option<u32>,
    len: usize,
}

impl ChangeAnnotation {
    pub fn normal(len: usize) -> Self {
        Self {
            change_point: len,
            change_type: None,
            len,
        }
    }

    /// An annotated change of type `change_type` (1-based) at `change_point`.
    pub fn abnormal(len: usize, change_point: usize, change_type: u32) -> Result<Self> {
        if change_point >= len {
            return Err(CpdError::OutOfRange {
                name: "change_point",
                value: change_point,
                lo: 0,
                hi: len.saturating_sub(1),
            });
        }
        if change_type == 0 {
            return Err(invalid("change types are numbered from 1"));
        }
        Ok(Self {
            change_point,
            change_type: Some(change_type),
            len,
        })
    }

    /// Builds an annotation from the raw `(θ, type)` pair used in files.
    pub fn from_parts(len: usize, change_point: usize, change_type: Option<u32>) -> Result<Self> {
        match change_type {
            None if change_point == len => Ok(Self::normal(len)),
            None => Err(invalid(format!(
                "change_point {change_point} < length {len} requires a change_type"
            ))),
            Some(_) if change_point == len => Err(invalid(
                "a sequence without a change (change_point == length) cannot carry a change_type",
            )),
            Some(k) => Self::abnormal(len, change_point, k),
        }
    }

    pub fn change_point(&self) -> usize {
        self.change_point
    }

    pub fn change_type(&self) -> Option<u32> {
        self.change_type
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn has_change(&self) -> bool {
        self.change_point < self.len
    }
}

/// Per-step change probabilities `p_0..p_{T-1}`, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilitySeries<F> {
    probs: Vec<F>,
}

impl<F: Prob> ProbabilitySeries<F> {
    pub fn new(probs: Vec<F>) -> Result<Self> {
        if let Some(t) = probs
            .iter()
            .position(|p| !(*p >= F::zero() && *p <= F::one()))
        {
            return Err(invalid(format!(
                "probability at t = {t} is {:?}, outside [0, 1]",
                probs[t]
            )));
        }
        Ok(Self { probs })
    }
}

impl<F> ProbabilitySeries<F> {
    pub fn as_slice(&self) -> &[F] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_vec(self) -> Vec<F> {
        self.probs
    }
}

impl<F: Clone> ProbabilitySeries<F> {
    /// The first `n` probabilities.
    pub fn head(&self, n: usize) -> Self {
        Self {
            probs: self.probs[..n.min(self.probs.len())].to_vec(),
        }
    }
}

impl<F> AsRef<[F]> for ProbabilitySeries<F> {
    fn as_ref(&self) -> &[F] {
        &self.probs
    }
}

/// First alarm of a detector over a horizon of `T` steps.
///
/// `alarm_time == T` exactly when no alarm was raised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StoppingOutcome {
    alarm_time: usize,
    alarm_raised: bool,
}

impl StoppingOutcome {
    pub fn new(first_alarm: Option<usize>, horizon: usize) -> Self {
        match first_alarm {
            Some(t) if t < horizon => Self {
                alarm_time: t,
                alarm_raised: true,
            },
            _ => Self {
                alarm_time: horizon,
                alarm_raised: false,
            },
        }
    }

    pub fn alarm_time(&self) -> usize {
        self.alarm_time
    }

    pub fn alarm_raised(&self) -> bool {
        self.alarm_raised
    }
}
