// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic multi-regime sequences.
//!
//! Each change type is a pair of isotropic Gaussians. An abnormal sequence is
//! `a` pre-change draws, a transition of `L` draws whose mean moves linearly
//! from the pre to the post mean, and post-change draws for the remainder. A
//! normal sequence of type `k` is `T` draws from type `k`'s pre distribution.

mod io;

pub use io::{encode_dataset, parse_dataset, read_dataset, write_dataset};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{ChangeAnnotation, Sequence};
use crate::error::{invalid, Result};

/// Labelled sequences, in dataset order.
pub type Dataset<F = f64> = Vec<(Sequence<F>, ChangeAnnotation)>;

/// Digit pairs used to label change types, in the order types are added.
pub const DIGIT_TRANSITIONS: [(u8, u8); 10] = [
    (4, 7),
    (7, 4),
    (1, 9),
    (9, 1),
    (2, 5),
    (5, 2),
    (0, 8),
    (8, 0),
    (3, 6),
    (6, 3),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangeType {
    pub label: String,
    pub pre: GaussianParams,
    pub post: GaussianParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub change_types: Vec<ChangeType>,
    pub sequence_length: usize,
    /// Inclusive range of transition lengths.
    pub transition_length_range: [usize; 2],
    pub dim: usize,
}

/// Distance between pre and post means in units of the noise scale.
pub const DEFAULT_SEPARATION: f64 = 6.0;

impl Default for RegimeSpec {
    fn default() -> Self {
        Self::digit_transitions(1, 1.0, DEFAULT_SEPARATION).expect("one digit type is always valid")
    }
}

impl RegimeSpec {
    /// The first `num_types` entries of [`DIGIT_TRANSITIONS`] in `d = 10`,
    /// with noise `scale` and every pre/post mean pair `separation` apart.
    ///
    /// Digit `j` has mean `(separation/√2)·e_j`.
    pub fn digit_transitions(num_types: usize, scale: f64, separation: f64) -> Result<Self> {
        if num_types == 0 || num_types > DIGIT_TRANSITIONS.len() {
            return Err(invalid(format!(
                "number of change types must be in 1..={}, got {num_types}",
                DIGIT_TRANSITIONS.len()
            )));
        }
        let dim = 10;
        let digit = |j: u8| {
            let mut mean = vec![0.0; dim];
            mean[j as usize] = separation / std::f64::consts::SQRT_2;
            GaussianParams { mean, scale }
        };
        let spec = Self {
            change_types: DIGIT_TRANSITIONS[..num_types]
                .iter()
                .map(|&(a, b)| ChangeType {
                    label: format!("{a}→{b}"),
                    pre: digit(a),
                    post: digit(b),
                })
                .collect(),
            sequence_length: 64,
            transition_length_range: [1, 10],
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_types(&self) -> usize {
        self.change_types.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.sequence_length;
        if self.change_types.is_empty() {
            return Err(invalid("regime needs at least one change type"));
        }
        if self.dim == 0 {
            return Err(invalid("dim must be at least 1"));
        }
        let [lo, hi] = self.transition_length_range;
        if lo < 1 || lo > hi || hi + 2 > t {
            return Err(invalid(format!(
                "transition length range [{lo}, {hi}] must lie within [1, {}]",
                t.saturating_sub(2)
            )));
        }
        for (k, ct) in self.change_types.iter().enumerate() {
            for g in [&ct.pre, &ct.post] {
                if g.mean.len() != self.dim {
                    return Err(invalid(format!(
                        "type {}: mean has {} entries, dim is {}",
                        k + 1,
                        g.mean.len(),
                        self.dim
                    )));
                }
                if !(g.scale.is_finite() && g.scale > 0.0) || g.mean.iter().any(|m| !m.is_finite())
                {
                    return Err(invalid(format!(
                        "type {}: scale must be positive and finite",
                        k + 1
                    )));
                }
            }
            if ct.pre == ct.post {
                return Err(invalid(format!(
                    "type {}: pre and post distributions are equal",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Inclusive bounds on the pre-change length for a transition of `len`.
    ///
    /// Prefers `[T/4, 3T/4 - L]`; on short sequences where that is empty it
    /// falls back to anything leaving one pre and one post sample.
    fn pre_length_bounds(&self, transition: usize) -> Result<(usize, usize)> {
        let t = self.sequence_length;
        let lo = (t / 4).max(1);
        if let Some(hi) = (3 * t / 4).checked_sub(transition) {
            if hi >= lo {
                return Ok((lo, hi));
            }
        }
        match t.checked_sub(transition + 1) {
            Some(hi) if hi >= 1 => Ok((1, hi)),
            _ => Err(invalid(format!(
                "a transition of {transition} steps does not fit in length {t}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub regime: RegimeSpec,
    /// Abnormal sequences per type; the same number of normal ones is added.
    pub sequences_per_type: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            regime: RegimeSpec::default(),
            sequences_per_type: 500,
            seed: 0,
        }
    }
}

fn sample_row(
    rng: &mut ChaCha8Rng,
    mean: impl Iterator<Item = f64>,
    scale: f64,
    out: &mut Vec<f64>,
) {
    for m in mean {
        let z: f64 = rng.sample(StandardNormal);
        out.push(m + scale * z);
    }
}

/// One sequence of change type `change_type` (1-based).
pub fn generate_sequence(
    regime: &RegimeSpec,
    change_type: usize,
    abnormal: bool,
    seed: u64,
) -> Result<(Sequence<f64>, ChangeAnnotation)> {
    regime.validate()?;
    if change_type == 0 || change_type > regime.num_types() {
        return Err(invalid(format!(
            "change type {change_type} not in 1..={}",
            regime.num_types()
        )));
    }
    let ct = &regime.change_types[change_type - 1];
    let t = regime.sequence_length;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(t * regime.dim);
    let kind = if abnormal { "abn" } else { "nrm" };
    let id = format!("k{change_type}-{kind}-{seed:016x}");

    if !abnormal {
        for _ in 0..t {
            sample_row(
                &mut rng,
                ct.pre.mean.iter().copied(),
                ct.pre.scale,
                &mut vals,
            );
        }
        return Ok((
            Sequence::new(id, vals, t, regime.dim)?,
            ChangeAnnotation::normal(t),
        ));
    }

    let [lo, hi] = regime.transition_length_range;
    let transition = rng.random_range(lo..=hi);
    let (a_lo, a_hi) = regime.pre_length_bounds(transition)?;
    let pre_len = rng.random_range(a_lo..=a_hi);

    for _ in 0..pre_len {
        sample_row(
            &mut rng,
            ct.pre.mean.iter().copied(),
            ct.pre.scale,
            &mut vals,
        );
    }
    for j in 1..=transition {
        let alpha = j as f64 / (transition + 1) as f64;
        let mean = ct
            .pre
            .mean
            .iter()
            .zip(&ct.post.mean)
            .map(|(&a, &b)| (1.0 - alpha) * a + alpha * b);
        let scale = (1.0 - alpha) * ct.pre.scale + alpha * ct.post.scale;
        sample_row(&mut rng, mean, scale, &mut vals);
    }
    for _ in pre_len + transition..t {
        sample_row(
            &mut rng,
            ct.post.mean.iter().copied(),
            ct.post.scale,
            &mut vals,
        );
    }
    Ok((
        Sequence::new(id, vals, t, regime.dim)?,
        ChangeAnnotation::abnormal(t, pre_len, change_type as u32)?,
    ))
}

/// SplitMix64 finaliser, used to give every sequence its own seed.
fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Balanced dataset: for each type, `sequences_per_type` abnormal and as many
/// normal sequences, shuffled deterministically.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.regime.validate()?;
    if spec.sequences_per_type == 0 {
        return Err(invalid("sequences_per_type must be at least 1"));
    }
    let per = spec.sequences_per_type;
    let jobs: Vec<(usize, bool, u64)> = (0..spec.regime.num_types())
        .flat_map(|k| {
            (0..per).flat_map(move |i| {
                let base = ((k * per + i) * 2) as u64;
                [(k + 1, true, base), (k + 1, false, base + 1)]
            })
        })
        .collect();
    let mut data = jobs
        .par_iter()
        .map(|&(k, abnormal, idx)| {
            generate_sequence(&spec.regime, k, abnormal, derive_seed(spec.seed, idx))
        })
        .collect::<Result<Dataset>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(7);
    use rand::seq::SliceRandom;
    data.shuffle(&mut rng);
    Ok(data)
}
