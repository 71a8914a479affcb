// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM and Shiryaev–Roberts for a known pre/post Gaussian pair.
//!
//! Coordinates are treated as independent, so the per-step log-likelihood
//! ratio is the sum over coordinates.

use serde::{Deserialize, Serialize};

use crate::datagen::ChangeType;
use crate::domain::{Sequence, StoppingOutcome};
use crate::error::{invalid, CpdError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassicalKind {
    Cusum,
    ShiryaevRoberts,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordGaussian {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSpec {
    pub kind: ClassicalKind,
    pub pre: Vec<CoordGaussian>,
    pub post: Vec<CoordGaussian>,
}

impl ClassicalSpec {
    pub fn new(
        kind: ClassicalKind,
        pre: Vec<CoordGaussian>,
        post: Vec<CoordGaussian>,
    ) -> Result<Self> {
        let spec = Self { kind, pre, post };
        spec.validate()?;
        Ok(spec)
    }

    /// Known-distribution probe for one generated change type.
    pub fn for_change_type(kind: ClassicalKind, ct: &ChangeType) -> Result<Self> {
        let coords = |g: &crate::datagen::GaussianParams| {
            g.mean
                .iter()
                .map(|&mean| CoordGaussian { mean, std: g.scale })
                .collect()
        };
        Self::new(kind, coords(&ct.pre), coords(&ct.post))
    }

    pub fn validate(&self) -> Result<()> {
        if self.pre.is_empty() || self.pre.len() != self.post.len() {
            return Err(invalid(
                "pre and post need the same nonzero number of coordinates",
            ));
        }
        if self
            .pre
            .iter()
            .chain(&self.post)
            .any(|g| !(g.std > 0.0 && g.std.is_finite() && g.mean.is_finite()))
        {
            return Err(invalid(
                "every coordinate needs a finite mean and positive std",
            ));
        }
        if self.pre == self.post {
            return Err(invalid("pre and post distributions are identical"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.pre.len()
    }
}

/// `log f_post(x) - log f_pre(x)`.
pub fn log_likelihood_ratio<F: Scalar>(spec: &ClassicalSpec, x: &[F]) -> F {
    let mut llr = 0.0;
    for ((v, p0), p1) in x.iter().zip(&spec.pre).zip(&spec.post) {
        let v = v.as_f64();
        let z0 = (v - p0.mean) / p0.std;
        let z1 = (v - p1.mean) / p1.std;
        llr += (p0.std / p1.std).ln() + 0.5 * (z0 * z0 - z1 * z1);
    }
    F::from_f64_lossy(llr)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult<F> {
    pub outcome: StoppingOutcome,
    /// Statistic after each step (`log R_t` for Shiryaev–Roberts).
    pub trace: Vec<F>,
}

fn check(seq_dim: usize, spec: &ClassicalSpec, threshold: f64) -> Result<()> {
    spec.validate()?;
    if seq_dim != spec.dim() {
        return Err(CpdError::DimensionMismatch {
            expected: spec.dim(),
            actual: seq_dim,
        });
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(invalid(format!(
            "threshold must be non-negative, got {threshold}"
        )));
    }
    Ok(())
}

/// `S_t = max(0, S_{t-1} + llr(x_t))`, `S_{-1} = 0`; alarm at the first `S_t > h`.
pub fn cusum_probe<F: Scalar>(
    seq: &Sequence<F>,
    spec: &ClassicalSpec,
    h: f64,
) -> Result<ProbeResult<F>> {
    check(seq.dim(), spec, h)?;
    let h = F::from_f64_lossy(h);
    let mut s = F::zero();
    let mut first = None;
    let trace = seq
        .rows()
        .enumerate()
        .map(|(t, x)| {
            s = (s + log_likelihood_ratio(spec, x)).max(F::zero());
            if first.is_none() && s > h {
                first = Some(t);
            }
            s
        })
        .collect();
    Ok(ProbeResult {
        outcome: StoppingOutcome::new(first, seq.len()),
        trace,
    })
}

/// `R_t = (1 + R_{t-1}) · LR(x_t)`, `R_{-1} = 0`, run as
/// `log R_t = llr(x_t) + log(1 + R_{t-1})`; alarm at the first `R_t > A`.
pub fn shiryaev_roberts_probe<F: Scalar>(
    seq: &Sequence<F>,
    spec: &ClassicalSpec,
    a: f64,
) -> Result<ProbeResult<F>> {
    check(seq.dim(), spec, a)?;
    let log_a = a.ln();
    let mut log_r = f64::NEG_INFINITY;
    let mut first = None;
    let trace = seq
        .rows()
        .enumerate()
        .map(|(t, x)| {
            // log(1 + e^l), stable for either sign of l
            let log1p_r = if log_r > 0.0 {
                log_r + (-log_r).exp().ln_1p()
            } else {
                log_r.exp().ln_1p()
            };
            log_r = log_likelihood_ratio(spec, x).as_f64() + log1p_r;
            if first.is_none() && log_r > log_a {
                first = Some(t);
            }
            F::from_f64_lossy(log_r)
        })
        .collect();
    Ok(ProbeResult {
        outcome: StoppingOutcome::new(first, seq.len()),
        trace,
    })
}

/// CUSUM delay on a noiseless step change whose post-change samples each add
/// `lambda > 0` to the statistic: alarm when `(n + 1)·λ > h`, so `n = ⌊h/λ⌋`.
pub fn cusum_ramp_delay(h: f64, lambda: f64) -> usize {
    (h / lambda).floor().max(0.0) as usize
}

/// Inclusive bounds on the Shiryaev–Roberts delay on a noiseless step change
/// with per-sample log-likelihood ratio `-λ` before and `+λ` after it.
///
/// After `n + 1` post-change samples `R = Σ_{j≤n+1} e^{jλ} + R_pre·e^{(n+1)λ}`
/// with `0 ≤ R_pre ≤ e^{-λ}/(1 - e^{-λ})`, hence
/// `e^{(n+1)λ} ≤ R ≤ e^{(n+1)λ}·coth(λ/2)`.
pub fn sr_ramp_delay_bounds(a: f64, lambda: f64) -> (usize, usize) {
    let log_a = a.ln();
    let log_coth = ((1.0 + (-lambda).exp()) / (1.0 - (-lambda).exp())).ln();
    let first = |offset: f64| {
        (0..)
            .find(|&n| (n + 1) as f64 * lambda + offset > log_a)
            .unwrap_or(0)
    };
    (first(log_coth), first(0.0))
}
