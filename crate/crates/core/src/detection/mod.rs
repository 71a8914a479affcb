// SPDX-License-Identifier: MIT OR Apache-2.0

//! Alarm rules: thresholding of emitted probabilities, an online wrapper,
//! and two classical known-distribution statistics for reference.

mod classical;
mod stream;

pub use classical::{
    cusum_probe, cusum_ramp_delay, log_likelihood_ratio, shiryaev_roberts_probe,
    sr_ramp_delay_bounds, ClassicalKind, ClassicalSpec, CoordGaussian, ProbeResult,
};
pub use stream::{StreamDetector, StreamStep};

use serde::{Deserialize, Serialize};

use crate::domain::{ProbabilitySeries, StoppingOutcome};
use crate::error::{invalid, Result};
use crate::scalar::Prob;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Probability threshold `s`, in `(0, 1)`.
    pub threshold: f64,
    /// Statistic threshold `h` for the classical probes.
    pub statistic_threshold: f64,
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.statistic_threshold.is_nan() || self.statistic_threshold <= 0.0 {
            return Err(invalid(format!(
                "statistic_threshold must be positive, got {}",
                self.statistic_threshold
            )));
        }
        Ok(())
    }
}

/// First index where `p_t > threshold` (strictly).
pub fn detect<F: Prob>(p: &ProbabilitySeries<F>, threshold: f64) -> StoppingOutcome {
    let s = F::from_f64(threshold).expect("threshold representable");
    let first = p.as_slice().iter().position(|&pt| pt > s);
    StoppingOutcome::new(first, p.len())
}
