// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{invalid, CpdError, Result};
use crate::model::{DetectorModel, RecurrentState};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamStep<F> {
    pub prob: F,
    /// Latched: stays true from the first alarm until `reset`.
    pub alarmed: bool,
}

#[derive(Clone, Debug)]
enum Source<F> {
    Probabilities,
    Model {
        model: DetectorModel<F>,
        state: RecurrentState<F>,
        capacity: usize,
    },
}

/// Online alarm handle fed one step at a time.
///
/// Produces exactly what [`DetectorModel::forward`] followed by
/// [`super::detect`] would on the same data.
#[derive(Clone, Debug)]
pub struct StreamDetector<F> {
    source: Source<F>,
    threshold: F,
    steps: usize,
    first_alarm: Option<usize>,
}

impl<F: Scalar> StreamDetector<F> {
    /// Consumes probabilities computed elsewhere.
    pub fn for_probabilities(threshold: f64) -> Self {
        Self {
            source: Source::Probabilities,
            threshold: F::from_f64_lossy(threshold),
            steps: 0,
            first_alarm: None,
        }
    }

    /// Runs `model` on raw observations for at most `capacity` steps.
    pub fn for_model(model: DetectorModel<F>, threshold: f64, capacity: usize) -> Self {
        let state = model.initial_state();
        Self {
            source: Source::Model {
                model,
                state,
                capacity,
            },
            threshold: F::from_f64_lossy(threshold),
            steps: 0,
            first_alarm: None,
        }
    }

    fn record(&mut self, prob: F) -> StreamStep<F> {
        if self.first_alarm.is_none() && prob > self.threshold {
            self.first_alarm = Some(self.steps);
        }
        self.steps += 1;
        StreamStep {
            prob,
            alarmed: self.first_alarm.is_some(),
        }
    }

    pub fn step_probability(&mut self, prob: F) -> Result<StreamStep<F>> {
        if !matches!(self.source, Source::Probabilities) {
            return Err(invalid("this stream wraps a model; feed observations"));
        }
        if !(prob >= F::zero() && prob <= F::one()) {
            return Err(invalid(format!("probability {prob} outside [0, 1]")));
        }
        Ok(self.record(prob))
    }

    pub fn step_observation(&mut self, x: &[F]) -> Result<StreamStep<F>> {
        let prob = match &mut self.source {
            Source::Probabilities => {
                return Err(invalid("this stream takes probabilities, not observations"))
            }
            Source::Model {
                model,
                state,
                capacity,
            } => {
                if self.steps >= *capacity {
                    return Err(CpdError::StreamOverflow {
                        capacity: *capacity,
                    });
                }
                model.step(state, x)?
            }
        };
        Ok(self.record(prob))
    }

    pub fn reset(&mut self) {
        if let Source::Model { model, state, .. } = &mut self.source {
            *state = model.initial_state();
        }
        self.steps = 0;
        self.first_alarm = None;
    }

    pub fn first_alarm(&self) -> Option<usize> {
        self.first_alarm
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}
