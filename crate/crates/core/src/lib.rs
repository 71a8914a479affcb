// SPDX-License-Identifier: MIT OR Apache-2.0

//! Online change-point detection trained with a differentiable
//! delay / false-alarm objective.
//!
//! The numeric code is generic over the scalar type; the aliases below fix it
//! to `f64`, with `…32` variants for `f32`. The enumeration oracles in
//! [`domain`] also accept exact rationals.

#![forbid(unsafe_code)]

pub mod datagen;
pub mod detection;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod fsutil;
pub mod losses;
pub mod model;
pub mod scalar;

pub use domain::{ChangeAnnotation, StoppingOutcome};
pub use error::{CpdError, Result};
pub use losses::{LossConfig, LossGrad, LossValue};
pub use model::{CellKind, LossKind, ModelConfig, Optimizer, TrainConfig, TrainingLog};
pub use scalar::{Prob, Scalar};

pub type Sequence = domain::Sequence<f64>;
pub type Sequence32 = domain::Sequence<f32>;
pub type ProbabilitySeries = domain::ProbabilitySeries<f64>;
pub type ProbabilitySeries32 = domain::ProbabilitySeries<f32>;
pub type DetectorModel = model::DetectorModel<f64>;
pub type DetectorModel32 = model::DetectorModel<f32>;
pub type RecurrentState = model::RecurrentState<f64>;
pub type StreamDetector = detection::StreamDetector<f64>;
pub type Dataset = datagen::Dataset<f64>;
