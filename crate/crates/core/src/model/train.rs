// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mini-batch training against the CPD or BCE objective.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DetectorModel, ModelConfig};
use crate::domain::{ChangeAnnotation, ProbabilitySeries, Sequence};
use crate::error::{invalid, CpdError, Result};
use crate::losses::{balanced_fa_weight, bce_loss, cpd_loss, LossConfig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Cpd,
    Bce,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Cpd => "cpd",
            LossKind::Bce => "bce",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = CpdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cpd" => Ok(LossKind::Cpd),
            "bce" => Ok(LossKind::Bce),
            other => Err(invalid(format!(
                "unknown loss '{other}' (expected cpd or bce)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    PlainSgd,
    /// Heavy-ball momentum 0.9.
    MomentumSgd,
    /// Adam with β = (0.9, 0.999), ε = 1e-8.
    AdaptiveMoment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Global L2 norm cap on each batch gradient.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 32,
            optimizer: Optimizer::PlainSgd,
            seed: 0,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if matches!(self.grad_clip, Some(c) if c.is_nan() || c <= 0.0) {
            return Err(invalid("grad_clip must be positive"));
        }
        Ok(())
    }
}

/// Mean losses over one epoch, measured during the updates.
///
/// `delay_term` and `fa_term` are tracked for both loss kinds so BCE runs can
/// be compared on the CPD scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub delay_term: f64,
    pub fa_term: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    /// `fa_weight` actually used (differs from the config under auto-balance).
    pub fa_weight: f64,
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    /// Whether the loss, averaged over sliding windows of `window` epochs,
    /// never goes up.
    pub fn smoothed_non_increasing(&self, window: usize) -> bool {
        let losses: Vec<f64> = self.epochs.iter().map(|e| e.loss).collect();
        if window == 0 || losses.len() < window {
            return true;
        }
        let means: Vec<f64> = losses
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect();
        means.windows(2).all(|w| w[1] <= w[0])
    }
}

struct OptimizerState<F> {
    kind: Optimizer,
    lr: F,
    m: Vec<F>,
    v: Vec<F>,
    steps: i32,
}

impl<F: Scalar> OptimizerState<F> {
    fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        Self {
            kind,
            lr: F::from_f64_lossy(lr),
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            steps: 0,
        }
    }

    fn apply(&mut self, params: &mut [F], grad: &[F]) {
        if self.lr == F::zero() {
            return;
        }
        self.steps += 1;
        match self.kind {
            Optimizer::PlainSgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * *g;
                }
            }
            Optimizer::MomentumSgd => {
                let mu = F::from_f64_lossy(0.9);
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = mu * *m + *g;
                    *p -= self.lr * *m;
                }
            }
            Optimizer::AdaptiveMoment => {
                let b1 = F::from_f64_lossy(0.9);
                let b2 = F::from_f64_lossy(0.999);
                let eps = F::from_f64_lossy(1e-8);
                let c1 = F::one() - b1.powi(self.steps);
                let c2 = F::one() - b2.powi(self.steps);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *m = b1 * *m + (F::one() - b1) * *g;
                    *v = b2 * *v + (F::one() - b2) * *g * *g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

struct SequenceStep<F> {
    loss: F,
    delay: F,
    fa: F,
    grad: Vec<F>,
}

/// Trains a freshly initialised model (seeded by `train_cfg.seed`).
///
/// Per-sequence gradients inside a batch are computed in parallel and summed
/// in batch order, so results do not depend on the thread count.
pub fn train<F: Scalar>(
    dataset: &[(Sequence<F>, ChangeAnnotation)],
    loss_kind: LossKind,
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<(DetectorModel<F>, TrainingLog)> {
    train_cfg.validate()?;
    loss_cfg.validate()?;
    model_cfg.validate()?;
    if dataset.is_empty() {
        return Err(invalid("training set is empty"));
    }
    for (seq, ann) in dataset {
        if seq.dim() != model_cfg.input_dim {
            return Err(CpdError::DimensionMismatch {
                expected: model_cfg.input_dim,
                actual: seq.dim(),
            });
        }
        if seq.len() != ann.len() {
            return Err(invalid(format!(
                "sequence '{}' has length {} but its annotation says {}",
                seq.id(),
                seq.len(),
                ann.len()
            )));
        }
    }

    let mut model = DetectorModel::init(model_cfg, train_cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut opt = OptimizerState::new(
        train_cfg.optimizer,
        train_cfg.learning_rate,
        model.params().len(),
    );
    let mut log = TrainingLog {
        fa_weight: loss_cfg.fa_weight,
        epochs: Vec::with_capacity(train_cfg.epochs),
    };
    let mut loss_cfg = *loss_cfg;

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut totals = (0.0, 0.0, 0.0);
        for (batch_idx, batch) in order.chunks(train_cfg.batch_size).enumerate() {
            if epoch == 0 && batch_idx == 0 && loss_cfg.auto_balance && loss_kind == LossKind::Cpd {
                let probs = batch
                    .iter()
                    .map(|&i| model.forward(&dataset[i].0))
                    .collect::<Result<Vec<ProbabilitySeries<F>>>>()?;
                let pairs: Vec<_> = probs
                    .iter()
                    .zip(batch)
                    .map(|(p, &i)| (p, dataset[i].1.change_point()))
                    .collect();
                loss_cfg.fa_weight = balanced_fa_weight(&pairs, loss_cfg.horizon_cap)?;
                log.fa_weight = loss_cfg.fa_weight;
            }

            let n = F::from_usize_lossy(batch.len());
            let steps = batch
                .par_iter()
                .map(|&i| sequence_step(&model, &dataset[i], loss_kind, &loss_cfg, n))
                .collect::<Result<Vec<_>>>()?;

            let mut grad = vec![F::zero(); model.params().len()];
            let (mut loss, mut delay, mut fa) = (F::zero(), F::zero(), F::zero());
            for s in &steps {
                loss += s.loss;
                delay += s.delay;
                fa += s.fa;
                for (g, sg) in grad.iter_mut().zip(&s.grad) {
                    *g += *sg;
                }
            }
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(CpdError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            if let Some(clip) = train_cfg.grad_clip {
                let norm = grad.iter().map(|&g| g * g).sum::<F>().sqrt();
                let clip = F::from_f64_lossy(clip);
                if norm > clip {
                    let scale = clip / norm;
                    grad.iter_mut().for_each(|g| *g *= scale);
                }
            }
            opt.apply(model.params_mut(), &grad);

            let w = batch.len() as f64;
            totals.0 += loss.as_f64() * w;
            totals.1 += delay.as_f64() * w;
            totals.2 += fa.as_f64() * w;
        }
        let n = dataset.len() as f64;
        let record = EpochRecord {
            epoch,
            loss: totals.0 / n,
            delay_term: totals.1 / n,
            fa_term: totals.2 / n,
        };
        log::debug!(
            "epoch {epoch}: loss {:.5} delay {:.4} fa {:.4}",
            record.loss,
            record.delay_term,
            record.fa_term
        );
        log.epochs.push(record);
    }
    Ok((model, log))
}

/// Loss contribution and parameter gradient of one sequence, already divided
/// by the batch size.
fn sequence_step<F: Scalar>(
    model: &DetectorModel<F>,
    (seq, ann): &(Sequence<F>, ChangeAnnotation),
    loss_kind: LossKind,
    loss_cfg: &LossConfig,
    n: F,
) -> Result<SequenceStep<F>> {
    let theta = ann.change_point();
    let ((loss, delay, fa), grad) = model.value_and_grad(seq, |p| {
        let (cpd, cpd_grads) = cpd_loss(&[(p, theta)], loss_cfg)?;
        match loss_kind {
            LossKind::Cpd => {
                let upstream = cpd_grads[0].iter().map(|&g| g / n).collect();
                Ok(((cpd.total, cpd.delay_term, cpd.fa_term), upstream))
            }
            LossKind::Bce => {
                let bce = bce_loss(p, theta)?;
                let upstream = bce.grad.iter().map(|&g| g / n).collect();
                Ok(((bce.value, cpd.delay_term, cpd.fa_term), upstream))
            }
        }
    })?;
    Ok(SequenceStep {
        loss: loss / n,
        delay: delay / n,
        fa: fa / n,
        grad,
    })
}
