// SPDX-License-Identifier: MIT OR Apache-2.0

//! Differentiable change-point losses and the BCE baseline.
//!
//! Both CPD terms are expectations of a censored stopping time under the
//! independent-Bernoulli alarm model. With survival `S_j = Π_{k<j}(1 - p_k)`,
//! `E[min(τ, h)] = Σ_{j=1}^{h} S_j`, and
//! `∂/∂p_t = -S_t · R_t` where `R_{h-1} = 1` and `R_t = 1 + (1 - p_{t+1}) R_{t+1}`.
//! Neither form divides by `1 - p`, so saturated probabilities are safe.

use serde::{Deserialize, Serialize};

use crate::domain::ProbabilitySeries;
use crate::error::{invalid, CpdError, Result};
use crate::scalar::Scalar;

/// Clamp applied to probabilities inside the BCE logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// A loss value with its gradient with respect to each `p_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad<F> {
    pub value: F,
    pub grad: Vec<F>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Weight `c` of the false-alarm term.
    pub fa_weight: f64,
    /// Truncates both loss sums to the first `horizon_cap` steps.
    pub horizon_cap: Option<usize>,
    /// Replace `fa_weight` by the ratio that equalises both terms on the
    /// first training batch.
    pub auto_balance: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            fa_weight: 1.0,
            horizon_cap: None,
            auto_balance: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fa_weight.is_finite() && self.fa_weight > 0.0) {
            return Err(invalid(format!(
                "fa_weight must be positive, got {}",
                self.fa_weight
            )));
        }
        if self.horizon_cap == Some(0) {
            return Err(invalid("horizon_cap must be at least 1"));
        }
        Ok(())
    }
}

/// Value of the combined CPD objective, `total = delay_term + c · fa_term`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue<F> {
    pub total: F,
    pub delay_term: F,
    pub fa_term: F,
}

/// `E[min(τ, horizon)]` over `p[..horizon]` and its gradient.
fn censored_stop_time<F: Scalar>(p: &[F], horizon: usize) -> (F, Vec<F>) {
    let p = &p[..horizon];
    let mut survival = Vec::with_capacity(horizon + 1);
    let mut s = F::one();
    survival.push(s);
    for &pt in p {
        s *= F::one() - pt;
        survival.push(s);
    }
    let value = survival[1..].iter().copied().sum();

    let mut grad = vec![F::zero(); horizon];
    let mut tail = F::one();
    for t in (0..horizon).rev() {
        if t + 1 < horizon {
            tail = F::one() + (F::one() - p[t + 1]) * tail;
        }
        grad[t] = -survival[t] * tail;
    }
    (value, grad)
}

fn check_change_point(len: usize, change_point: usize) -> Result<()> {
    if change_point > len {
        return Err(CpdError::OutOfRange {
            name: "change_point",
            value: change_point,
            lo: 0,
            hi: len,
        });
    }
    Ok(())
}

/// Expected censored detection delay for a change at `change_point`.
///
/// Only `p_θ..p_{T-1}` enter; the gradient is zero before `θ`.
pub fn delay_loss<F: Scalar>(p: &ProbabilitySeries<F>, change_point: usize) -> Result<LossGrad<F>> {
    let len = p.len();
    check_change_point(len, change_point)?;
    let (value, tail_grad) = censored_stop_time(&p.as_slice()[change_point..], len - change_point);
    let mut grad = vec![F::zero(); change_point];
    grad.extend(tail_grad);
    Ok(LossGrad { value, grad })
}

/// Negated expected time to the first alarm, censored at `min(θ, T)`.
///
/// Minimising it pushes alarms later on the pre-change part of a sequence.
// Note: the censoring part must enter with the same sign as the alarm part.
// Flipping it makes an immediate alarm cheaper than silence on normal data
// (see `flipped_censoring_sign_rewards_immediate_alarm`).
pub fn fa_loss<F: Scalar>(p: &ProbabilitySeries<F>, change_point: usize) -> Result<LossGrad<F>> {
    let len = p.len();
    check_change_point(len, change_point)?;
    let horizon = change_point.min(len);
    let (value, head_grad) = censored_stop_time(p.as_slice(), horizon);
    let mut grad: Vec<F> = head_grad.into_iter().map(|g| -g).collect();
    grad.resize(len, F::zero());
    Ok(LossGrad {
        value: -value,
        grad,
    })
}

/// Batch CPD loss with per-sequence gradients of `total`.
///
/// Both terms are averaged over the batch; `fa_weight` is taken as given
/// (auto-balancing is resolved by the caller).
pub fn cpd_loss<F: Scalar>(
    batch: &[(&ProbabilitySeries<F>, usize)],
    config: &LossConfig,
) -> Result<(LossValue<F>, Vec<Vec<F>>)> {
    config.validate()?;
    if batch.is_empty() {
        return Err(invalid("cpd_loss needs a nonempty batch"));
    }
    let n = F::from_usize_lossy(batch.len());
    let c = F::from_f64_lossy(config.fa_weight);
    let mut delay_sum = F::zero();
    let mut fa_sum = F::zero();
    let mut grads = Vec::with_capacity(batch.len());
    for &(p, change_point) in batch {
        let len = p.len();
        check_change_point(len, change_point)?;
        let (d, f) = match config.horizon_cap {
            Some(cap) if cap < len => {
                let head = p.head(cap);
                let theta = change_point.min(cap);
                (delay_loss(&head, theta)?, fa_loss(&head, theta)?)
            }
            _ => (delay_loss(p, change_point)?, fa_loss(p, change_point)?),
        };
        delay_sum += d.value;
        fa_sum += f.value;
        let mut g: Vec<F> = d
            .grad
            .iter()
            .zip(&f.grad)
            .map(|(&gd, &gf)| (gd + c * gf) / n)
            .collect();
        g.resize(len, F::zero());
        grads.push(g);
    }
    let delay_term = delay_sum / n;
    let fa_term = fa_sum / n;
    Ok((
        LossValue {
            total: delay_term + c * fa_term,
            delay_term,
            fa_term,
        },
        grads,
    ))
}

/// The `fa_weight` that makes both terms equal in magnitude on `batch`.
pub fn balanced_fa_weight<F: Scalar>(
    batch: &[(&ProbabilitySeries<F>, usize)],
    horizon_cap: Option<usize>,
) -> Result<f64> {
    let probe = LossConfig {
        fa_weight: 1.0,
        horizon_cap,
        auto_balance: false,
    };
    let (v, _) = cpd_loss(batch, &probe)?;
    let (d, f) = (v.delay_term.as_f64().abs(), v.fa_term.as_f64().abs());
    if d > 0.0 && f > 0.0 {
        Ok(d / f)
    } else {
        Ok(1.0)
    }
}

/// Per-step mean binary cross-entropy against `y_t = [t >= θ]`.
pub fn bce_loss<F: Scalar>(p: &ProbabilitySeries<F>, change_point: usize) -> Result<LossGrad<F>> {
    let len = p.len();
    check_change_point(len, change_point)?;
    if len == 0 {
        return Ok(LossGrad {
            value: F::zero(),
            grad: Vec::new(),
        });
    }
    let eps = F::from_f64_lossy(BCE_EPSILON);
    let hi = F::one() - eps;
    let n = F::from_usize_lossy(len);
    let mut total = F::zero();
    let grad = p
        .as_slice()
        .iter()
        .enumerate()
        .map(|(t, &pt)| {
            let q = pt.max(eps).min(hi);
            let inside = pt > eps && pt < hi;
            if t >= change_point {
                total -= q.ln();
                if inside {
                    -F::one() / (q * n)
                } else {
                    F::zero()
                }
            } else {
                total -= (F::one() - q).ln();
                if inside {
                    F::one() / ((F::one() - q) * n)
                } else {
                    F::zero()
                }
            }
        })
        .collect();
    Ok(LossGrad {
        value: total / n,
        grad,
    })
}
