// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force stopping-time enumeration.
//!
//! Alarms at each step are modelled as independent Bernoulli draws with the
//! emitted probabilities, so `P(τ = t) = p_t · Π_{k<t} (1 - p_k)`. These
//! functions enumerate that distribution literally; the loss module computes
//! the same expectations through survival-sum recursions and is checked
//! against them.

use super::ProbabilitySeries;
use crate::error::{CpdError, Result};
use crate::scalar::{index, Prob};

/// Distribution of the first alarm: entries `0..T` are `P(τ = t)`, entry `T`
/// is the probability that no alarm fires.
pub fn stopping_distribution<F: Prob>(p: &ProbabilitySeries<F>) -> Vec<F> {
    enumerate(p.as_slice())
}

fn enumerate<F: Prob>(p: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(p.len() + 1);
    let mut survive = F::one();
    for &pt in p {
        out.push(pt * survive);
        survive = survive * (F::one() - pt);
    }
    out.push(survive);
    out
}

/// Expected censored detection delay for a change at `change_point`.
///
/// Only probabilities from the change point on enter; a missed change is
/// charged `T - θ`.
pub fn oracle_expected_delay<F: Prob>(p: &ProbabilitySeries<F>, change_point: usize) -> Result<F> {
    let len = p.len();
    if change_point > len {
        return Err(CpdError::OutOfRange {
            name: "change_point",
            value: change_point,
            lo: 0,
            hi: len,
        });
    }
    let q = enumerate(&p.as_slice()[change_point..]);
    Ok(q.iter()
        .enumerate()
        .fold(F::zero(), |acc, (delay, &w)| acc + index::<F>(delay) * w))
}

/// `E[min(τ, horizon)]`, the expected alarm time censored at `horizon`.
pub fn oracle_expected_alarm_time<F: Prob>(p: &ProbabilitySeries<F>, horizon: usize) -> Result<F> {
    let len = p.len();
    if horizon > len {
        return Err(CpdError::OutOfRange {
            name: "horizon",
            value: horizon,
            lo: 0,
            hi: len,
        });
    }
    let q = enumerate(&p.as_slice()[..horizon]);
    Ok(q.iter()
        .enumerate()
        .fold(F::zero(), |acc, (t, &w)| acc + index::<F>(t) * w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = Ratio<i64>;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n, d)
    }

    fn series(v: &[f64]) -> ProbabilitySeries<f64> {
        ProbabilitySeries::new(v.to_vec()).unwrap()
    }

    #[test]
    fn certain_and_impossible_alarms() {
        assert_eq!(
            stopping_distribution(&series(&[1.0, 0.3, 0.7])),
            vec![1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            stopping_distribution(&series(&[0.0, 0.0, 0.0])),
            vec![0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn half_half_zero_exact() {
        let p = ProbabilitySeries::new(vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap();
        assert_eq!(
            stopping_distribution(&p),
            vec![q(1, 2), q(1, 4), q(0, 1), q(1, 4)]
        );
    }

    #[test]
    fn half_half_zero_monte_carlo() {
        let p = [0.5, 0.5, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let tau = p
                .iter()
                .position(|&pt| rng.random::<f64>() < pt)
                .unwrap_or(3);
            counts[tau] += 1;
        }
        let expected = stopping_distribution(&series(&p));
        for (c, e) in counts.iter().zip(&expected) {
            // 5 standard errors of a binomial proportion
            let tol = 5.0 * (e * (1.0 - e) / n as f64).sqrt() + 1e-12;
            assert!((*c as f64 / n as f64 - e).abs() <= tol);
        }
    }

    #[test]
    fn delay_examples() {
        let p = ProbabilitySeries::new(vec![q(0, 1), q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(oracle_expected_delay(&p, 1).unwrap(), q(3, 4));
        assert_eq!(oracle_expected_delay(&p, 3).unwrap(), q(0, 1));
        let sure = series(&[0.2, 1.0, 1.0]);
        assert_eq!(oracle_expected_delay(&sure, 1).unwrap(), 0.0);
        assert!(oracle_expected_delay(&sure, 4).is_err());
    }

    #[test]
    fn alarm_time_examples() {
        assert_eq!(
            oracle_expected_alarm_time(&series(&[0.0; 3]), 3).unwrap(),
            3.0
        );
        assert_eq!(
            oracle_expected_alarm_time(&series(&[1.0, 0.4, 0.2]), 3).unwrap(),
            0.0
        );
        let p = ProbabilitySeries::new(vec![q(1, 2), q(0, 1), q(0, 1)]).unwrap();
        assert_eq!(oracle_expected_alarm_time(&p, 3).unwrap(), q(3, 2));
        assert!(oracle_expected_alarm_time(&p, 4).is_err());
    }

    fn probs() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..40)
    }

    proptest! {
        #[test]
        fn distribution_is_normalised(p in probs()) {
            let q = stopping_distribution(&series(&p));
            prop_assert_eq!(q.len(), p.len() + 1);
            prop_assert!(q.iter().all(|&w| w >= 0.0));
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn delay_within_bounds(p in probs(), frac in 0.0f64..=1.0) {
            let theta = (frac * p.len() as f64).floor() as usize;
            let d = oracle_expected_delay(&series(&p), theta).unwrap();
            prop_assert!(d >= -1e-12 && d <= (p.len() - theta) as f64 + 1e-12);
        }

        #[test]
        fn alarm_time_within_bounds(p in probs(), frac in 0.0f64..=1.0) {
            let h = (frac * p.len() as f64).floor() as usize;
            let e = oracle_expected_alarm_time(&series(&p), h).unwrap();
            prop_assert!(e >= -1e-12 && e <= h as f64 + 1e-12);
        }

        #[test]
        fn raising_a_post_change_probability_never_slows_detection(
            p in probs(), frac in 0.0f64..1.0, which in 0.0f64..1.0, bump in 0.0f64..=1.0,
        ) {
            let theta = (frac * p.len() as f64).floor() as usize;
            let t = theta + ((which * (p.len() - theta) as f64).floor() as usize).min(p.len() - theta - 1);
            let mut raised = p.clone();
            raised[t] += bump * (1.0 - raised[t]);
            let before = oracle_expected_delay(&series(&p), theta).unwrap();
            let after = oracle_expected_delay(&series(&raised), theta).unwrap();
            prop_assert!(after <= before + 1e-12);
        }
    }
}
