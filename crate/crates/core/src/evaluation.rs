// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection quality metrics.
//!
//! Each sequence is classified from its first alarm only. An alarm before the
//! change (or on a sequence without one) is a false positive, a silent
//! abnormal sequence a false negative, so the four categories partition any
//! dataset. Sequences with no alarm are censored at their length `T` for both
//! delay and time-to-false-alarm means.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::detect;
use crate::domain::{ChangeAnnotation, ProbabilitySeries, Sequence, StoppingOutcome};
use crate::error::{invalid, Result};
use crate::model::DetectorModel;
use crate::scalar::{Prob, Scalar};

/// Alarm thresholds swept by default.
pub const DEFAULT_THRESHOLDS: [f64; 10] =
    [0.001, 0.01, 0.1, 0.2, 0.5, 0.7, 0.9, 0.99, 0.999, 0.9999];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    TruePositive,
    FalsePositive,
    TrueNegative,
    FalseNegative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub verdict: Verdict,
    pub alarm_time: usize,
    pub change_point: usize,
    pub len: usize,
}

pub fn classify_sequence(truth: &ChangeAnnotation, outcome: &StoppingOutcome) -> SequenceVerdict {
    let theta = truth.change_point();
    let verdict = match (truth.has_change(), outcome.alarm_raised()) {
        (true, true) if outcome.alarm_time() >= theta => Verdict::TruePositive,
        (_, true) => Verdict::FalsePositive,
        (false, false) => Verdict::TrueNegative,
        (true, false) => Verdict::FalseNegative,
    };
    SequenceVerdict {
        verdict,
        alarm_time: outcome.alarm_time(),
        change_point: theta,
        len: truth.len(),
    }
}

fn segments(split: usize, len: usize) -> Vec<(usize, usize)> {
    if split == 0 || split >= len {
        vec![(0, len)]
    } else {
        vec![(0, split), (split, len)]
    }
}

/// Covering of the true split at `change_point` by the predicted split at
/// `alarm_time`; a value of `len` for either means "no split".
pub fn segment_covering(change_point: usize, alarm_time: usize, len: usize) -> f64 {
    if len == 0 {
        return 1.0;
    }
    let truth = segments(change_point, len);
    let pred = segments(alarm_time, len);
    let jaccard = |a: (usize, usize), b: (usize, usize)| {
        let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
        let union = a.1.max(b.1) - a.0.min(b.0);
        inter as f64 / union as f64
    };
    truth
        .iter()
        .map(|&a| {
            let best = pred.iter().map(|&b| jaccard(a, b)).fold(0.0, f64::max);
            (a.1 - a.0) as f64 * best
        })
        .sum::<f64>()
        / len as f64
}

/// Mean covering over sequences of common length `len`.
pub fn covering(change_points: &[usize], alarm_times: &[usize], len: usize) -> Result<f64> {
    if change_points.len() != alarm_times.len() || change_points.is_empty() {
        return Err(invalid(
            "covering needs equally many (nonzero) true and predicted splits",
        ));
    }
    let total: f64 = change_points
        .iter()
        .zip(alarm_times)
        .map(|(&c, &a)| segment_covering(c, a, len))
        .sum();
    Ok(total / change_points.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayAndFa {
    /// Mean censored delay over sequences with a change.
    pub mean_delay: Option<f64>,
    /// Mean censored first-alarm time over sequences without a change.
    pub mean_time_to_fa: Option<f64>,
}

pub fn delay_and_fa(verdicts: &[SequenceVerdict]) -> Result<DelayAndFa> {
    if verdicts.is_empty() {
        return Err(invalid("no verdicts to average"));
    }
    let (mut delay, mut n_abn, mut fa, mut n_norm) = (0.0, 0usize, 0.0, 0usize);
    for v in verdicts {
        if v.change_point < v.len {
            delay += v.alarm_time.saturating_sub(v.change_point) as f64;
            n_abn += 1;
        } else {
            fa += v.alarm_time as f64;
            n_norm += 1;
        }
    }
    Ok(DelayAndFa {
        mean_delay: (n_abn > 0).then(|| delay / n_abn as f64),
        mean_time_to_fa: (n_norm > 0).then(|| fa / n_norm as f64),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_delay: Option<f64>,
    pub mean_time_to_fa: Option<f64>,
    pub covering: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricBundle {
    pub fn from_verdicts(threshold: f64, verdicts: &[SequenceVerdict]) -> Result<Self> {
        let means = delay_and_fa(verdicts)?;
        let mut counts = [0usize; 4];
        for v in verdicts {
            counts[v.verdict as usize] += 1;
        }
        let [tp, fp, tn, fn_] = counts;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let covering = verdicts
            .iter()
            .map(|v| segment_covering(v.change_point, v.alarm_time, v.len))
            .sum::<f64>()
            / verdicts.len() as f64;
        Ok(Self {
            threshold,
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, verdicts.len()),
            precision,
            recall,
            f1,
            mean_delay: means.mean_delay,
            mean_time_to_fa: means.mean_time_to_fa,
            covering,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(invalid("threshold list is empty"));
    }
    if thresholds.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
        return Err(invalid("thresholds must lie in (0, 1)"));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("thresholds must be strictly increasing"));
    }
    Ok(())
}

/// One bundle per threshold from precomputed probabilities.
pub fn sweep<F: Prob + Sync>(
    scored: &[(ProbabilitySeries<F>, ChangeAnnotation)],
    thresholds: &[f64],
) -> Result<Vec<MetricBundle>> {
    check_thresholds(thresholds)?;
    if scored.is_empty() {
        return Err(invalid("nothing to evaluate"));
    }
    for (p, a) in scored {
        if p.len() != a.len() {
            return Err(invalid(format!(
                "probability series of length {} paired with annotation of length {}",
                p.len(),
                a.len()
            )));
        }
    }
    thresholds
        .iter()
        .map(|&s| {
            let verdicts: Vec<_> = scored
                .iter()
                .map(|(p, a)| classify_sequence(a, &detect(p, s)))
                .collect();
            MetricBundle::from_verdicts(s, &verdicts)
        })
        .collect()
}

/// Runs `model` once over every sequence.
pub fn score_dataset<F: Scalar>(
    model: &DetectorModel<F>,
    data: &[(Sequence<F>, ChangeAnnotation)],
) -> Result<Vec<(ProbabilitySeries<F>, ChangeAnnotation)>> {
    data.par_iter()
        .map(|(seq, ann)| Ok((model.forward(seq)?, *ann)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub time_to_fa: f64,
    pub delay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    /// Sorted by `time_to_fa`.
    pub points: Vec<CurvePoint>,
    pub auc: f64,
    /// All points share a single `time_to_fa`.
    pub degenerate: bool,
}

/// Area under the (mean time to false alarm, mean delay) curve by the
/// trapezoid rule over the observed points; points sharing an x collapse to
/// their mean y.
pub fn detection_auc(bundles: &[MetricBundle]) -> Result<DetectionCurve> {
    if bundles.len() < 2 {
        return Err(invalid("a detection curve needs at least two thresholds"));
    }
    let mut points = bundles
        .iter()
        .map(|b| match (b.mean_time_to_fa, b.mean_delay) {
            (Some(x), Some(y)) => Ok(CurvePoint {
                threshold: b.threshold,
                time_to_fa: x,
                delay: y,
            }),
            _ => Err(invalid(
                "detection curve needs sequences both with and without a change",
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| {
        a.time_to_fa
            .total_cmp(&b.time_to_fa)
            .then(a.delay.total_cmp(&b.delay))
            .then(a.threshold.total_cmp(&b.threshold))
    });

    let mut collapsed: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let x = points[i].time_to_fa;
        let group: Vec<f64> = points[i..]
            .iter()
            .take_while(|p| p.time_to_fa == x)
            .map(|p| p.delay)
            .collect();
        i += group.len();
        collapsed.push((x, group.iter().sum::<f64>() / group.len() as f64));
    }
    let degenerate = collapsed.len() < 2;
    if degenerate {
        log::warn!(
            "degenerate detection curve: every threshold gives time-to-FA {}",
            collapsed[0].0
        );
    }
    let auc = collapsed
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    Ok(DetectionCurve {
        points,
        auc,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(t: Option<usize>, len: usize) -> StoppingOutcome {
        StoppingOutcome::new(t, len)
    }

    #[test]
    fn verdict_table() {
        let normal = ChangeAnnotation::normal(64);
        let abn = ChangeAnnotation::abnormal(64, 20, 1).unwrap();
        let v = |a: &ChangeAnnotation, t| classify_sequence(a, &outcome(t, 64)).verdict;
        assert_eq!(v(&normal, None), Verdict::TrueNegative);
        assert_eq!(v(&normal, Some(3)), Verdict::FalsePositive);
        assert_eq!(v(&abn, Some(25)), Verdict::TruePositive);
        assert_eq!(v(&abn, Some(20)), Verdict::TruePositive);
        assert_eq!(v(&abn, Some(5)), Verdict::FalsePositive);
        assert_eq!(v(&abn, None), Verdict::FalseNegative);
    }

    #[test]
    fn covering_examples() {
        assert_eq!(segment_covering(5, 5, 10), 1.0);
        assert_eq!(segment_covering(10, 10, 10), 1.0);
        let expected = (5.0 * (5.0 / 6.0) + 5.0 * (4.0 / 5.0)) / 10.0;
        assert!((segment_covering(5, 6, 10) - expected).abs() < 1e-15);
        assert!((expected - 0.8167).abs() < 1e-4);
        assert!(segment_covering(5, 10, 10) > 0.0);
        assert_eq!(covering(&[5, 10], &[5, 10], 10).unwrap(), 1.0);
        assert!(covering(&[5], &[], 10).is_err());
    }

    #[test]
    fn delay_fa_censoring() {
        let mk = |theta, t: Option<usize>| {
            let a = if theta < 64 {
                ChangeAnnotation::abnormal(64, theta, 1).unwrap()
            } else {
                ChangeAnnotation::normal(64)
            };
            classify_sequence(&a, &outcome(t, 64))
        };
        let perfect = [mk(10, Some(10)), mk(64, None)];
        let m = delay_and_fa(&perfect).unwrap();
        assert_eq!((m.mean_delay, m.mean_time_to_fa), (Some(0.0), Some(64.0)));
        let eager = [mk(10, Some(0)), mk(64, Some(0))];
        let m = delay_and_fa(&eager).unwrap();
        assert_eq!((m.mean_delay, m.mean_time_to_fa), (Some(0.0), Some(0.0)));
        let missed = [mk(30, None)];
        let m = delay_and_fa(&missed).unwrap();
        assert_eq!((m.mean_delay, m.mean_time_to_fa), (Some(34.0), None));
        assert!(delay_and_fa(&[]).is_err());
    }

    #[test]
    fn f1_zero_over_zero() {
        let v = classify_sequence(&ChangeAnnotation::normal(8), &outcome(Some(1), 8));
        let b = MetricBundle::from_verdicts(0.5, &[v]).unwrap();
        assert_eq!((b.precision, b.recall, b.f1), (0.0, 0.0, 0.0));
        assert_eq!(b.total(), 1);
    }

    fn bundle(x: f64, y: f64, s: f64) -> MetricBundle {
        MetricBundle {
            threshold: s,
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
            accuracy: 0.0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            mean_delay: Some(y),
            mean_time_to_fa: Some(x),
            covering: 1.0,
        }
    }

    #[test]
    fn auc_examples() {
        let c = detection_auc(&[bundle(0.0, 64.0, 0.1), bundle(64.0, 0.0, 0.9)]).unwrap();
        assert_eq!(c.auc, 2048.0);
        let flat = [
            bundle(3.0, 2.0, 0.1),
            bundle(10.0, 2.0, 0.2),
            bundle(7.0, 2.0, 0.3),
        ];
        assert_eq!(detection_auc(&flat).unwrap().auc, 14.0);
        let same_x = [bundle(5.0, 1.0, 0.1), bundle(5.0, 3.0, 0.2)];
        let c = detection_auc(&same_x).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.auc, 0.0);
        // ties collapse to the mean delay
        let tie = [
            bundle(0.0, 0.0, 0.1),
            bundle(2.0, 1.0, 0.2),
            bundle(2.0, 3.0, 0.3),
        ];
        assert_eq!(detection_auc(&tie).unwrap().auc, 2.0);
        assert!(detection_auc(&[bundle(0.0, 1.0, 0.5)]).is_err());
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let scored = vec![(
            ProbabilitySeries::new(vec![0.1, 0.9]).unwrap(),
            ChangeAnnotation::abnormal(2, 1, 1).unwrap(),
        )];
        assert!(sweep(&scored, &[]).is_err());
        assert!(sweep(&scored, &[0.5, 0.2]).is_err());
        assert!(sweep(&scored, &[0.0, 0.5]).is_err());
        let b = sweep(&scored, &[0.05, 0.5, 0.95]).unwrap();
        assert_eq!(b.iter().map(|b| b.tp).collect::<Vec<_>>(), [0, 1, 0]);
        assert_eq!(b[0].fp, 1);
        assert_eq!(b[2].fn_, 1);
    }
}
