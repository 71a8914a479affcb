// SPDX-License-Identifier: MIT OR Apache-2.0

use cpdkit::datagen::{generate_dataset, generate_sequence, DatasetSpec, RegimeSpec};
use cpdkit::domain::Sequence;

fn regime(types: usize) -> RegimeSpec {
    RegimeSpec::digit_transitions(types, 1.0, 2.0).unwrap()
}

#[test]
fn dataset_sizes_follow_the_per_type_protocol() {
    for (types, expected) in [(1, 1000), (10, 10000)] {
        let d = generate_dataset(&DatasetSpec {
            regime: regime(types),
            sequences_per_type: 500,
            seed: 1,
        })
        .unwrap();
        assert_eq!(d.len(), expected);
        assert_eq!(
            d.iter().filter(|(_, a)| a.has_change()).count(),
            expected / 2
        );
    }
}

#[test]
fn pre_segment_mean_matches_the_pre_distribution() {
    let r = regime(1);
    let pre = &r.change_types[0].pre;
    let (mut sum, mut count) = (vec![0.0; r.dim], 0usize);
    for i in 0..500 {
        let (seq, ann) = generate_sequence(&r, 1, true, 10_000 + i).unwrap();
        for x in seq.rows().take(ann.change_point()) {
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
            count += 1;
        }
    }
    // five standard errors of the sample mean; pre segments hold at least 16 rows each
    let tol = 5.0 * pre.scale / ((500 * 16) as f64).sqrt();
    for (s, mu) in sum.iter().zip(&pre.mean) {
        assert!(
            (s / count as f64 - mu).abs() < tol,
            "mean {} vs {mu}",
            s / count as f64
        );
    }
}

fn projected_mean(seq: &Sequence<f64>, rows: std::ops::Range<usize>, dir: &[f64]) -> f64 {
    let n = rows.len() as f64;
    rows.map(|t| seq.row(t).iter().zip(dir).map(|(a, b)| a * b).sum::<f64>())
        .sum::<f64>()
        / n
}

#[test]
fn distribution_changes_exactly_at_the_annotation() {
    let r = regime(2);
    let ct = &r.change_types[1];
    let dir: Vec<f64> = ct
        .post
        .mean
        .iter()
        .zip(&ct.pre.mean)
        .map(|(a, b)| a - b)
        .collect();
    let norm2: f64 = dir.iter().map(|v| v * v).sum();
    // the last pre rows and the first transition row, pooled over sequences
    let (mut before, mut at, mut post) = (0.0, 0.0, 0.0);
    let n = 2000;
    for i in 0..n {
        let (seq, ann) = generate_sequence(&r, 2, true, i).unwrap();
        let theta = ann.change_point();
        before += projected_mean(&seq, theta - 1..theta, &dir);
        at += projected_mean(&seq, theta..theta + 1, &dir);
        post += projected_mean(&seq, 60..64, &dir);
    }
    let pre_level: f64 = ct.pre.mean.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let post_level: f64 = ct.post.mean.iter().zip(&dir).map(|(a, b)| a * b).sum();
    let se = (norm2 / n as f64).sqrt();
    assert!((before / n as f64 - pre_level).abs() < 5.0 * se);
    // first transition row is shifted by α = 1/(L+1) ≥ 1/11 of the gap
    assert!(at / n as f64 - pre_level > (post_level - pre_level) / 11.0 - 5.0 * se);
    assert!((post / n as f64 - post_level).abs() < 5.0 * se);
}

#[test]
fn transition_lengths_are_uniform() {
    // σ → 0 makes the transition visible: rows strictly between the two means
    let mut r = RegimeSpec::digit_transitions(1, 1e-9, 2.0).unwrap();
    r.transition_length_range = [1, 10];
    let ct = r.change_types[0].clone();
    let axis = ct.post.mean.iter().position(|&m| m > 0.0).unwrap();
    let top = ct.post.mean[axis];
    let mut counts = [0usize; 10];
    let n = 5000;
    for i in 0..n {
        let (seq, ann) = generate_sequence(&r, 1, true, i).unwrap();
        let len = seq
            .rows()
            .filter(|x| x[axis] > 1e-6 && x[axis] < top - 1e-6)
            .count();
        assert!(ann.change_point() < 64);
        counts[len - 1] += 1;
    }
    let expected = n as f64 / 10.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // chi-square with 9 degrees of freedom: P(X > 27.88) = 0.001
    assert!(chi2 < 27.88, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn generation_is_a_pure_function_of_the_spec() {
    let spec = DatasetSpec {
        regime: regime(4),
        sequences_per_type: 20,
        seed: 77,
    };
    assert_eq!(
        generate_dataset(&spec).unwrap(),
        generate_dataset(&spec).unwrap()
    );
    let other = DatasetSpec {
        seed: 78,
        ..spec.clone()
    };
    assert_ne!(
        generate_dataset(&spec).unwrap(),
        generate_dataset(&other).unwrap()
    );
}
