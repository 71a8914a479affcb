// SPDX-License-Identifier: MIT OR Apache-2.0

//! Figures built from evaluation reports.

use std::collections::BTreeMap;

use cpdkit::detection::detect;
use cpdkit::domain::ProbabilitySeries;

use crate::report::{EvalReport, ModelReport};
use crate::svg::{render, Chart, Series, VLine};

fn curve_label(report: &EvalReport, m: &ModelReport, several: bool) -> String {
    if several {
        format!("{} K={}", m.label, report.dataset.types)
    } else {
        m.label.clone()
    }
}

/// Mean delay against mean time to false alarm, one curve per model.
pub fn detection_curves(reports: &[EvalReport]) -> String {
    let several = reports.len() > 1;
    let series = reports
        .iter()
        .flat_map(|r| {
            r.models.iter().map(move |m| Series {
                label: curve_label(r, m, several),
                points: m
                    .curve
                    .points
                    .iter()
                    .map(|p| (p.time_to_fa, p.delay))
                    .collect(),
            })
        })
        .collect();
    render(
        &[Chart {
            title: "Detection curves".into(),
            x_label: "mean time to false alarm".into(),
            y_label: "mean detection delay".into(),
            series,
            ..Chart::default()
        }],
        1,
    )
}

/// Probability traces of the stored sequences with the true change point and
/// the alarm at each model's best-covering threshold.
pub fn traces(report: &EvalReport) -> anyhow::Result<String> {
    let mut charts = Vec::new();
    for m in &report.models {
        let s = m.best_covering().threshold;
        for t in &m.traces {
            let p = ProbabilitySeries::new(t.probabilities.clone())?;
            let tau = detect(&p, s);
            let mut vlines = Vec::new();
            if t.change_point < t.len {
                vlines.push(VLine {
                    x: t.change_point as f64,
                    label: "θ".into(),
                    dashed: false,
                });
            }
            if tau.alarm_raised() {
                vlines.push(VLine {
                    x: tau.alarm_time() as f64,
                    label: "τ".into(),
                    dashed: true,
                });
            }
            charts.push(Chart {
                title: format!("{}: {}", m.label, t.id),
                x_label: "t".into(),
                y_label: "p_t".into(),
                series: vec![
                    Series {
                        label: m.label.clone(),
                        points: t
                            .probabilities
                            .iter()
                            .enumerate()
                            .map(|(i, &v)| (i as f64, v))
                            .collect(),
                    },
                    Series {
                        label: format!("s={s}"),
                        points: vec![(0.0, s), ((t.len.max(1) - 1) as f64, s)],
                    },
                ],
                vlines,
                y_range: Some((0.0, 1.0)),
            });
        }
    }
    Ok(render(&charts, 2))
}

/// AUC and best covering against the number of change types, or `None` when
/// the reports cover fewer than two distinct type counts.
pub fn metric_vs_types(reports: &[EvalReport]) -> Option<String> {
    let mut by_label: BTreeMap<&str, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for r in reports {
        for m in &r.models {
            by_label.entry(&m.label).or_default().push((
                r.dataset.types as f64,
                m.curve.auc,
                m.best_covering().covering,
            ));
        }
    }
    let distinct: std::collections::BTreeSet<usize> =
        reports.iter().map(|r| r.dataset.types).collect();
    if distinct.len() < 2 {
        return None;
    }
    let panel = |title: &str, y: &str, pick: fn(&(f64, f64, f64)) -> f64| Chart {
        title: title.into(),
        x_label: "number of change types K".into(),
        y_label: y.into(),
        series: by_label
            .iter()
            .map(|(label, pts)| {
                let mut points: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, pick(p))).collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series {
                    label: label.to_string(),
                    points,
                }
            })
            .collect(),
        ..Chart::default()
    };
    Some(render(
        &[
            panel("AUC vs K", "detection-curve AUC", |p| p.1),
            panel("Covering vs K", "best covering", |p| p.2),
        ],
        2,
    ))
}
