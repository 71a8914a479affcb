// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation reports: the JSON document and the flat metrics CSV.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use cpdkit::datagen::Dataset;
use cpdkit::evaluation::{detection_auc, score_dataset, sweep, DetectionCurve, MetricBundle};
use cpdkit::{DetectorModel, ModelConfig, TrainingLog};
use serde::{Deserialize, Serialize};

/// Sequences per kind (abnormal, normal) whose probabilities are kept.
const TRACES_PER_KIND: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub sequences: usize,
    pub types: usize,
    pub length: usize,
}

impl DatasetSummary {
    pub fn of(data: &Dataset, source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            sequences: data.len(),
            types: data
                .iter()
                .filter_map(|(_, a)| a.change_type())
                .max()
                .unwrap_or(0) as usize,
            length: data.first().map_or(0, |(s, _)| s.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub change_point: usize,
    pub len: usize,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub label: String,
    pub model: ModelConfig,
    pub bundles: Vec<MetricBundle>,
    pub curve: DetectionCurve,
    pub traces: Vec<Trace>,
}

impl ModelReport {
    pub fn evaluate(
        label: &str,
        model: &DetectorModel,
        data: &Dataset,
        thresholds: &[f64],
    ) -> anyhow::Result<Self> {
        let scored = score_dataset(model, data)?;
        let bundles = sweep(&scored, thresholds)?;
        let curve = detection_auc(&bundles)?;
        let mut taken = [0usize; 2];
        let traces = scored
            .iter()
            .zip(data)
            .filter(|((_, a), _)| {
                let slot = &mut taken[a.has_change() as usize];
                *slot += 1;
                *slot <= TRACES_PER_KIND
            })
            .map(|((p, a), (s, _))| Trace {
                id: s.id().to_string(),
                change_point: a.change_point(),
                len: a.len(),
                probabilities: p.as_slice().to_vec(),
            })
            .collect();
        Ok(Self {
            label: label.to_string(),
            model: *model.config(),
            bundles,
            curve,
            traces,
        })
    }

    /// The bundle with the highest covering; ties go to the lower threshold.
    pub fn best_covering(&self) -> &MetricBundle {
        self.bundles
            .iter()
            .reduce(|best, b| if b.covering > best.covering { b } else { best })
            .expect("a report has at least one bundle")
    }

    pub fn best_f1(&self) -> &MetricBundle {
        self.bundles
            .iter()
            .reduce(|best, b| if b.f1 > best.f1 { b } else { best })
            .expect("a report has at least one bundle")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: DatasetSummary,
    pub thresholds: Vec<f64>,
    pub models: Vec<ModelReport>,
}

impl EvalReport {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub const METRICS_HEADER: &str =
    "model,threshold,time_to_fa,detection_delay,f1,covering,auc,accuracy,recall,precision,tp,fp,tn,fn";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// One CSV line per threshold, without a trailing newline per line.
pub fn metrics_rows(report: &ModelReport) -> Vec<String> {
    report
        .bundles
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                report.label,
                b.threshold,
                opt(b.mean_time_to_fa),
                opt(b.mean_delay),
                b.f1,
                b.covering,
                report.curve.auc,
                b.accuracy,
                b.recall,
                b.precision,
                b.tp,
                b.fp,
                b.tn,
                b.fn_
            )
        })
        .collect()
}

pub fn metrics_csv(reports: &[ModelReport]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for line in reports.iter().flat_map(metrics_rows) {
        s += &line;
        s.push('\n');
    }
    s
}

pub fn training_log_csv(log: &TrainingLog) -> String {
    let mut s = String::from("epoch,loss,delay_term,fa_term,fa_weight\n");
    for e in &log.epochs {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            e.epoch, e.loss, e.delay_term, e.fa_term, log.fa_weight
        );
    }
    s
}
