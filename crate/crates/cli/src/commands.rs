// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cpdkit::datagen::{encode_dataset, generate_dataset, read_dataset, Dataset};
use cpdkit::model::{encode_model, load_model, train as fit};
use cpdkit::{DetectorModel, LossKind};

use crate::config::ExperimentConfig;
use crate::output::OutDir;
use crate::plot;
use crate::report::{
    metrics_csv, metrics_rows, training_log_csv, DatasetSummary, EvalReport, ModelReport,
    METRICS_HEADER,
};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";

fn model_file(loss: LossKind) -> String {
    format!("model-{}.bin", loss.name())
}

fn log_file(loss: LossKind) -> String {
    format!("train-log-{}.csv", loss.name())
}

/// Reads `path`, or the config's dataset path, or generates the training set.
fn load_or_generate(
    cfg: &ExperimentConfig,
    path: Option<&Path>,
) -> anyhow::Result<(Dataset, String)> {
    match path.or(cfg.data.path.as_deref()) {
        Some(p) => Ok((read_dataset(p)?, p.display().to_string())),
        None => Ok((
            generate_dataset(&cfg.data.spec(cfg.data.per_type, cfg.seed)?)?,
            format!("generated(seed={})", cfg.seed),
        )),
    }
}

fn data_dim(data: &Dataset) -> anyhow::Result<usize> {
    match data.first() {
        Some((s, _)) => Ok(s.dim()),
        None => bail!("dataset is empty"),
    }
}

pub fn generate(cfg: &ExperimentConfig, force: bool) -> anyhow::Result<()> {
    let out = OutDir::prepare(
        cfg.out_dir()?,
        force,
        &[DATASET_FILE, "generate.config.toml"],
    )?;
    let data = generate_dataset(&cfg.data.spec(cfg.data.per_type, cfg.seed)?)?;
    out.write(DATASET_FILE, encode_dataset(&data))?;
    out.write("generate.config.toml", cfg.to_toml()?)?;
    log::info!(
        "wrote {} sequences to {}",
        data.len(),
        out.path(DATASET_FILE).display()
    );
    Ok(())
}

fn train_one(
    cfg: &ExperimentConfig,
    data: &Dataset,
    loss: LossKind,
) -> anyhow::Result<(DetectorModel, String)> {
    let mut model_cfg = cfg.model;
    model_cfg.input_dim = data_dim(data)?;
    let (model, log) = fit(data, loss, model_cfg, &cfg.train, &cfg.loss_config)
        .with_context(|| format!("training the {} model", loss.name()))?;
    Ok((model, training_log_csv(&log)))
}

pub fn train(cfg: &ExperimentConfig, data: Option<&Path>, force: bool) -> anyhow::Result<()> {
    let (model_name, log_name) = (model_file(cfg.loss), log_file(cfg.loss));
    let cfg_name = format!("train-{}.config.toml", cfg.loss.name());
    let out = OutDir::prepare(cfg.out_dir()?, force, &[&model_name, &log_name, &cfg_name])?;
    let (dataset, _) = load_or_generate(cfg, data)?;
    let (model, log) = train_one(cfg, &dataset, cfg.loss)?;
    let mut resolved = cfg.clone();
    resolved.model = *model.config();
    if let Some(p) = data {
        resolved.data.path = Some(p.to_path_buf());
    }
    out.write(&model_name, encode_model(&model))?;
    out.write(&log_name, log)?;
    out.write(&cfg_name, resolved.to_toml()?)?;
    Ok(())
}

/// `LABEL=PATH`, or a bare path labelled by its file stem without a
/// `model-` prefix.
pub fn parse_model_arg(arg: &str) -> (String, PathBuf) {
    if let Some((label, path)) = arg.split_once('=') {
        return (label.to_string(), PathBuf::from(path));
    }
    let path = PathBuf::from(arg);
    let stem = path
        .file_stem()
        .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
    let label = stem.strip_prefix("model-").unwrap_or(&stem).to_string();
    (label, path)
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    data: Option<&Path>,
    models: &[(String, PathBuf)],
    force: bool,
) -> anyhow::Result<()> {
    let out = OutDir::prepare(
        cfg.out_dir()?,
        force,
        &[METRICS_FILE, REPORT_FILE, "evaluate.config.toml"],
    )?;
    let (dataset, source) = load_or_generate(cfg, data)?;
    let dim = data_dim(&dataset)?;
    let mut loaded = Vec::with_capacity(models.len());
    for (label, path) in models {
        let m: DetectorModel =
            load_model(path).with_context(|| format!("loading {}", path.display()))?;
        if m.config().input_dim != dim {
            bail!(
                "model {} expects {}-dimensional input but the dataset has dimension {dim}",
                path.display(),
                m.config().input_dim
            );
        }
        loaded.push((label.as_str(), m));
    }
    if let Some(dup) = loaded
        .iter()
        .enumerate()
        .find(|(i, (l, _))| loaded[..*i].iter().any(|(o, _)| o == l))
    {
        bail!("model label '{}' given twice", dup.1 .0);
    }
    let reports = loaded
        .iter()
        .map(|(label, m)| ModelReport::evaluate(label, m, &dataset, &cfg.thresholds))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = EvalReport {
        dataset: DatasetSummary::of(&dataset, source),
        thresholds: cfg.thresholds.clone(),
        models: reports,
    };
    let mut resolved = cfg.clone();
    if let Some(p) = data {
        resolved.data.path = Some(p.to_path_buf());
    }
    out.write(METRICS_FILE, metrics_csv(&report.models))?;
    out.write(REPORT_FILE, report.to_json()?)?;
    out.write("evaluate.config.toml", resolved.to_toml()?)?;
    Ok(())
}

pub fn plot(cfg: &ExperimentConfig, report_paths: &[PathBuf], force: bool) -> anyhow::Result<()> {
    let reports = report_paths
        .iter()
        .map(|p| EvalReport::read(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    write_plots(&OutDir::prepare(cfg.out_dir()?, force, &[])?, &reports)
}

fn write_plots(out: &OutDir, reports: &[EvalReport]) -> anyhow::Result<()> {
    out.write("detection-curves.svg", plot::detection_curves(reports))?;
    if let Some(first) = reports.first() {
        out.write("traces.svg", plot::traces(first)?)?;
    }
    if let Some(svg) = plot::metric_vs_types(reports) {
        out.write("metrics-vs-k.svg", svg)?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "types,model,auc,best_covering,best_covering_threshold,best_f1,best_f1_threshold,time_to_fa_at_lowest";

/// Trains and evaluates both losses for every K in the grid.
pub fn reproduce(cfg: &ExperimentConfig, force: bool) -> anyhow::Result<()> {
    let out = OutDir::prepare(
        cfg.out_dir()?,
        force,
        &[METRICS_FILE, SUMMARY_FILE, "reproduce.config.toml"],
    )?;
    let mut metrics = format!("types,{METRICS_HEADER}\n");
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut reports = Vec::new();
    for &k in &cfg.reproduce.grid {
        let mut cell = cfg.clone();
        cell.data.types = k;
        cell.data.path = None;
        cell.validate()?;
        let files = [
            REPORT_FILE,
            &model_file(LossKind::Cpd),
            &model_file(LossKind::Bce),
            &log_file(LossKind::Cpd),
            &log_file(LossKind::Bce),
        ];
        let dir = out.subdir(&format!("k{k}"), &files)?;
        let train_set = generate_dataset(&cell.data.spec(cell.data.per_type, cell.seed)?)?;
        let test_set =
            generate_dataset(&cell.data.spec(cell.data.test_per_type, cell.test_seed())?)?;
        let mut models = Vec::new();
        for loss in [LossKind::Cpd, LossKind::Bce] {
            log::info!("K={k}: training {}", loss.name());
            let (model, log) = train_one(&cell, &train_set, loss)?;
            dir.write(&model_file(loss), encode_model(&model))?;
            dir.write(&log_file(loss), log)?;
            models.push(ModelReport::evaluate(
                loss.name(),
                &model,
                &test_set,
                &cell.thresholds,
            )?);
        }
        for m in &models {
            for row in metrics_rows(m) {
                metrics += &format!("{k},{row}\n");
            }
            let (cov, f1) = (m.best_covering(), m.best_f1());
            let fa = m.bundles[0]
                .mean_time_to_fa
                .map_or_else(String::new, |v| v.to_string());
            summary += &format!(
                "{k},{},{},{},{},{},{},{fa}\n",
                m.label, m.curve.auc, cov.covering, cov.threshold, f1.f1, f1.threshold
            );
        }
        let report = EvalReport {
            dataset: DatasetSummary::of(&test_set, format!("generated(seed={})", cell.test_seed())),
            thresholds: cell.thresholds.clone(),
            models,
        };
        dir.write(REPORT_FILE, report.to_json()?)?;
        reports.push(report);
    }
    out.write(METRICS_FILE, metrics)?;
    out.write(SUMMARY_FILE, summary)?;
    write_plots(&out, &reports)?;
    out.write("reproduce.config.toml", cfg.to_toml()?)?;
    Ok(())
}
