// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line pipeline: generate → train → evaluate → plot, plus a
//! `reproduce` command that runs the whole change-type grid.

#![forbid(unsafe_code)]

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;
pub mod report;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cpdkit::LossKind;

use config::{ExperimentConfig, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "cpdkit",
    version,
    about = "Online change-point detection experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    pub force: bool,
    /// Number of change types K.
    #[arg(long, global = true)]
    pub types: Option<usize>,
    /// Abnormal (and as many normal) sequences per change type.
    #[arg(long, global = true)]
    pub per_type: Option<usize>,
    /// Comma-separated alarm thresholds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<LossKind>,
        /// Dataset file; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Fixed false-alarm weight c (disables auto-balance).
        #[arg(long)]
        fa_weight: Option<f64>,
    },
    /// Sweep thresholds for one or more models on one dataset.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Model file, optionally as LABEL=PATH; repeatable.
        #[arg(long = "model", required = true)]
        models: Vec<String>,
    },
    /// Render SVG figures from evaluation reports.
    Plot {
        #[command(flatten)]
        common: Common,
        /// report.json from evaluate or reproduce; repeatable.
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run the K × {cpd, bce} grid end to end.
    Reproduce {
        #[command(flatten)]
        common: Common,
        /// Comma-separated change-type counts.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    s.parse().map_err(|e: cpdkit::CpdError| e.to_string())
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        types: c.types,
        per_type: c.per_type,
        thresholds: c.thresholds.clone(),
        out: c.out.clone(),
        ..Overrides::default()
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { common } => {
            let cfg = ExperimentConfig::load(common.config.as_deref(), &overrides(&common))?;
            commands::generate(&cfg, common.force)
        }
        Command::Train {
            common,
            loss,
            data,
            epochs,
            fa_weight,
        } => {
            let o = Overrides {
                loss,
                epochs,
                fa_weight,
                ..overrides(&common)
            };
            let cfg = ExperimentConfig::load(common.config.as_deref(), &o)?;
            commands::train(&cfg, data.as_deref(), common.force)
        }
        Command::Evaluate {
            common,
            data,
            models,
        } => {
            let cfg = ExperimentConfig::load(common.config.as_deref(), &overrides(&common))?;
            let models = models
                .iter()
                .map(|m| commands::parse_model_arg(m))
                .collect::<Vec<_>>();
            commands::evaluate(&cfg, data.as_deref(), &models, common.force)
        }
        Command::Plot { common, reports } => {
            let cfg = ExperimentConfig::load(common.config.as_deref(), &overrides(&common))?;
            commands::plot(&cfg, &reports, common.force)
        }
        Command::Reproduce {
            common,
            grid,
            epochs,
        } => {
            let o = Overrides {
                grid,
                epochs,
                ..overrides(&common)
            };
            let cfg = ExperimentConfig::load(common.config.as_deref(), &o)?;
            commands::reproduce(&cfg, common.force)
        }
    }
}
