use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use histexpr::features::{aggregate, PatchFeatureSet};
use histexpr::regressor::{train, train_patchwise, TrainConfig, TrainOutcome};
use histexpr::synthetic::{regression_cohort, RegressionTask};
use serde::Serialize;

use super::train::base_config;
use super::{load_panel, read_expression, read_patch_sets, Env, ExpressionScale};
use crate::error::{CliError, Context, Result};

pub const REPORT: &str = "benchmark.json";

/// Worked example: four devices for 8.48 hours at 300 W.
const REFERENCE_DEVICES: f64 = 4.0;
const REFERENCE_HOURS: f64 = 8.48;
const REFERENCE_WATTS: f64 = 300.0;
const REFERENCE_KWH: f64 = 10.176;

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory of `.h2rf` files. Without it a synthetic cohort is used.
    #[arg(long, requires = "expression")]
    pub features: Option<PathBuf>,
    #[arg(long, requires = "features")]
    pub expression: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpressionScale::Raw)]
    pub expression_scale: ExpressionScale,
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub patients: usize,
    #[arg(long, default_value_t = 100)]
    pub patches: usize,
    #[arg(long, default_value_t = 64)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub genes: usize,
    /// Epochs timed in each mode.
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub devices: f64,
    /// Power draw per device.
    #[arg(long, default_value_t = 300.0)]
    pub watts: f64,
}

pub fn kwh(devices: f64, hours: f64, watts: f64) -> f64 {
    devices * hours * watts / 1000.0
}

#[derive(Debug, Serialize)]
struct Dataset {
    source: &'static str,
    patients: usize,
    total_patches: usize,
    features: usize,
    genes: usize,
}

#[derive(Debug, Serialize)]
struct Mode {
    samples_per_epoch: usize,
    epochs: usize,
    epoch_seconds: f64,
    train_seconds: f64,
    kwh: f64,
}

#[derive(Debug, Serialize)]
struct Energy {
    devices: f64,
    watts: f64,
    formula: &'static str,
}

#[derive(Debug, Serialize)]
struct ReferenceCheck {
    devices: f64,
    hours: f64,
    watts: f64,
    kwh: f64,
    expected_kwh: f64,
    matches: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    dataset: Dataset,
    config: TrainConfig,
    aggregated: Mode,
    patchwise: Mode,
    speedup: f64,
    energy: Energy,
    reference_example: ReferenceCheck,
}

/// Source label, patch sets and matching targets.
type Loaded = (&'static str, Vec<PatchFeatureSet>, Vec<Vec<f64>>);

fn load(env: &Env, args: &BenchmarkArgs) -> Result<Loaded> {
    match (&args.features, &args.expression) {
        (Some(features), Some(expression)) => {
            if !expression.exists() {
                return Err(CliError::missing(expression));
            }
            let panel = load_panel(env, &args.panel)?;
            let sets = read_patch_sets(env, features)?;
            let expr = read_expression(env, expression, args.expression_scale, &panel)?;
            let rows: HashMap<&str, &Vec<f64>> =
                expr.patient_ids.iter().map(String::as_str).zip(&expr.values).collect();
            let mut patches = Vec::new();
            let mut y = Vec::new();
            for s in sets {
                if let Some(r) = rows.get(s.patient_id.as_str()) {
                    y.push((*r).clone());
                    patches.push(s);
                }
            }
            Ok(("files", patches, y))
        }
        _ => {
            let cohort = regression_cohort(&RegressionTask {
                n_patients: args.patients,
                patches_per_patient: args.patches,
                n_features: args.feature_dim,
                n_genes: args.genes,
                seed: env.seed,
                ..RegressionTask::default()
            });
            Ok(("synthetic", cohort.patches, cohort.expression.values))
        }
    }
}

fn mode(outcome: &TrainOutcome, elapsed: f64, args: &BenchmarkArgs) -> Mode {
    let epochs = outcome.history.len();
    let epoch_seconds = outcome.history.iter().map(|r| r.wall_clock_seconds).sum::<f64>() / epochs as f64;
    Mode {
        samples_per_epoch: outcome.samples_per_epoch,
        epochs,
        epoch_seconds,
        train_seconds: elapsed,
        kwh: kwh(args.devices, elapsed / 3600.0, args.watts),
    }
}

pub fn run(env: &Env, args: &BenchmarkArgs) -> Result<()> {
    if args.epochs == 0 {
        return Err(CliError::invalid("--epochs must be positive"));
    }
    if !(args.devices > 0.0 && args.watts > 0.0) {
        return Err(CliError::invalid("--devices and --watts must be positive"));
    }
    let (source, patches, y) = load(env, args)?;
    if patches.len() < 2 {
        return Err(CliError::invalid(format!(
            "benchmark needs at least 2 patients with features and expression, found {}",
            patches.len()
        )));
    }
    // Patience equal to the epoch count never stops early.
    let cfg = TrainConfig { max_epochs: args.epochs, patience: args.epochs, ..base_config(env) };

    let x: Vec<Vec<f64>> = patches.iter().map(|p| aggregate(p).z).collect();
    let start = Instant::now();
    let agg = train(&x, &y, &cfg).context("aggregated training")?;
    let agg_mode = mode(&agg, start.elapsed().as_secs_f64(), args);
    let start = Instant::now();
    let patch = train_patchwise(&patches, &y, &cfg).context("patch-level training")?;
    let patch_mode = mode(&patch, start.elapsed().as_secs_f64(), args);

    let reference = kwh(REFERENCE_DEVICES, REFERENCE_HOURS, REFERENCE_WATTS);
    let report = Report {
        dataset: Dataset {
            source,
            patients: patches.len(),
            total_patches: patches.iter().map(PatchFeatureSet::n_patches).sum(),
            features: patches[0].n_features(),
            genes: y[0].len(),
        },
        config: cfg,
        speedup: patch_mode.epoch_seconds / agg_mode.epoch_seconds,
        aggregated: agg_mode,
        patchwise: patch_mode,
        energy: Energy { devices: args.devices, watts: args.watts, formula: "kWh = devices * hours * watts / 1000" },
        reference_example: ReferenceCheck {
            devices: REFERENCE_DEVICES,
            hours: REFERENCE_HOURS,
            watts: REFERENCE_WATTS,
            kwh: reference,
            expected_kwh: REFERENCE_KWH,
            matches: reference == REFERENCE_KWH,
        },
    };
    env.create_output_dir()?;
    env.write_json(REPORT, &report)?;
    eprintln!(
        "epoch time: aggregated {:.4} s, patch-level {:.4} s, speedup {:.1}x",
        report.aggregated.epoch_seconds, report.patchwise.epoch_seconds, report.speedup
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_energy_is_exact() {
        assert_eq!(kwh(REFERENCE_DEVICES, REFERENCE_HOURS, REFERENCE_WATTS), REFERENCE_KWH);
        assert_eq!(kwh(1.0, 2.0, 500.0), 1.0);
    }
}
