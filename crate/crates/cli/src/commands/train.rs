use std::path::{Path, PathBuf};

use clap::Args;
use histexpr::expression::{ExpressionMatrix, GenePanel};
use histexpr::features::{assemble_dataset, SlideFeature};
use histexpr::regressor::{load_model, model_digest, save_model, train, write_history, RegressorModel, TrainConfig};
use serde::Serialize;

use super::{hex, input, load_panel, read_expression, read_features, Env, ExpressionScale};
use crate::error::{CliError, Context, Result};

pub const MODEL: &str = "model.h2rm";
pub const HISTORY: &str = "history.csv";
pub const SUMMARY: &str = "train_summary.json";
pub const PREDICTIONS: &str = "predicted_expression.csv";

const PREDICT_CHUNK: usize = 64;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of `.h2rf` files or a slide-feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Expression CSV with header `patient_id,GENE...`.
    #[arg(long)]
    pub expression: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpressionScale::Raw)]
    pub expression_scale: ExpressionScale,
    /// Gene panel JSON; defaults to the bundled panel.
    #[arg(long)]
    pub panel: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
}

#[derive(Debug, Serialize)]
struct TrainSummary<'a> {
    patients: usize,
    train_patients: usize,
    validation_patients: usize,
    genes: usize,
    features: usize,
    dropped_features: &'a [String],
    dropped_expression: &'a [String],
    epochs_run: usize,
    best_epoch: usize,
    best_val_mse: f64,
    stopped_early: bool,
    panel_fingerprint: String,
    model_digest: String,
    config: &'a TrainConfig,
}

/// The configured training settings with the global seed applied.
pub fn base_config(env: &Env) -> TrainConfig {
    TrainConfig { seed: env.seed, ..env.config.train.clone() }
}

fn train_config(env: &Env, args: &TrainArgs) -> TrainConfig {
    let mut cfg = base_config(env);
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.validation_fraction {
        cfg.validation_fraction = v;
    }
    cfg
}

pub fn run(env: &Env, args: &TrainArgs) -> Result<()> {
    let panel = load_panel(env, &args.panel)?;
    let features = read_features(env, &input(&args.features, &env.config.paths.features, "features")?)?;
    let expr_path = input(&args.expression, &env.config.paths.expression, "expression")?;
    let expr = read_expression(env, &expr_path, args.expression_scale, &panel)?;
    let data = assemble_dataset(&features, &expr)?;
    if !data.dropped_features.is_empty() {
        env.warn(format!("{} patients have features but no expression", data.dropped_features.len()))?;
    }
    if !data.dropped_expression.is_empty() {
        env.warn(format!("{} patients have expression but no features", data.dropped_expression.len()))?;
    }
    let cfg = train_config(env, args);
    let outcome = train(&data.x, &data.y, &cfg).context("training")?;

    env.create_output_dir()?;
    let fingerprint = panel.fingerprint();
    let model_path = env.output(MODEL);
    save_model(&outcome.model, fingerprint, &model_path).context(format!("writing {}", model_path.display()))?;
    let mut history = Vec::new();
    write_history(&outcome.history, &mut history)?;
    env.write(HISTORY, history)?;
    env.write_json(
        SUMMARY,
        &TrainSummary {
            patients: data.len(),
            train_patients: outcome.train_patients.len(),
            validation_patients: outcome.val_patients.len(),
            genes: data.genes.len(),
            features: data.n_features(),
            dropped_features: &data.dropped_features,
            dropped_expression: &data.dropped_expression,
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_mse: outcome.best_val_mse,
            stopped_early: outcome.stopped_early,
            panel_fingerprint: hex(fingerprint),
            model_digest: hex(model_digest(&outcome.model, fingerprint)),
            config: &cfg,
        },
    )?;
    eprintln!(
        "trained on {} patients for {} epochs (best {} with validation MSE {:.6})",
        data.len(),
        outcome.history.len(),
        outcome.best_epoch,
        outcome.best_val_mse
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of `.h2rf` files or a slide-feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Panel the model was trained on; defaults to the bundled panel.
    #[arg(long)]
    pub panel: Option<PathBuf>,
}

pub fn load_checked_model(path: &Path, panel: &GenePanel) -> Result<RegressorModel> {
    if !path.exists() {
        return Err(CliError::missing(path));
    }
    let (model, _) = load_model(path, Some(panel.fingerprint())).context(format!("reading model {}", path.display()))?;
    if model.n_genes() != panel.len() {
        return Err(CliError::invalid(format!("model predicts {} genes but the panel has {}", model.n_genes(), panel.len())));
    }
    Ok(model)
}

/// Predictions on the `log2(1+x)` scale, one row per slide.
pub fn predict(model: &RegressorModel, panel: &GenePanel, slides: &[SlideFeature]) -> Result<ExpressionMatrix> {
    if let Some(s) = slides.iter().find(|s| s.z.len() != model.n_features()) {
        return Err(CliError::invalid(format!(
            "patient {} has {} features; the model expects {}",
            s.patient_id,
            s.z.len(),
            model.n_features()
        )));
    }
    let inputs: Vec<&[f64]> = slides.iter().map(|s| s.z.as_slice()).collect();
    Ok(ExpressionMatrix {
        patient_ids: slides.iter().map(|s| s.patient_id.clone()).collect(),
        genes: panel.symbols(),
        values: model.predict_many(&inputs, PREDICT_CHUNK)?,
        transformed: true,
    })
}

pub fn run_predict(env: &Env, args: &PredictArgs) -> Result<()> {
    let panel = load_panel(env, &args.panel)?;
    let model = load_checked_model(&args.model, &panel)?;
    let slides = read_features(env, &input(&args.features, &env.config.paths.features, "features")?)?;
    let pred = predict(&model, &panel, &slides)?;
    let mut buf = Vec::new();
    pred.write_csv(&mut buf)?;
    env.create_output_dir()?;
    let path = env.write(PREDICTIONS, buf)?;
    eprintln!("wrote predictions for {} patients to {}", pred.n_patients(), path.display());
    Ok(())
}
