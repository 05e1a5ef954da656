use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use histexpr::expression::{load_transformed_expression, ExpressionMatrix};
use histexpr::subtype::{
    classification_report, fit_centroids, fit_voting, read_labels, write_predictions, ClassificationReport,
    Prediction, Simplex, Subtype, SubtypeCall, VotingConfig,
};
use serde::Serialize;

use super::{input, load_panel, read_expression, Env, ExpressionScale};
use crate::error::{CliError, Context, Result};

pub const CENTROIDS: &str = "centroids.json";
pub const CENTROID_CALLS: &str = "centroid_calls.csv";
pub const VOTING: &str = "voting_predictions.csv";
pub const REPORT: &str = "subtype_report.json";

#[derive(Debug, Args)]
pub struct SubtypeArgs {
    /// Training expression with known subtypes.
    #[arg(long)]
    pub expression: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpressionScale::Raw)]
    pub expression_scale: ExpressionScale,
    /// `patient_id,subtype` labels for the training expression.
    #[arg(long)]
    pub labels: PathBuf,
    /// Expression to classify on the `log2(1+x)` scale, e.g. the output of
    /// `predict`.
    #[arg(long)]
    pub query: PathBuf,
    /// Optional labels for the query set.
    #[arg(long)]
    pub query_labels: Option<PathBuf>,
    #[arg(long)]
    pub panel: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Evaluation {
    patients: usize,
    centroid: ClassificationReport,
    voting: ClassificationReport,
}

#[derive(Debug, Serialize)]
struct Report {
    genes: Vec<String>,
    training: Evaluation,
    unlabelled_training_patients: usize,
    query_patients: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    query: Option<Evaluation>,
    voting_config: VotingConfig,
}

fn labels(path: &Path) -> Result<HashMap<String, Subtype>> {
    if !path.exists() {
        return Err(CliError::missing(path));
    }
    let what = format!("reading labels {}", path.display());
    let rows = read_labels(fs::File::open(path).context(&what)?).context(&what)?;
    let mut out = HashMap::with_capacity(rows.len());
    for (id, t) in rows {
        if out.insert(id.clone(), t).is_some() {
            return Err(CliError::invalid(format!("{what}: duplicate patient id {id}")));
        }
    }
    Ok(out)
}

/// Rows of `m` that carry a label, in matrix order.
fn labelled(m: &ExpressionMatrix, labels: &HashMap<String, Subtype>) -> (Vec<Vec<f64>>, Vec<Subtype>, usize) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, row) in m.patient_ids.iter().zip(&m.values) {
        if let Some(&t) = labels.get(id) {
            x.push(row.clone());
            y.push(t);
        }
    }
    let missing = m.n_patients() - x.len();
    (x, y, missing)
}

fn similarity_scores(calls: &[SubtypeCall]) -> Vec<Simplex> {
    calls.iter().map(|c| c.similarity).collect()
}

pub fn run(env: &Env, args: &SubtypeArgs) -> Result<()> {
    let panel = load_panel(env, &args.panel)?;
    let pam50 = panel.pam50_indices();
    if pam50.is_empty() {
        return Err(CliError::invalid("the panel flags no PAM50 genes"));
    }
    let train_path = input(&args.expression, &env.config.paths.expression, "expression")?;
    let train = read_expression(env, &train_path, args.expression_scale, &panel)?.select_genes(&pam50);
    let train_labels = labels(&args.labels)?;
    let (x, y, unlabelled) = labelled(&train, &train_labels);
    if unlabelled > 0 {
        env.warn(format!("{unlabelled} training patients have no label"))?;
    }
    if !args.query.exists() {
        return Err(CliError::missing(&args.query));
    }
    let what = format!("reading query {}", args.query.display());
    let query = load_transformed_expression(fs::File::open(&args.query).context(&what)?, &panel)
        .context(&what)?
        .matrix
        .select_genes(&pam50);

    let centroids = fit_centroids(&train.genes, &x, &y).context("fitting centroids")?;
    let voting_config = VotingConfig { seed: env.seed, ..VotingConfig::default() };
    let voting = fit_voting(&x, &y, &voting_config).context("fitting the voting classifier")?;

    let evaluate = |x: &[Vec<f64>], y: &[Subtype]| -> Result<Evaluation> {
        let calls = x.iter().map(|r| centroids.call(r)).collect::<std::result::Result<Vec<_>, _>>()?;
        let votes: Vec<(Subtype, Simplex)> = x.iter().map(|r| voting.predict(r)).collect();
        let centroid_pred: Vec<Subtype> = calls.iter().map(|c| c.subtype).collect();
        let vote_pred: Vec<Subtype> = votes.iter().map(|v| v.0).collect();
        let vote_proba: Vec<Simplex> = votes.iter().map(|v| v.1).collect();
        Ok(Evaluation {
            patients: y.len(),
            centroid: classification_report(&centroid_pred, y, &similarity_scores(&calls))?,
            voting: classification_report(&vote_pred, y, &vote_proba)?,
        })
    };
    let training = evaluate(&x, &y)?;

    let calls = query.values.iter().map(|r| centroids.call(r)).collect::<std::result::Result<Vec<_>, _>>()?;
    let predictions: Vec<Prediction> = query
        .patient_ids
        .iter()
        .zip(&query.values)
        .map(|(id, r)| {
            let (subtype, proba) = voting.predict(r);
            Prediction { patient_id: id.clone(), subtype, proba }
        })
        .collect();
    let query_eval = match &args.query_labels {
        Some(path) => {
            let (qx, qy, missing) = labelled(&query, &labels(path)?);
            if missing > 0 {
                env.warn(format!("{missing} query patients have no label"))?;
            }
            Some(evaluate(&qx, &qy).context("scoring the query set")?)
        }
        None => None,
    };

    env.create_output_dir()?;
    env.write(CENTROIDS, centroids.to_json() + "\n")?;
    let mut buf = Vec::new();
    writeln!(buf, "patient_id,subtype,rho_luma,rho_lumb,rho_basal,rho_her2")?;
    for (id, c) in query.patient_ids.iter().zip(&calls) {
        let [a, b, d, e] = c.similarity;
        writeln!(buf, "{id},{},{a},{b},{d},{e}", c.subtype)?;
    }
    env.write(CENTROID_CALLS, buf)?;
    let mut buf = Vec::new();
    write_predictions(&mut buf, &predictions)?;
    env.write(VOTING, buf)?;
    let report = Report {
        genes: train.genes.clone(),
        training,
        unlabelled_training_patients: unlabelled,
        query_patients: query.n_patients(),
        query: query_eval,
        voting_config,
    };
    env.write_json(REPORT, &report)?;
    eprintln!(
        "training accuracy: centroid {:.3}, voting {:.3}; called {} query patients",
        report.training.centroid.accuracy,
        report.training.voting.accuracy,
        query.n_patients()
    );
    Ok(())
}
