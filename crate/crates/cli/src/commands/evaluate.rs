use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use histexpr::expression::load_transformed_expression;
use histexpr::metrics::{evaluate, EVAL_FDR_LEVEL};
use serde::Serialize;

use super::train::{load_checked_model, predict};
use super::{input, load_panel, read_expression, read_features, Env, ExpressionScale};
use crate::error::{CliError, Context, Result};
use crate::svg::{scatter_grid, ScatterPanel};

pub const GENES: &str = "gene_metrics.csv";
pub const PATIENTS: &str = "patient_metrics.csv";
pub const TOP_GENES: &str = "top_genes.csv";
pub const SUMMARY: &str = "evaluation.json";
pub const SCATTER: &str = "scatter.svg";

const SCATTER_COLUMNS: usize = 5;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model written by `train`; needs `--features`.
    #[arg(long, conflicts_with = "predictions")]
    pub model: Option<PathBuf>,
    /// Directory of `.h2rf` files or a slide-feature CSV for the test set.
    #[arg(long, requires = "model")]
    pub features: Option<PathBuf>,
    /// Predicted expression CSV on the `log2(1+x)` scale, instead of a model.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Measured expression for the test set.
    #[arg(long)]
    pub expression: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExpressionScale::Raw)]
    pub expression_scale: ExpressionScale,
    #[arg(long)]
    pub panel: Option<PathBuf>,
    /// Number of genes listed and plotted.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Serialize)]
struct TopGene {
    rank: usize,
    symbol: String,
    rho: Option<f64>,
    p_value: Option<f64>,
    fdr: Option<f64>,
    r2: Option<f64>,
    pam50: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    patients: usize,
    genes: usize,
    median_gene_rho: Option<f64>,
    median_patient_rho: Option<f64>,
    significant_genes: usize,
    fdr_level: f64,
    flagged_genes: usize,
    flagged_patients: usize,
    missing_predictions: Vec<String>,
    top_genes: Vec<TopGene>,
    top_pam50: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |x| x.to_string())
}

pub fn run(env: &Env, args: &EvaluateArgs) -> Result<()> {
    let panel = load_panel(env, &args.panel)?;
    let pred = match (&args.model, &args.predictions) {
        (Some(model), None) => {
            let model = load_checked_model(model, &panel)?;
            let slides = read_features(env, &input(&args.features, &env.config.paths.features, "features")?)?;
            predict(&model, &panel, &slides)?
        }
        (None, Some(path)) => {
            if !path.exists() {
                return Err(CliError::missing(path));
            }
            let what = format!("reading predictions {}", path.display());
            load_transformed_expression(fs::File::open(path).context(&what)?, &panel).context(&what)?.matrix
        }
        _ => return Err(CliError::io("give either --model with --features, or --predictions")),
    };
    let truth_path = input(&args.expression, &env.config.paths.expression, "expression")?;
    let truth = read_expression(env, &truth_path, args.expression_scale, &panel)?;

    let rows: HashMap<&str, &Vec<f64>> = pred.patient_ids.iter().map(String::as_str).zip(&pred.values).collect();
    let mut ids: Vec<&String> = truth.patient_ids.iter().collect();
    ids.sort();
    let mut patients = Vec::new();
    let mut p = Vec::new();
    let mut t = Vec::new();
    let mut missing = Vec::new();
    for id in ids {
        match rows.get(id.as_str()) {
            Some(row) => {
                patients.push(id.clone());
                p.push((*row).clone());
                t.push(truth.row_of(id).expect("listed").to_vec());
            }
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        env.warn(format!("{} test patients have no prediction", missing.len()))?;
    }
    if patients.is_empty() {
        return Err(CliError::invalid("no patient has both a prediction and measured expression"));
    }
    let report = evaluate(&p, &t, &truth.genes, &patients).context("evaluating")?;

    let pam50: Vec<bool> = panel.entries().iter().map(|e| e.pam50).collect();
    let index: HashMap<&str, usize> = truth.genes.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let top: Vec<TopGene> = report
        .top_genes(args.top)
        .into_iter()
        .enumerate()
        .map(|(i, g)| TopGene {
            rank: i + 1,
            symbol: g.symbol.clone(),
            rho: g.rho,
            p_value: g.p_value,
            fdr: g.fdr,
            r2: g.r2,
            pam50: pam50[index[g.symbol.as_str()]],
        })
        .collect();

    env.create_output_dir()?;
    let mut buf = Vec::new();
    report.write_gene_csv(&mut buf)?;
    env.write(GENES, buf)?;
    let mut buf = Vec::new();
    report.write_patient_csv(&mut buf)?;
    env.write(PATIENTS, buf)?;
    let mut buf = Vec::new();
    writeln!(buf, "rank,symbol,rho,fdr_p,r2,pam50")?;
    for g in &top {
        writeln!(buf, "{},{},{},{},{},{}", g.rank, g.symbol, opt(g.rho), opt(g.fdr), opt(g.r2), u8::from(g.pam50))?;
    }
    env.write(TOP_GENES, buf)?;

    let columns: Vec<(Vec<f64>, Vec<f64>)> = top
        .iter()
        .map(|g| {
            let j = index[g.symbol.as_str()];
            (p.iter().map(|r| r[j]).collect(), t.iter().map(|r| r[j]).collect())
        })
        .collect();
    let panels: Vec<ScatterPanel> = top
        .iter()
        .zip(&columns)
        .map(|(g, (x, y))| ScatterPanel {
            title: match g.rho {
                Some(r) => format!("{} (rho={r:.2})", g.symbol),
                None => g.symbol.clone(),
            },
            highlight: g.pam50,
            x,
            y,
        })
        .collect();
    env.write(SCATTER, scatter_grid(&panels, SCATTER_COLUMNS, "predicted", "measured"))?;

    let summary = Summary {
        patients: patients.len(),
        genes: truth.genes.len(),
        median_gene_rho: report.median_gene_rho,
        median_patient_rho: report.median_patient_rho,
        significant_genes: report.significant_genes,
        fdr_level: EVAL_FDR_LEVEL,
        flagged_genes: report.genes.iter().filter(|g| g.flagged).count(),
        flagged_patients: report.patients.iter().filter(|p| p.flagged).count(),
        missing_predictions: missing,
        top_pam50: top.iter().filter(|g| g.pam50).count(),
        top_genes: top,
    };
    env.write_json(SUMMARY, &summary)?;
    eprintln!(
        "median rho across genes {}, across patients {}; {} genes significant",
        opt(summary.median_gene_rho),
        opt(summary.median_patient_rho),
        summary.significant_genes
    );
    Ok(())
}
