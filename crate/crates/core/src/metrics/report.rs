use std::io::Write;

use serde::Serialize;

use super::{bh_fdr, r2, spearman, MetricsError, Result};
use crate::util::median;

/// Significance level used for the significant-gene count.
pub const EVAL_FDR_LEVEL: f64 = 0.05;

/// Across-patient statistics for one gene. `None` entries mean the statistic
/// is undefined (zero variance in prediction or truth) and `flagged` is set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneStat {
    pub symbol: String,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub fdr: Option<f64>,
    pub r2: Option<f64>,
    pub flagged: bool,
}

/// Across-gene statistics for one patient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientStat {
    pub patient_id: String,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub fdr: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub genes: Vec<GeneStat>,
    pub patients: Vec<PatientStat>,
    pub median_gene_rho: Option<f64>,
    pub median_patient_rho: Option<f64>,
    pub significant_genes: usize,
}

struct AxisStat {
    rho: Option<f64>,
    p: Option<f64>,
}

fn axis_stats(pairs: impl Iterator<Item = (Vec<f64>, Vec<f64>)>) -> Result<Vec<AxisStat>> {
    let mut out = Vec::new();
    for (x, y) in pairs {
        match spearman(&x, &y) {
            Ok(c) => out.push(AxisStat { rho: Some(c.rho), p: Some(c.p_value) }),
            Err(MetricsError::ConstantInput) | Err(MetricsError::TooFewSamples { .. }) => {
                out.push(AxisStat { rho: None, p: None })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// BH over the defined p-values of one family; undefined entries stay `None`.
fn adjust_family(stats: &[AxisStat]) -> Result<Vec<Option<f64>>> {
    let defined: Vec<f64> = stats.iter().filter_map(|s| s.p).collect();
    let adjusted = bh_fdr(&defined)?;
    let mut it = adjusted.into_iter();
    Ok(stats.iter().map(|s| s.p.and_then(|_| it.next())).collect())
}

/// Per-gene (across patients) and per-patient (across genes) Spearman
/// correlation, BH-FDR within each family, R² per gene, and medians.
///
/// `pred` and `truth` are patients × genes, row-major.
pub fn evaluate(
    pred: &[Vec<f64>],
    truth: &[Vec<f64>],
    genes: &[String],
    patients: &[String],
) -> Result<EvalReport> {
    if pred.len() != truth.len() || pred.len() != patients.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} prediction rows, {} truth rows, {} patient ids",
            pred.len(),
            truth.len(),
            patients.len()
        )));
    }
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != genes.len() || t.len() != genes.len() {
            return Err(MetricsError::ShapeMismatch(format!(
                "row {i}: {} predictions, {} truths, {} genes",
                p.len(),
                t.len(),
                genes.len()
            )));
        }
    }

    let column = |m: &[Vec<f64>], g: usize| m.iter().map(|r| r[g]).collect::<Vec<f64>>();
    let gene_axis =
        axis_stats((0..genes.len()).map(|g| (column(pred, g), column(truth, g))))?;
    let patient_axis = axis_stats(pred.iter().cloned().zip(truth.iter().cloned()))?;
    let gene_fdr = adjust_family(&gene_axis)?;
    let patient_fdr = adjust_family(&patient_axis)?;

    let mut gene_stats = Vec::with_capacity(genes.len());
    for (g, (s, fdr)) in gene_axis.iter().zip(gene_fdr).enumerate() {
        let r2 = match r2(&column(pred, g), &column(truth, g)) {
            Ok(v) => Some(v),
            Err(MetricsError::ConstantTruth) | Err(MetricsError::TooFewSamples { .. }) => None,
            Err(e) => return Err(e),
        };
        gene_stats.push(GeneStat {
            symbol: genes[g].clone(),
            rho: s.rho,
            p_value: s.p,
            fdr,
            r2,
            flagged: s.rho.is_none(),
        });
    }
    let patient_stats: Vec<PatientStat> = patient_axis
        .iter()
        .zip(patient_fdr)
        .zip(patients)
        .map(|((s, fdr), id)| PatientStat {
            patient_id: id.clone(),
            rho: s.rho,
            p_value: s.p,
            fdr,
            flagged: s.rho.is_none(),
        })
        .collect();

    let gene_rhos: Vec<f64> = gene_stats.iter().filter_map(|g| g.rho).collect();
    let patient_rhos: Vec<f64> = patient_stats.iter().filter_map(|p| p.rho).collect();
    let significant_genes =
        gene_stats.iter().filter(|g| g.fdr.is_some_and(|q| q < EVAL_FDR_LEVEL)).count();
    Ok(EvalReport {
        median_gene_rho: median(&gene_rhos),
        median_patient_rho: median(&patient_rhos),
        genes: gene_stats,
        patients: patient_stats,
        significant_genes,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

impl EvalReport {
    /// `symbol,rho,p,fdr_p,r2,flagged`
    pub fn write_gene_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "symbol,rho,p,fdr_p,r2,flagged")?;
        for g in &self.genes {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                g.symbol,
                fmt_opt(g.rho),
                fmt_opt(g.p_value),
                fmt_opt(g.fdr),
                fmt_opt(g.r2),
                u8::from(g.flagged)
            )?;
        }
        Ok(())
    }

    /// `patient_id,rho,p,fdr_p,flagged`
    pub fn write_patient_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "patient_id,rho,p,fdr_p,flagged")?;
        for p in &self.patients {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.patient_id,
                fmt_opt(p.rho),
                fmt_opt(p.p_value),
                fmt_opt(p.fdr),
                u8::from(p.flagged)
            )?;
        }
        Ok(())
    }

    /// Genes ordered by descending rho (undefined last, then by symbol).
    pub fn top_genes(&self, k: usize) -> Vec<&GeneStat> {
        let mut v: Vec<&GeneStat> = self.genes.iter().collect();
        v.sort_by(|a, b| {
            let ka = a.rho.unwrap_or(f64::NEG_INFINITY);
            let kb = b.rho.unwrap_or(f64::NEG_INFINITY);
            kb.total_cmp(&ka).then_with(|| a.symbol.cmp(&b.symbol))
        });
        v.truncate(k);
        v
    }
}
