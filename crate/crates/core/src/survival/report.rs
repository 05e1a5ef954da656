use serde::Serialize;

use super::{
    c_index, cox_fit, dichotomize, kaplan_meier, logrank, ClinicalRecord, CoxFit, CoxOptions, KmCurve, LogRankResult,
    Parameter, Result, SurvivalError,
};

pub const SUBTYPE_ROW: &str = "Predicted subtype";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardEstimate {
    pub hr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    /// `HR (low-high)` to two decimals.
    pub formatted: String,
}

impl HazardEstimate {
    fn from_fit(fit: &CoxFit, j: usize) -> Self {
        let (hr, lo, hi) = (fit.hr[j], fit.ci_low[j], fit.ci_high[j]);
        Self { hr, ci_low: lo, ci_high: hi, p_value: fit.p_values[j], formatted: format!("{hr:.2} ({lo:.2}-{hi:.2})") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub parameter: String,
    pub cutoff: String,
    pub n_indicator: usize,
    pub n_reference: usize,
    pub multivariate: HazardEstimate,
    pub univariate: HazardEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub n: usize,
    pub n_events: usize,
    pub rows: Vec<ReportRow>,
    pub univariate_subtype_c_index: f64,
    pub multivariate_c_index: f64,
    pub logrank: LogRankResult,
    pub km_luma: KmCurve,
    pub km_lumb: KmCurve,
    pub warnings: Vec<String>,
}

/// Univariate and joint Cox fits over the dichotomized clinical parameters
/// plus a LumB-vs-LumA indicator, with KM curves and a log-rank test per
/// subtype. `luminal_b[i]` marks record `i` as LumB (otherwise LumA).
pub fn survival_report(records: &[ClinicalRecord], luminal_b: &[bool], opts: &CoxOptions) -> Result<SurvivalReport> {
    if records.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    if luminal_b.len() != records.len() {
        return Err(SurvivalError::LengthMismatch(format!("{} subtype labels, {} records", luminal_b.len(), records.len())));
    }
    let time: Vec<f64> = records.iter().map(|r| r.time).collect();
    let event: Vec<bool> = records.iter().map(|r| r.event).collect();

    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for p in Parameter::ALL {
        let d = dichotomize(records, p)?;
        labels.push((p.name().to_string(), p.cutoff().to_string(), d.indicator_group.len(), d.reference_group.len()));
        columns.push(d.design_column());
    }
    let n_lumb = luminal_b.iter().filter(|&&b| b).count();
    labels.push((SUBTYPE_ROW.to_string(), "LumB vs. LumA".to_string(), n_lumb, records.len() - n_lumb));
    columns.push(luminal_b.iter().map(|&b| f64::from(u8::from(b))).collect());

    let names: Vec<String> = labels.iter().map(|l| l.0.clone()).collect();
    let design: Vec<Vec<f64>> = (0..records.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let joint = cox_fit(&time, &event, &design, &names, opts)?;
    let mut warnings: Vec<String> = joint.warning.iter().cloned().collect();

    let mut rows = Vec::new();
    let mut subtype_c = f64::NAN;
    for (j, (parameter, cutoff, n_indicator, n_reference)) in labels.into_iter().enumerate() {
        let single: Vec<Vec<f64>> = columns[j].iter().map(|&v| vec![v]).collect();
        let uni = cox_fit(&time, &event, &single, &names[j..=j], opts)?;
        warnings.extend(uni.warning.iter().cloned());
        if parameter == SUBTYPE_ROW {
            subtype_c = c_index(&uni.linear_predictor(&single), &time, &event)?;
        }
        rows.push(ReportRow {
            parameter,
            cutoff,
            n_indicator,
            n_reference,
            multivariate: HazardEstimate::from_fit(&joint, j),
            univariate: HazardEstimate::from_fit(&uni, 0),
        });
    }

    let split = |want: bool| -> (Vec<f64>, Vec<bool>) {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| luminal_b[i] == want).collect();
        (idx.iter().map(|&i| time[i]).collect(), idx.iter().map(|&i| event[i]).collect())
    };
    let (ta, ea) = split(false);
    let (tb, eb) = split(true);
    Ok(SurvivalReport {
        n: records.len(),
        n_events: joint.n_events,
        rows,
        univariate_subtype_c_index: subtype_c,
        multivariate_c_index: c_index(&joint.linear_predictor(&design), &time, &event)?,
        logrank: logrank(&tb, &eb, &ta, &ea)?,
        km_luma: kaplan_meier(&ta, &ea)?,
        km_lumb: kaplan_meier(&tb, &eb)?,
        warnings,
    })
}
