use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use histexpr::subtype::{read_labels, Subtype};
use histexpr::survival::{load_clinical, survival_report, CoxOptions, SurvivalReport, Ties, SUBTYPE_ROW};
use serde::Serialize;

use super::{input, Env};
use crate::error::{CliError, Context, Result};
use crate::svg::{km_plot, StepSeries};

pub const REPORT: &str = "survival_report.json";
pub const KM_LUMA: &str = "km_luma.csv";
pub const KM_LUMB: &str = "km_lumb.csv";
pub const KM_SVG: &str = "km.svg";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieMethod {
    Efron,
    Breslow,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    /// Clinical CSV with follow-up, events and the dichotomized parameters.
    #[arg(long)]
    pub clinical: Option<PathBuf>,
    /// Subtype calls: any CSV whose first two columns are
    /// `patient_id,subtype`.
    #[arg(long)]
    pub subtypes: PathBuf,
    #[arg(long, value_enum, default_value_t = TieMethod::Efron)]
    pub ties: TieMethod,
}

#[derive(Debug, Serialize)]
struct Cohort {
    clinical_patients: usize,
    luminal_a: usize,
    luminal_b: usize,
    other_subtypes: usize,
    without_call: usize,
}

#[derive(Debug, Serialize)]
struct Output<'a> {
    cohort: Cohort,
    ties: &'static str,
    report: &'a SurvivalReport,
}

pub fn run(env: &Env, args: &SurvivalArgs) -> Result<()> {
    let clinical_path = input(&args.clinical, &env.config.paths.clinical, "clinical")?;
    let records = load_clinical(&clinical_path).context(format!("reading {}", clinical_path.display()))?;
    if !args.subtypes.exists() {
        return Err(CliError::missing(&args.subtypes));
    }
    let what = format!("reading subtype calls {}", args.subtypes.display());
    let mut calls = HashMap::new();
    for (id, t) in read_labels(fs::File::open(&args.subtypes).context(&what)?).context(&what)? {
        if calls.insert(id.clone(), t).is_some() {
            return Err(CliError::invalid(format!("{what}: duplicate patient id {id}")));
        }
    }

    let mut cohort = Cohort { clinical_patients: records.len(), luminal_a: 0, luminal_b: 0, other_subtypes: 0, without_call: 0 };
    let mut kept = Vec::new();
    let mut luminal_b = Vec::new();
    for r in records {
        match calls.get(&r.patient_id) {
            Some(Subtype::LumA) => {
                cohort.luminal_a += 1;
                luminal_b.push(false);
                kept.push(r);
            }
            Some(Subtype::LumB) => {
                cohort.luminal_b += 1;
                luminal_b.push(true);
                kept.push(r);
            }
            Some(_) => cohort.other_subtypes += 1,
            None => cohort.without_call += 1,
        }
    }
    if cohort.without_call > 0 {
        env.warn(format!("{} clinical patients have no subtype call", cohort.without_call))?;
    }
    let ties = match args.ties {
        TieMethod::Efron => Ties::Efron,
        TieMethod::Breslow => Ties::Breslow,
    };
    let report = survival_report(&kept, &luminal_b, &CoxOptions { ties, ..CoxOptions::default() }).context("survival analysis")?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }

    let last = |b: bool| {
        kept.iter().zip(&luminal_b).filter(|(_, &l)| l == b).map(|(r, _)| r.time).fold(0.0, f64::max)
    };
    env.create_output_dir()?;
    let mut buf = Vec::new();
    report.km_luma.write_csv(&mut buf)?;
    env.write(KM_LUMA, buf)?;
    let mut buf = Vec::new();
    report.km_lumb.write_csv(&mut buf)?;
    env.write(KM_LUMB, buf)?;
    let svg = km_plot(
        &[
            StepSeries { label: "LumA", color: "#1f77b4", curve: &report.km_luma, end_time: last(false) },
            StepSeries { label: "LumB", color: "#d62728", curve: &report.km_lumb, end_time: last(true) },
        ],
        &format!("Overall survival by predicted subtype (log-rank p = {:.3})", report.logrank.p_value),
        "months",
    );
    env.write(KM_SVG, svg)?;
    let ties = match args.ties {
        TieMethod::Efron => "efron",
        TieMethod::Breslow => "breslow",
    };
    env.write_json(REPORT, &Output { cohort, ties, report: &report })?;
    eprintln!(
        "{} patients, {} events; LumB vs LumA HR {}",
        report.n,
        report.n_events,
        report.rows.iter().find(|r| r.parameter == SUBTYPE_ROW).map_or("-", |r| r.univariate.formatted.as_str())
    );
    Ok(())
}
