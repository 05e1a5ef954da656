//! Kaplan–Meier estimation, the log-rank test, Cox proportional hazards
//! and the concordance index.

mod clinical;
mod cox;
mod km;
mod logrank;
mod report;

pub use clinical::{CLINICAL_HEADER, dichotomize, load_clinical, read_clinical, ClinicalRecord, Dichotomy, Parameter};
pub use cox::{cox_fit, partial_log_likelihood, CoxFit, CoxOptions, Ties};
pub use km::{kaplan_meier, KmCurve};
pub use logrank::{logrank, LogRankResult};
pub use report::{survival_report, HazardEstimate, ReportRow, SurvivalReport, SUBTYPE_ROW};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurvivalError {
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("no events observed")]
    NoEvents,
    #[error("no comparable pairs")]
    NoComparablePairs,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("non-positive or non-finite time {time} at index {index}")]
    InvalidTime { index: usize, time: f64 },
    #[error("covariate {0} is constant")]
    ConstantCovariate(String),
    #[error("monotone likelihood: coefficient for {0} diverges")]
    Separation(String),
    #[error("Newton iterations did not converge in {0} steps")]
    NotConverged(usize),
    #[error("patient {patient_id} has no value for {parameter}")]
    MissingValue { patient_id: String, parameter: String },
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("I/O: {0}")]
    Io(String),
}

impl From<std::io::Error> for SurvivalError {
    fn from(e: std::io::Error) -> Self {
        SurvivalError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SurvivalError>;

fn check_times(time: &[f64], event: &[bool]) -> Result<()> {
    if time.len() != event.len() {
        return Err(SurvivalError::LengthMismatch(format!("{} times, {} event flags", time.len(), event.len())));
    }
    if let Some(index) = time.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(SurvivalError::InvalidTime { index, time: time[index] });
    }
    Ok(())
}

/// Harrell's concordance: over pairs with `t_i < t_j` and an event at `i`,
/// the fraction where `risk_i > risk_j`; risk ties count one half.
pub fn c_index(risk: &[f64], time: &[f64], event: &[bool]) -> Result<f64> {
    check_times(time, event)?;
    if risk.len() != time.len() {
        return Err(SurvivalError::LengthMismatch(format!("{} risks, {} times", risk.len(), time.len())));
    }
    let mut comparable = 0u64;
    // Twice the concordant count, so ties stay integral.
    let mut twice = 0u64;
    for i in 0..time.len() {
        if !event[i] {
            continue;
        }
        for j in 0..time.len() {
            if time[i] < time[j] {
                comparable += 1;
                twice += match risk[i].partial_cmp(&risk[j]) {
                    Some(std::cmp::Ordering::Greater) => 2,
                    Some(std::cmp::Ordering::Equal) => 1,
                    _ => 0,
                };
            }
        }
    }
    if comparable == 0 {
        return Err(SurvivalError::NoComparablePairs);
    }
    Ok(twice as f64 / (2.0 * comparable as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn c_index_examples() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true; 4];
        let risk: Vec<f64> = t.iter().map(|x| -x).collect();
        assert_eq!(c_index(&risk, &t, &e).unwrap(), 1.0);
        assert_eq!(c_index(&[0.3; 4], &t, &e).unwrap(), 0.5);
        assert_eq!(c_index(&[1.0, 2.0], &[1.0, 2.0], &[false, false]), Err(SurvivalError::NoComparablePairs));
    }

    #[test]
    fn c_index_random_risk_is_near_half() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let t: Vec<f64> = (0..1000).map(|_| rng.random_range(0.1..10.0)).collect();
        let r: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
        let c = c_index(&r, &t, &vec![true; 1000]).unwrap();
        assert!((c - 0.5).abs() < 0.05, "{c}");
    }

    #[test]
    fn c_index_antisymmetric_without_ties() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(2..50);
            let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
            let e: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            if let Ok(a) = c_index(&r, &t, &e) {
                assert_eq!(a + c_index(&neg, &t, &e).unwrap(), 1.0);
            }
        }
    }
}
