use serde::Serialize;

use super::{check_times, Result, SurvivalError};
use crate::metrics::distributions::chi2_1df_upper_tail;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRankResult {
    pub chi2: f64,
    pub p_value: f64,
    pub observed: [f64; 2],
    pub expected: [f64; 2],
}

/// Two-group log-rank test with hypergeometric variance, 1 df.
pub fn logrank(time_a: &[f64], event_a: &[bool], time_b: &[f64], event_b: &[bool]) -> Result<LogRankResult> {
    check_times(time_a, event_a)?;
    check_times(time_b, event_b)?;
    if time_a.is_empty() || time_b.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    let mut rows: Vec<(f64, bool, bool)> = time_a
        .iter()
        .zip(event_a)
        .map(|(&t, &e)| (t, e, true))
        .chain(time_b.iter().zip(event_b).map(|(&t, &e)| (t, e, false)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if !rows.iter().any(|r| r.1) {
        return Err(SurvivalError::NoEvents);
    }

    let mut n_a = time_a.len() as f64;
    let mut n = rows.len() as f64;
    let (mut obs_a, mut exp_a, mut var, mut total_d) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < rows.len() {
        let t = rows[i].0;
        let mut j = i;
        let (mut d, mut d_a, mut leave_a) = (0.0, 0.0, 0.0);
        while j < rows.len() && rows[j].0 == t {
            let (_, e, in_a) = rows[j];
            if e {
                d += 1.0;
                if in_a {
                    d_a += 1.0;
                }
            }
            if in_a {
                leave_a += 1.0;
            }
            j += 1;
        }
        if d > 0.0 {
            let frac = n_a / n;
            obs_a += d_a;
            exp_a += d * frac;
            total_d += d;
            if n > 1.0 {
                var += d * frac * (1.0 - frac) * (n - d) / (n - 1.0);
            }
        }
        n_a -= leave_a;
        n -= (j - i) as f64;
        i = j;
    }
    let diff = obs_a - exp_a;
    let chi2 = if var > 0.0 { diff * diff / var } else { 0.0 };
    Ok(LogRankResult {
        chi2,
        p_value: chi2_1df_upper_tail(chi2),
        observed: [obs_a, total_d - obs_a],
        expected: [exp_a, total_d - exp_a],
    })
}
