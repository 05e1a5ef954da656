use super::{MetricsError, Result};
use crate::util::total_cmp;

/// Benjamini–Hochberg step-up adjustment. Output is in the input order.
pub fn bh_fdr(p: &[f64]) -> Result<Vec<f64>> {
    for (index, &value) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(MetricsError::OutOfRange { index, value });
        }
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| total_cmp(&p[a], &p[b]));

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for (pos, &idx) in order.iter().enumerate().rev() {
        let rank = pos + 1;
        let candidate = p[idx] * (m as f64 / rank as f64);
        running = running.min(candidate);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}
