use super::distributions::student_t_two_sided;
use super::{check_finite, MetricsError, Result};
use crate::util::total_cmp;

/// Correlation coefficient with its two-sided t-based p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// 1-based ranks with ties assigned their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&x[a], &x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share rank ((i+1)+(j+1))/2
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn validate(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 3 {
        return Err(MetricsError::TooFewSamples { n: x.len(), min: 3 });
    }
    check_finite(x)?;
    check_finite(y)
}

/// Product-moment coefficient from centered sums. On half-integer ranks all
/// sums are exact in f64, so the only roundings are the final sqrt and divide.
fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn with_p_value(rho: f64, n: usize) -> CorrelationResult {
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        student_t_two_sided(t, df)
    };
    CorrelationResult { rho, p_value, n }
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    validate(x, y)?;
    let rho = product_moment(&average_ranks(x), &average_ranks(y))?;
    Ok(with_p_value(rho, x.len()))
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    validate(x, y)?;
    let rho = product_moment(x, y)?;
    Ok(with_p_value(rho, x.len()))
}

/// Coefficient of determination `1 - SS_res / SS_tot`; negative when the
/// prediction is worse than the truth's mean.
pub fn r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if truth.is_empty() {
        return Err(MetricsError::TooFewSamples { n: 0, min: 2 });
    }
    check_finite(pred)?;
    check_finite(truth)?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &x).unwrap().rho, 1.0);
        assert_eq!(spearman(&x, &x).unwrap().p_value, 0.0);
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&x, &rev).unwrap().rho, -1.0);
        // Hand ranking: d = (-1,1,-1,1,0), Σd² = 4, rho = 1 - 6·4/(5·24) = 0.8.
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        assert!((spearman(&x, &y).unwrap().rho - 0.8).abs() < 1e-15);
    }

    #[test]
    fn spearman_p_value_matches_t_formula() {
        // rho = 0.8, n = 5: t = 0.8·sqrt(3/0.36) = 2.3094, df = 3 → p = 0.104088.
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r.p_value - 0.104_088_038_661_827_9).abs() < 1e-10, "{}", r.p_value);
    }

    #[test]
    fn spearman_errors() {
        assert_eq!(
            spearman(&[1.0, 2.0], &[1.0, 2.0]),
            Err(MetricsError::TooFewSamples { n: 2, min: 3 })
        );
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(MetricsError::LengthMismatch { left: 3, right: 2 })
        );
        assert_eq!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::ConstantInput)
        );
    }

    #[test]
    fn pearson_examples() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.37 - 1.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap().rho - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap().rho + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_matches_covariance_formula() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        // Oracle: raw-moment form cov / (sd_x sd_y).
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        let cov = sxy / n - sx * sy / (n * n);
        let oracle = cov / ((sxx / n - sx * sx / (n * n)).sqrt() * (syy / n - sy * sy / (n * n)).sqrt());
        assert!((pearson(&x, &y).unwrap().rho - oracle).abs() < 1e-12);
    }

    #[test]
    fn r2_examples() {
        let truth = [1.0, 2.0, 4.0, 8.0];
        assert_eq!(r2(&truth, &truth).unwrap(), 1.0);
        let m = truth.iter().sum::<f64>() / 4.0;
        assert_eq!(r2(&[m; 4], &truth).unwrap(), 0.0);
        let neg: Vec<f64> = truth.iter().map(|t| -t).collect();
        assert!(r2(&neg, &truth).unwrap() < 0.0);
        assert_eq!(r2(&[1.0, 2.0], &[3.0, 3.0]), Err(MetricsError::ConstantTruth));
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_transform(
            pairs in proptest::collection::vec((-50i32..50, -50i32..50), 3..40)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let tx: Vec<f64> = x.iter().map(|v| (v / 7.0).exp() * 3.0 + 1.0).collect();
            let ty: Vec<f64> = y.iter().map(|v| v * v * v - 4.0).collect();
            match (spearman(&x, &y), spearman(&tx, &ty)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.rho, b.rho),
                (Err(a), Err(b)) => prop_assert_eq!(a, b),
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }
}
