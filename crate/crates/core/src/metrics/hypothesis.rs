use super::distributions::{f_upper_tail, student_t_two_sided};
use super::{check_finite, MetricsError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p_value: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (m, ss / (n - 1.0))
}

fn check_groups(groups: &[&[f64]]) -> Result<()> {
    for (group, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(MetricsError::GroupTooSmall { group, n: g.len() });
        }
        check_finite(g)?;
    }
    Ok(())
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check_groups(&[a, b])?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let sa = va / na;
    let sb = vb / nb;
    let se2 = sa + sb;
    if se2 == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult { t, df, p_value: student_t_two_sided(t, df) })
}

/// Student's equal-variance (pooled) two-sample t-test.
pub fn pooled_t(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check_groups(&[a, b])?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if sp2 == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTestResult { t, df, p_value: student_t_two_sided(t, df) })
}

/// Classic one-way ANOVA: between/within mean-square ratio against F(k−1, N−k).
pub fn anova_oneway(groups: &[&[f64]]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(MetricsError::TooFewGroups(groups.len()));
    }
    check_groups(groups)?;
    let total_n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / total_n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (total_n - groups.len()) as f64;
    if ss_within == 0.0 {
        if ss_between == 0.0 {
            return Err(MetricsError::AllEqual);
        }
        return Ok(AnovaResult { f: f64::INFINITY, df_between, df_within, p_value: 0.0 });
    }
    let f = (ss_between / df_between) / (ss_within / df_within);
    Ok(AnovaResult { f, df_between, df_within, p_value: f_upper_tail(f, df_between, df_within) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welch_identical_groups() {
        let a = [1.0, 2.0, 3.5, 4.0];
        let r = welch_t(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn welch_separated_groups() {
        let a = [0.01, -0.02, 0.015, 0.0];
        let b = [10.02, 9.99, 10.0, 10.01];
        assert!(welch_t(&a, &b).unwrap().p_value < 1e-4);
    }

    #[test]
    fn welch_antisymmetric() {
        let a = [1.0, 2.0, 2.5, 7.0];
        let b = [3.0, 3.3, 5.0];
        let ab = welch_t(&a, &b).unwrap();
        let ba = welch_t(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn welch_reference_value() {
        // scipy.stats.ttest_ind(a, b, equal_var=False)
        let a = [1.0, 2.0, 2.5, 7.0];
        let b = [3.0, 3.3, 5.0];
        let r = welch_t(&a, &b).unwrap();
        assert!((r.t - (-0.437_267_142_713_922_4)).abs() < 1e-12, "{}", r.t);
        assert!((r.p_value - 0.683_657_564_491_618_6).abs() < 1e-10, "{}", r.p_value);
    }

    #[test]
    fn errors() {
        assert_eq!(welch_t(&[1.0], &[1.0, 2.0]), Err(MetricsError::GroupTooSmall { group: 0, n: 1 }));
        assert_eq!(welch_t(&[1.0, 1.0], &[2.0, 2.0]), Err(MetricsError::ZeroVariance));
        assert_eq!(anova_oneway(&[&[1.0, 2.0]]), Err(MetricsError::TooFewGroups(1)));
        assert_eq!(anova_oneway(&[&[1.0, 1.0], &[1.0, 1.0]]), Err(MetricsError::AllEqual));
    }

    #[test]
    fn anova_identical_groups() {
        let g = [0.3, 1.2, 2.2, 0.9];
        let r = anova_oneway(&[&g, &g, &g]).unwrap();
        assert!(r.f.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anova_two_groups_is_pooled_t_squared() {
        let a = [1.0, 2.0, 2.5, 7.0, 3.1];
        let b = [3.0, 3.3, 5.0, 6.2];
        let f = anova_oneway(&[&a, &b]).unwrap();
        let t = pooled_t(&a, &b).unwrap();
        assert!((f.f - t.t * t.t).abs() <= 1e-10 * f.f.max(1.0));
        assert!((f.p_value - t.p_value).abs() < 1e-10);
    }

    #[test]
    fn anova_well_separated() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let groups: Vec<Vec<f64>> = [0.0, 5.0, 10.0]
            .iter()
            .map(|&m| {
                let d = Normal::new(m, 0.1).unwrap();
                (0..10).map(|_| d.sample(&mut rng)).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        assert!(anova_oneway(&refs).unwrap().p_value < 1e-6);
    }
}
