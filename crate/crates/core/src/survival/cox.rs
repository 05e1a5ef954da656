use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_times, Result, SurvivalError};
use crate::metrics::distributions::normal_two_sided;

const Z_95: f64 = 1.959964;
const SEPARATION_BOUND: f64 = 20.0;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxOptions {
    pub ties: Ties,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { ties: Ties::Efron, max_iter: 100, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub hr: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub p_values: Vec<f64>,
    pub log_likelihood: f64,
    pub n: usize,
    pub n_events: usize,
    pub converged: bool,
    pub iterations: usize,
    pub warning: Option<String>,
}

impl CoxFit {
    /// Linear predictor `x·β` for each row.
    pub fn linear_predictor(&self, design: &[Vec<f64>]) -> Vec<f64> {
        design.iter().map(|row| row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()).collect()
    }
}

struct Evaluation {
    loglik: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
}

/// Subjects grouped by distinct time, latest first: `(members, deaths)`.
fn risk_blocks(time: &[f64], event: &[bool]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut order: Vec<usize> = (0..time.len()).collect();
    order.sort_by(|&a, &b| time[b].total_cmp(&time[a]).then(a.cmp(&b)));
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = time[order[i]];
        let mut j = i;
        while j < order.len() && time[order[j]] == t {
            j += 1;
        }
        let members = order[i..j].to_vec();
        let deaths = members.iter().copied().filter(|&k| event[k]).collect();
        blocks.push((members, deaths));
        i = j;
    }
    blocks
}

fn evaluate(x: &[Vec<f64>], blocks: &[(Vec<usize>, Vec<usize>)], beta: &[f64], ties: Ties, derivs: bool) -> Evaluation {
    let p = beta.len();
    let eta: Vec<f64> = x.iter().map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum()).collect();
    let w: Vec<f64> = eta.iter().map(|e| e.exp()).collect();

    let mut loglik = 0.0;
    let mut grad = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let (mut s0, mut s1, mut s2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
    for (members, deaths) in blocks {
        for &k in members {
            let xk = DVector::from_column_slice(&x[k]);
            s0 += w[k];
            if derivs {
                s1.axpy(w[k], &xk, 1.0);
                s2.ger(w[k], &xk, &xk, 1.0);
            }
        }
        if deaths.is_empty() {
            continue;
        }
        let (mut t0, mut t1, mut t2) = (0.0, DVector::zeros(p), DMatrix::zeros(p, p));
        for &k in deaths {
            let xk = DVector::from_column_slice(&x[k]);
            loglik += eta[k];
            t0 += w[k];
            if derivs {
                grad += &xk;
                t1.axpy(w[k], &xk, 1.0);
                t2.ger(w[k], &xk, &xk, 1.0);
            }
        }
        let d = deaths.len() as f64;
        for l in 0..deaths.len() {
            let frac = match ties {
                Ties::Efron => l as f64 / d,
                Ties::Breslow => 0.0,
            };
            let a0 = s0 - frac * t0;
            loglik -= a0.ln();
            if derivs {
                let a1 = &s1 - &t1 * frac;
                let a2 = &s2 - &t2 * frac;
                let mean = &a1 / a0;
                grad -= &mean;
                info += a2 / a0 - &mean * mean.transpose();
            }
        }
    }
    Evaluation { loglik, grad, info }
}

fn validate(time: &[f64], event: &[bool], design: &[Vec<f64>], names: &[String]) -> Result<usize> {
    check_times(time, event)?;
    if time.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    if design.len() != time.len() {
        return Err(SurvivalError::LengthMismatch(format!("{} design rows, {} times", design.len(), time.len())));
    }
    let p = names.len();
    if let Some(r) = design.iter().position(|row| row.len() != p) {
        return Err(SurvivalError::LengthMismatch(format!("row {r} has {} covariates, expected {p}", design[r].len())));
    }
    if !event.iter().any(|&e| e) {
        return Err(SurvivalError::NoEvents);
    }
    Ok(p)
}

/// Columns shifted to mean zero; the partial likelihood is unchanged.
fn centered(design: &[Vec<f64>], p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = design.len() as f64;
    let means: Vec<f64> = (0..p).map(|j| design.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let x = design.iter().map(|r| r.iter().zip(&means).map(|(v, m)| v - m).collect()).collect();
    (x, means)
}

/// Partial log-likelihood at `beta`.
pub fn partial_log_likelihood(time: &[f64], event: &[bool], design: &[Vec<f64>], beta: &[f64], ties: Ties) -> Result<f64> {
    let names: Vec<String> = (0..beta.len()).map(|j| format!("x{j}")).collect();
    let p = validate(time, event, design, &names)?;
    let (x, _) = centered(design, p);
    Ok(evaluate(&x, &risk_blocks(time, event), beta, ties, false).loglik)
}

fn invert(info: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    info.clone().cholesky().map(|c| c.inverse()).or_else(|| info.clone().try_inverse())
}

/// Cox proportional-hazards fit by Newton–Raphson with step-halving.
/// `design` holds one row of covariates per subject.
pub fn cox_fit(time: &[f64], event: &[bool], design: &[Vec<f64>], names: &[String], opts: &CoxOptions) -> Result<CoxFit> {
    let p = validate(time, event, design, names)?;
    for (j, name) in names.iter().enumerate() {
        let first = design[0][j];
        if design.iter().all(|r| r[j] == first) {
            return Err(SurvivalError::ConstantCovariate(name.clone()));
        }
    }
    let n = time.len();
    let warning = (n < 10 * p).then(|| format!("{n} subjects for {p} covariates; estimates may be unstable"));
    let (x, _) = centered(design, p);
    let blocks = risk_blocks(time, event);

    let mut beta = vec![0.0; p];
    let mut cur = evaluate(&x, &blocks, &beta, opts.ties, true);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let step = match invert(&cur.info) {
            Some(inv) => inv * &cur.grad,
            None => {
                let worst = (0..p).max_by(|&a, &b| cur.grad[a].abs().total_cmp(&cur.grad[b].abs())).unwrap_or(0);
                return Err(SurvivalError::Separation(names[worst].clone()));
            }
        };
        let mut scale = 1.0;
        let mut next_beta: Vec<f64>;
        let mut next;
        let mut halvings = 0;
        loop {
            next_beta = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            next = evaluate(&x, &blocks, &next_beta, opts.ties, true);
            if next.loglik >= cur.loglik || halvings == MAX_HALVINGS {
                break;
            }
            scale *= 0.5;
            halvings += 1;
        }
        let delta = next_beta.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        beta = next_beta;
        cur = next;
        if let Some(j) = beta.iter().position(|b| b.abs() > SEPARATION_BOUND || !b.is_finite()) {
            return Err(SurvivalError::Separation(names[j].clone()));
        }
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SurvivalError::NotConverged(iterations));
    }

    let cov = invert(&cur.info).ok_or_else(|| SurvivalError::Separation(names[0].clone()))?;
    let se: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(CoxFit {
        names: names.to_vec(),
        hr: beta.iter().map(|b| b.exp()).collect(),
        ci_low: beta.iter().zip(&se).map(|(b, s)| (b - Z_95 * s).exp()).collect(),
        ci_high: beta.iter().zip(&se).map(|(b, s)| (b + Z_95 * s).exp()).collect(),
        p_values: beta.iter().zip(&se).map(|(b, s)| normal_two_sided(b / s)).collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect()).collect(),
        coefficients: beta,
        se,
        log_likelihood: cur.loglik,
        n,
        n_events: event.iter().filter(|&&e| e).count(),
        converged,
        iterations,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::c_index;
    use crate::synthetic::exponential_cohort;
    use rand::{Rng, SeedableRng};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    fn column(x: &[f64]) -> Vec<Vec<f64>> {
        x.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn recovers_log_hazard() {
        let c = exponential_cohort(1000, 0.7, 0.2, 11);
        let fit = cox_fit(&c.time, &c.event, &column(&c.x), &names(1), &CoxOptions::default()).unwrap();
        assert!((fit.coefficients[0] - 0.7).abs() < 0.15, "{fit:?}");
        assert!(fit.ci_low[0] < fit.hr[0] && fit.hr[0] < fit.ci_high[0]);
        assert!(fit.warning.is_none());
    }

    #[test]
    fn grid_search_agrees() {
        let c = exponential_cohort(300, 0.7, 0.2, 5);
        let design = column(&c.x);
        let fit = cox_fit(&c.time, &c.event, &design, &names(1), &CoxOptions::default()).unwrap();
        let ll = |b: f64| partial_log_likelihood(&c.time, &c.event, &design, &[b], Ties::Efron).unwrap();
        let best = (0..=4000).map(|i| i as f64 * 5e-4).max_by(|a, b| ll(*a).total_cmp(&ll(*b))).unwrap();
        assert!((best - fit.coefficients[0]).abs() <= 5e-4);
        assert!((ll(fit.coefficients[0]) - fit.log_likelihood).abs() < 1e-9);
        assert!(ll(fit.coefficients[0]) >= ll(fit.coefficients[0] + 1e-4));
        assert!(ll(fit.coefficients[0]) >= ll(fit.coefficients[0] - 1e-4));
    }

    #[test]
    fn independent_covariate() {
        let c = exponential_cohort(2000, 0.0, 0.2, 3);
        let fit = cox_fit(&c.time, &c.event, &column(&c.x), &names(1), &CoxOptions::default()).unwrap();
        assert!(fit.coefficients[0].abs() < 0.15);
        assert!(fit.ci_low[0] < 1.0 && 1.0 < fit.ci_high[0]);
    }

    #[test]
    fn scaling_divides_beta() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let c = exponential_cohort(400, 0.5, 0.3, 9);
        let design: Vec<Vec<f64>> = c.x.iter().map(|&v| vec![v, rng.random_range(-1.0..1.0)]).collect();
        let base = cox_fit(&c.time, &c.event, &design, &names(2), &CoxOptions::default()).unwrap();
        let scaled: Vec<Vec<f64>> = design.iter().map(|r| vec![r[0] * 3.0, r[1]]).collect();
        let fit = cox_fit(&c.time, &c.event, &scaled, &names(2), &CoxOptions::default()).unwrap();
        assert!((fit.coefficients[0] * 3.0 - base.coefficients[0]).abs() < 1e-6);
        assert!((fit.log_likelihood - base.log_likelihood).abs() < 1e-6);
        let lp_a = base.linear_predictor(&design);
        let lp_b = fit.linear_predictor(&scaled);
        let (ca, cb) = (c_index(&lp_a, &c.time, &c.event).unwrap(), c_index(&lp_b, &c.time, &c.event).unwrap());
        assert!((ca - cb).abs() < 1e-6);
    }

    #[test]
    fn breslow_equals_efron_without_ties() {
        let c = exponential_cohort(200, 0.4, 0.2, 2);
        let design = column(&c.x);
        let e = cox_fit(&c.time, &c.event, &design, &names(1), &CoxOptions::default()).unwrap();
        let b = cox_fit(&c.time, &c.event, &design, &names(1), &CoxOptions { ties: Ties::Breslow, ..Default::default() })
            .unwrap();
        assert!((e.coefficients[0] - b.coefficients[0]).abs() < 1e-12);
    }

    #[test]
    fn efron_differs_with_ties() {
        let c = exponential_cohort(200, 0.6, 0.2, 8);
        let t: Vec<f64> = c.time.iter().map(|t| (t * 4.0).ceil() / 4.0).collect();
        let design = column(&c.x);
        let e = cox_fit(&t, &c.event, &design, &names(1), &CoxOptions::default()).unwrap();
        let b = cox_fit(&t, &c.event, &design, &names(1), &CoxOptions { ties: Ties::Breslow, ..Default::default() })
            .unwrap();
        // Breslow shrinks toward zero under heavy ties.
        assert!(b.coefficients[0].abs() < e.coefficients[0].abs());
    }

    #[test]
    fn errors() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true, true, false, true];
        assert_eq!(
            cox_fit(&t, &e, &column(&[1.0; 4]), &names(1), &CoxOptions::default()),
            Err(SurvivalError::ConstantCovariate("x0".into()))
        );
        // Higher x always dies first: monotone likelihood.
        assert!(matches!(
            cox_fit(&t, &[true; 4], &column(&[4.0, 3.0, 2.0, 1.0]), &names(1), &CoxOptions::default()),
            Err(SurvivalError::Separation(_))
        ));
        assert_eq!(
            cox_fit(&t, &[false; 4], &column(&[1.0, 2.0, 1.0, 2.0]), &names(1), &CoxOptions::default()),
            Err(SurvivalError::NoEvents)
        );
        let c = exponential_cohort(100, 0.7, 0.2, 1);
        let short = CoxOptions { max_iter: 1, ..Default::default() };
        assert_eq!(cox_fit(&c.time, &c.event, &column(&c.x), &names(1), &short), Err(SurvivalError::NotConverged(1)));
    }

    #[test]
    fn warns_when_small() {
        let c = exponential_cohort(15, 0.7, 0.2, 4);
        let design: Vec<Vec<f64>> = c.x.iter().enumerate().map(|(i, &v)| vec![v, (i % 3) as f64]).collect();
        let fit = cox_fit(&c.time, &c.event, &design, &names(2), &CoxOptions::default()).unwrap();
        assert!(fit.warning.is_some());
        let cov = &fit.covariance;
        assert_eq!(cov[0][1], cov[1][0]);
        assert!(cov[0][0] > 0.0 && cov[0][0] * cov[1][1] >= cov[0][1] * cov[0][1]);
    }
}
