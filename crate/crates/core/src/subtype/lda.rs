use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{softmax, Simplex, N_CLASSES};

/// Gaussian classes with a shared covariance and empirical priors.
/// Discriminants are `xᵀΣ⁻¹μ_k − ½μ_kᵀΣ⁻¹μ_k + log π_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDiscriminant {
    /// `Σ⁻¹μ_k` per class.
    pub coefficients: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LinearDiscriminant {
    pub fn fit(x: &[Vec<f64>], y: &[usize]) -> Self {
        let (n, d) = (x.len(), x[0].len());
        let mut counts = [0usize; N_CLASSES];
        let mut means = vec![DVector::<f64>::zeros(d); N_CLASSES];
        for (row, &l) in x.iter().zip(y) {
            counts[l] += 1;
            means[l] += DVector::from_column_slice(row);
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            if c > 0 {
                *m /= c as f64;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (row, &l) in x.iter().zip(y) {
            let r = DVector::from_column_slice(row) - &means[l];
            cov.ger(1.0, &r, &r, 1.0);
        }
        let present = counts.iter().filter(|&&c| c > 0).count();
        cov /= (n.saturating_sub(present)).max(1) as f64;

        let mut ridge = 0.0;
        let scale = (cov.trace() / d as f64).max(f64::MIN_POSITIVE);
        let chol = loop {
            let mut m = cov.clone();
            for i in 0..d {
                m[(i, i)] += ridge;
            }
            if let Some(c) = m.cholesky() {
                break c;
            }
            ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 10.0 };
        };

        let mut coefficients = Vec::with_capacity(N_CLASSES);
        let mut intercepts = Vec::with_capacity(N_CLASSES);
        for (m, &c) in means.iter().zip(&counts) {
            if c == 0 {
                coefficients.push(vec![0.0; d]);
                intercepts.push(f64::NEG_INFINITY);
                continue;
            }
            let a = chol.solve(m);
            intercepts.push(-0.5 * m.dot(&a) + (c as f64 / n as f64).ln());
            coefficients.push(a.iter().copied().collect());
        }
        Self { coefficients, intercepts }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        let mut z = [0.0; N_CLASSES];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.intercepts[k] + self.coefficients[k].iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
        softmax(&mut z);
        z
    }
}
