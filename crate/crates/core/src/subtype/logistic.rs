use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{softmax, Simplex, N_CLASSES};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;

/// Multinomial logistic regression with an L2 penalty `‖W‖² / 2C` on the
/// weights (intercepts unpenalized), fitted by damped Newton iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    /// `K × D` weights.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

struct Objective {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// Parameters are laid out class by class: `[w_k (D), b_k]`.
fn objective(x: &[Vec<f64>], y: &[usize], theta: &DVector<f64>, c: f64, derivs: bool) -> Objective {
    let d = x[0].len();
    let stride = d + 1;
    let dim = N_CLASSES * stride;
    let mut value = 0.0;
    let mut grad = DVector::zeros(dim);
    let mut hess = DMatrix::zeros(if derivs { dim } else { 0 }, if derivs { dim } else { 0 });
    for (row, &label) in x.iter().zip(y) {
        let mut z = [0.0; N_CLASSES];
        for (k, zk) in z.iter_mut().enumerate() {
            let base = k * stride;
            *zk = theta[base + d] + row.iter().enumerate().map(|(j, v)| theta[base + j] * v).sum::<f64>();
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        value += lse - z[label];
        if !derivs {
            continue;
        }
        let p: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
        let xt: Vec<f64> = row.iter().copied().chain(std::iter::once(1.0)).collect();
        for k in 0..N_CLASSES {
            let r = p[k] - f64::from(u8::from(k == label));
            for (j, v) in xt.iter().enumerate() {
                grad[k * stride + j] += r * v;
            }
            for l in 0..N_CLASSES {
                let w = p[k] * (f64::from(u8::from(k == l)) - p[l]);
                if w == 0.0 {
                    continue;
                }
                for (a, va) in xt.iter().enumerate() {
                    for (b, vb) in xt.iter().enumerate() {
                        hess[(k * stride + a, l * stride + b)] += w * va * vb;
                    }
                }
            }
        }
    }
    for k in 0..N_CLASSES {
        for j in 0..d {
            let i = k * stride + j;
            value += 0.5 * theta[i] * theta[i] / c;
            if derivs {
                grad[i] += theta[i] / c;
                hess[(i, i)] += 1.0 / c;
            }
        }
        if derivs {
            // The intercepts are only identified up to a shared constant.
            hess[(k * stride + d, k * stride + d)] += 1e-8;
        }
    }
    Objective { value, grad, hess }
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[usize], c: f64) -> Self {
        let d = x[0].len();
        let stride = d + 1;
        let mut theta = DVector::zeros(N_CLASSES * stride);
        let mut cur = objective(x, y, &theta, c, true);
        for _ in 0..MAX_ITER {
            let step = match cur.hess.clone().cholesky() {
                Some(ch) => ch.solve(&cur.grad),
                None => cur.grad.clone(),
            };
            let mut scale = 1.0;
            let mut next_theta = &theta - &step;
            let mut next = objective(x, y, &next_theta, c, false);
            while next.value > cur.value && scale > 1e-12 {
                scale *= 0.5;
                next_theta = &theta - &step * scale;
                next = objective(x, y, &next_theta, c, false);
            }
            let delta = (&next_theta - &theta).amax();
            theta = next_theta;
            cur = objective(x, y, &theta, c, true);
            if delta < TOL {
                break;
            }
        }
        Self {
            weights: (0..N_CLASSES).map(|k| (0..d).map(|j| theta[k * stride + j]).collect()).collect(),
            intercepts: (0..N_CLASSES).map(|k| theta[k * stride + d]).collect(),
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        let mut z = [0.0; N_CLASSES];
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.intercepts[k] + self.weights[k].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        softmax(&mut z);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subtype::argmax;
    use crate::synthetic::gaussian_blobs;

    #[test]
    fn separates_blobs() {
        let b = gaussian_blobs(4, 30, 5, 4.0, 0.5, 3);
        let m = LogisticRegression::fit(&b.x, &b.labels, 1.0);
        let hits = b.x.iter().zip(&b.labels).filter(|(x, &l)| argmax(&m.predict_proba(x)) == l).count();
        assert!(hits >= 118, "{hits}");
        let p = m.predict_proba(&b.x[0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let b = gaussian_blobs(4, 20, 4, 2.0, 1.0, 4);
        let m = LogisticRegression::fit(&b.x, &b.labels, 1.0);
        let theta: Vec<f64> = (0..N_CLASSES)
            .flat_map(|k| m.weights[k].iter().copied().chain(std::iter::once(m.intercepts[k])).collect::<Vec<_>>())
            .collect();
        let o = objective(&b.x, &b.labels, &DVector::from_vec(theta), 1.0, true);
        assert!(o.grad.amax() < 1e-6, "{}", o.grad.amax());
    }

    #[test]
    fn stronger_penalty_shrinks() {
        let b = gaussian_blobs(4, 20, 4, 3.0, 0.8, 5);
        let norm = |m: &LogisticRegression| m.weights.iter().flatten().map(|w| w * w).sum::<f64>();
        let loose = LogisticRegression::fit(&b.x, &b.labels, 1.0);
        let tight = LogisticRegression::fit(&b.x, &b.labels, 0.01);
        assert!(norm(&tight) < norm(&loose));
    }
}
