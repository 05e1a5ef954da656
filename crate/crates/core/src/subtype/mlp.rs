use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax, Simplex, N_CLASSES};
use crate::regressor::Adam;

const L2: f64 = 1e-4;
const MAX_BATCH: usize = 200;

/// One hidden ReLU layer with a softmax output, trained on cross-entropy
/// with Adam. Parameters are stored flat: `W1 (H×D), b1, W2 (K×H), b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_features: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    fn offsets(&self) -> (usize, usize, usize) {
        let (d, h) = (self.n_features, self.hidden);
        (h * d, h * d + h, h * d + h + N_CLASSES * h)
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        let (d, h) = (self.n_features, self.hidden);
        let (b1, _, _) = self.offsets();
        (0..h)
            .map(|u| {
                let w = &self.params[u * d..(u + 1) * d];
                (self.params[b1 + u] + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()).max(0.0)
            })
            .collect()
    }

    fn output(&self, a: &[f64]) -> Simplex {
        let h = self.hidden;
        let (_, w2, b2) = self.offsets();
        let mut z = [0.0; N_CLASSES];
        for (k, zk) in z.iter_mut().enumerate() {
            let w = &self.params[w2 + k * h..w2 + (k + 1) * h];
            *zk = self.params[b2 + k] + w.iter().zip(a).map(|(p, v)| p * v).sum::<f64>();
        }
        softmax(&mut z);
        z
    }

    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        self.output(&self.hidden_layer(x))
    }

    /// Mean cross-entropy over `idx` plus the L2 term, and its gradient.
    fn loss_and_grad(&self, x: &[Vec<f64>], y: &[usize], idx: &[usize]) -> (f64, Vec<f64>) {
        let (d, h) = (self.n_features, self.hidden);
        let (b1, w2, b2) = self.offsets();
        let m = idx.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for &i in idx {
            let a = self.hidden_layer(&x[i]);
            let p = self.output(&a);
            loss -= p[y[i]].max(1e-300).ln();
            let mut delta_h = vec![0.0; h];
            for k in 0..N_CLASSES {
                let r = (p[k] - f64::from(u8::from(k == y[i]))) / m;
                grad[b2 + k] += r;
                for u in 0..h {
                    grad[w2 + k * h + u] += r * a[u];
                    delta_h[u] += r * self.params[w2 + k * h + u];
                }
            }
            for u in 0..h {
                if a[u] <= 0.0 {
                    continue;
                }
                grad[b1 + u] += delta_h[u];
                for j in 0..d {
                    grad[u * d + j] += delta_h[u] * x[i][j];
                }
            }
        }
        loss /= m;
        for i in (0..b1).chain(w2..b2) {
            let p = self.params[i];
            grad[i] += L2 / m * p;
            loss += 0.5 * L2 / m * p * p;
        }
        (loss, grad)
    }

    pub fn fit(x: &[Vec<f64>], y: &[usize], hidden: usize, epochs: usize, learning_rate: f64, seed: u64) -> Self {
        let d = x[0].len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Self { n_features: d, hidden, params: vec![0.0; hidden * d + hidden + N_CLASSES * hidden + N_CLASSES] };
        let (b1, w2, b2) = model.offsets();
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let (g1, g2) = (glorot(d, hidden), glorot(hidden, N_CLASSES));
        for p in &mut model.params[..b1] {
            *p = rng.random_range(-g1..g1);
        }
        for p in &mut model.params[b1..w2] {
            *p = rng.random_range(-g1..g1);
        }
        for p in &mut model.params[w2..b2] {
            *p = rng.random_range(-g2..g2);
        }
        for p in &mut model.params[b2..] {
            *p = rng.random_range(-g2..g2);
        }

        let mut adam = Adam::new(model.params.len(), learning_rate);
        let batch = MAX_BATCH.min(x.len()).max(1);
        let mut order: Vec<usize> = (0..x.len()).collect();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let (_, grad) = model.loss_and_grad(x, y, chunk);
                adam.step(&mut model.params, &grad);
            }
        }
        model
    }
}
