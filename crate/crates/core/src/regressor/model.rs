use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RegressorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// Linear head, used to test linearity identities.
    Identity,
}

/// Layer widths of the head. The default is 256 filters of length 5, then
/// two 512-channel pointwise blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadShape {
    pub conv1_filters: usize,
    pub kernel: usize,
    pub conv2_channels: usize,
    pub conv3_channels: usize,
    pub activation: Activation,
}

impl Default for HeadShape {
    fn default() -> Self {
        Self { conv1_filters: 256, kernel: 5, conv2_channels: 512, conv3_channels: 512, activation: Activation::Relu }
    }
}

impl HeadShape {
    /// A reduced-width head for fast tests.
    pub fn small(c1: usize, c2: usize, c3: usize) -> Self {
        Self { conv1_filters: c1, kernel: 5, conv2_channels: c2, conv3_channels: c3, activation: Activation::Relu }
    }
}

/// Offsets of each tensor in the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub w1: (usize, usize, usize),
    pub b1: usize,
    pub w2: (usize, usize, usize),
    pub b2: usize,
    pub w3: (usize, usize, usize),
    pub b3: usize,
    pub wo: (usize, usize, usize),
    pub bo: usize,
    pub total: usize,
}

impl Layout {
    fn new(s: &HeadShape, g: usize) -> Self {
        let mut off = 0;
        let mut mat = |r: usize, c: usize| {
            let start = off;
            off += r * c;
            (start, r, c)
        };
        let w1 = mat(s.conv1_filters, s.kernel);
        let b1 = mat(s.conv1_filters, 1).0;
        let w2 = mat(s.conv2_channels, s.conv1_filters);
        let b2 = mat(s.conv2_channels, 1).0;
        let w3 = mat(s.conv3_channels, s.conv2_channels);
        let b3 = mat(s.conv3_channels, 1).0;
        let wo = mat(g, s.conv3_channels);
        let bo = mat(g, 1).0;
        Self { w1, b1, w2, b2, w3, b3, wo, bo, total: off }
    }

    /// `(name, start, len)` for every tensor, in storage order.
    pub fn tensors(&self) -> [(&'static str, usize, usize); 8] {
        let m = |t: (usize, usize, usize)| (t.0, t.1 * t.2);
        [
            ("conv1_w", m(self.w1).0, m(self.w1).1),
            ("conv1_b", self.b1, self.w1.1),
            ("conv2_w", m(self.w2).0, m(self.w2).1),
            ("conv2_b", self.b2, self.w2.1),
            ("conv3_w", m(self.w3).0, m(self.w3).1),
            ("conv3_b", self.b3, self.w3.1),
            ("out_w", m(self.wo).0, m(self.wo).1),
            ("out_b", self.bo, self.wo.1),
        ]
    }
}

fn mat(p: &[f64], t: (usize, usize, usize)) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((t.1, t.2), &p[t.0..t.0 + t.1 * t.2]).expect("layout")
}

fn mat_mut(p: &mut [f64], t: (usize, usize, usize)) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((t.1, t.2), &mut p[t.0..t.0 + t.1 * t.2]).expect("layout")
}

fn vec_view(p: &[f64], start: usize, len: usize) -> ArrayView1<'_, f64> {
    ArrayView1::from(&p[start..start + len])
}

fn vec_mut(p: &mut [f64], start: usize, len: usize) -> ArrayViewMut1<'_, f64> {
    ArrayViewMut1::from(&mut p[start..start + len])
}

/// The convolutional regression head over a length-F, single-channel input.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    n_features: usize,
    n_genes: usize,
    shape: HeadShape,
    layout: Layout,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass for the backward pass.
struct Cache {
    x1: Array2<f64>,
    a1: Array2<f64>,
    h1: Array2<f64>,
    a2: Array2<f64>,
    h2: Array2<f64>,
    a3: Array2<f64>,
    pooled: Array2<f64>,
}

impl RegressorModel {
    /// All-zero parameters.
    pub fn zeros(n_features: usize, n_genes: usize, shape: HeadShape) -> Result<Self> {
        if n_features < shape.kernel {
            return Err(RegressorError::FeatureTooShort { f: n_features, kernel: shape.kernel });
        }
        if n_genes == 0 || shape.kernel == 0 || shape.kernel.is_multiple_of(2) {
            return Err(RegressorError::ShapeMismatch(format!(
                "invalid head: G={n_genes}, kernel={}",
                shape.kernel
            )));
        }
        let layout = Layout::new(&shape, n_genes);
        Ok(Self { n_features, n_genes, shape, layout, params: vec![0.0; layout.total] })
    }

    /// He-uniform weights `U(±sqrt(6 / fan_in))`, zero biases.
    pub fn init<R: Rng>(n_features: usize, n_genes: usize, shape: HeadShape, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(n_features, n_genes, shape)?;
        let l = m.layout;
        for t in [l.w1, l.w2, l.w3, l.wo] {
            let bound = (6.0 / t.2 as f64).sqrt();
            for w in &mut m.params[t.0..t.0 + t.1 * t.2] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(m)
    }

    pub fn from_params(n_features: usize, n_genes: usize, shape: HeadShape, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(n_features, n_genes, shape)?;
        if params.len() != m.layout.total {
            return Err(RegressorError::ShapeMismatch(format!(
                "{} parameters, expected {}",
                params.len(),
                m.layout.total
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(RegressorError::NonFiniteParameter);
        }
        m.params = params;
        Ok(m)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_genes(&self) -> usize {
        self.n_genes
    }

    pub fn shape(&self) -> HeadShape {
        self.shape
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn conv1_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        mat_mut(&mut self.params, self.layout.w1)
    }

    pub fn conv2_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        mat_mut(&mut self.params, self.layout.w2)
    }

    pub fn conv3_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        mat_mut(&mut self.params, self.layout.w3)
    }

    pub fn out_weights_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        mat_mut(&mut self.params, self.layout.wo)
    }

    pub fn out_bias_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        vec_mut(&mut self.params, self.layout.bo, self.n_genes)
    }

    fn act(&self, a: &Array2<f64>) -> Array2<f64> {
        match self.shape.activation {
            Activation::Relu => a.mapv(|v| v.max(0.0)),
            Activation::Identity => a.clone(),
        }
    }

    /// `(B·F) × kernel` patches of the zero-padded inputs.
    fn im2col(&self, inputs: &[&[f64]]) -> Array2<f64> {
        let f = self.n_features;
        let k = self.shape.kernel;
        let half = k / 2;
        let mut x = Array2::zeros((inputs.len() * f, k));
        for (b, z) in inputs.iter().enumerate() {
            for pos in 0..f {
                let mut row = x.row_mut(b * f + pos);
                for j in 0..k {
                    let src = pos + j;
                    if src >= half && src - half < f {
                        row[j] = z[src - half];
                    }
                }
            }
        }
        x
    }

    fn check_inputs(&self, inputs: &[&[f64]]) -> Result<()> {
        for z in inputs {
            if z.len() != self.n_features {
                return Err(RegressorError::ShapeMismatch(format!(
                    "input length {}, model expects {}",
                    z.len(),
                    self.n_features
                )));
            }
        }
        Ok(())
    }

    fn forward_cached(&self, inputs: &[&[f64]]) -> (Array2<f64>, Cache) {
        let p = &self.params;
        let l = &self.layout;
        let (b, f) = (inputs.len(), self.n_features);
        let x1 = self.im2col(inputs);
        let a1 = x1.dot(&mat(p, l.w1).t()) + &vec_view(p, l.b1, l.w1.1);
        let h1 = self.act(&a1);
        let a2 = h1.dot(&mat(p, l.w2).t()) + &vec_view(p, l.b2, l.w2.1);
        let h2 = self.act(&a2);
        let a3 = h2.dot(&mat(p, l.w3).t()) + &vec_view(p, l.b3, l.w3.1);
        let h3 = self.act(&a3);
        // Pooling commutes with the linear output conv, so pool first.
        let c3 = l.w3.1;
        let pooled = h3
            .into_shape_with_order((b, f, c3))
            .expect("contiguous")
            .mean_axis(Axis(1))
            .expect("F > 0");
        let out = pooled.dot(&mat(p, l.wo).t()) + &vec_view(p, l.bo, self.n_genes);
        (out, Cache { x1, a1, h1, a2, h2, a3, pooled })
    }

    /// Predictions for a batch, `B × G`.
    pub fn forward_batch(&self, inputs: &[&[f64]]) -> Result<Array2<f64>> {
        self.check_inputs(inputs)?;
        Ok(self.forward_cached(inputs).0)
    }

    /// Prediction for one slide feature vector.
    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&[z])?.row(0).to_vec())
    }

    /// Predictions for many inputs, evaluated in chunks of `chunk` rows.
    pub fn predict_many(&self, inputs: &[&[f64]], chunk: usize) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for c in inputs.chunks(chunk.max(1)) {
            let pred = self.forward_batch(c)?;
            out.extend(pred.rows().into_iter().map(|r| r.to_vec()));
        }
        Ok(out)
    }

    /// Mean over the batch of per-sample MSE, and its gradient with respect
    /// to every parameter (same layout as [`params`](Self::params)).
    pub fn loss_and_grad(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        self.check_inputs(inputs)?;
        if targets.len() != inputs.len() || targets.iter().any(|t| t.len() != self.n_genes) {
            return Err(RegressorError::LengthMismatch);
        }
        let p = &self.params;
        let l = &self.layout;
        let (b, f, g) = (inputs.len(), self.n_features, self.n_genes);
        let (out, cache) = self.forward_cached(inputs);

        let mut loss = 0.0;
        let mut d_out = Array2::zeros((b, g));
        let scale = 2.0 / (g as f64 * b as f64);
        for (i, t) in targets.iter().enumerate() {
            let mut s = 0.0;
            for j in 0..g {
                let diff = out[[i, j]] - t[j];
                s += diff * diff;
                d_out[[i, j]] = scale * diff;
            }
            loss += s / g as f64;
        }
        loss /= b as f64;

        let mut grad = vec![0.0; l.total];
        mat_mut(&mut grad, l.wo).assign(&d_out.t().dot(&cache.pooled));
        vec_mut(&mut grad, l.bo, g).assign(&d_out.sum_axis(Axis(0)));

        let d_pooled = d_out.dot(&mat(p, l.wo));
        let c3 = l.w3.1;
        let mut d_a3 = Array2::zeros((b * f, c3));
        let inv_f = 1.0 / f as f64;
        for i in 0..b {
            let src = d_pooled.row(i);
            for pos in 0..f {
                d_a3.row_mut(i * f + pos).zip_mut_with(&src, |d, &s| *d = s * inv_f);
            }
        }
        self.act_backward(&mut d_a3, &cache.a3);
        mat_mut(&mut grad, l.w3).assign(&d_a3.t().dot(&cache.h2));
        vec_mut(&mut grad, l.b3, c3).assign(&d_a3.sum_axis(Axis(0)));

        let mut d_a2 = d_a3.dot(&mat(p, l.w3));
        self.act_backward(&mut d_a2, &cache.a2);
        mat_mut(&mut grad, l.w2).assign(&d_a2.t().dot(&cache.h1));
        vec_mut(&mut grad, l.b2, l.w2.1).assign(&d_a2.sum_axis(Axis(0)));

        let mut d_a1 = d_a2.dot(&mat(p, l.w2));
        self.act_backward(&mut d_a1, &cache.a1);
        mat_mut(&mut grad, l.w1).assign(&d_a1.t().dot(&cache.x1));
        vec_mut(&mut grad, l.b1, l.w1.1).assign(&d_a1.sum_axis(Axis(0)));

        Ok((loss, grad))
    }

    fn act_backward(&self, d: &mut Array2<f64>, pre: &Array2<f64>) {
        if self.shape.activation == Activation::Relu {
            d.zip_mut_with(pre, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
        }
    }

    /// Mean per-sample MSE without gradients.
    pub fn batch_loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<f64> {
        if targets.len() != inputs.len() {
            return Err(RegressorError::LengthMismatch);
        }
        let pred = self.forward_batch(inputs)?;
        let mut total = 0.0;
        for (row, t) in pred.rows().into_iter().zip(targets) {
            total += loss(row.as_slice().expect("contiguous"), t)?;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Output bias as an owned vector.
    pub fn out_bias(&self) -> Array1<f64> {
        vec_view(&self.params, self.layout.bo, self.n_genes).to_owned()
    }
}

/// Mean squared error over the G outputs.
pub fn loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(RegressorError::LengthMismatch);
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}
