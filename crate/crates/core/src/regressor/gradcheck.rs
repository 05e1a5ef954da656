use super::model::RegressorModel;
use super::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientComparison {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradientComparison {
    /// `|a − n| / max(|a|, |n|)`, zero when both vanish.
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }

    pub fn within(&self, rel: f64, abs: f64) -> bool {
        (self.analytic - self.numeric).abs() <= rel * self.analytic.abs().max(self.numeric.abs()) + abs
    }
}

/// Central differences `(L(θ+h) − L(θ−h)) / 2h` at `indices`, next to the
/// analytic gradient.
pub fn finite_difference_check(
    model: &RegressorModel,
    inputs: &[&[f64]],
    targets: &[&[f64]],
    indices: &[usize],
    h: f64,
) -> Result<Vec<GradientComparison>> {
    let (_, grad) = model.loss_and_grad(inputs, targets)?;
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = probe.batch_loss(inputs, targets)?;
        probe.params_mut()[i] = orig - h;
        let down = probe.batch_loss(inputs, targets)?;
        probe.params_mut()[i] = orig;
        out.push(GradientComparison { index: i, analytic: grad[i], numeric: (up - down) / (2.0 * h) });
    }
    Ok(out)
}
