use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::model::{loss, HeadShape, RegressorModel};
use super::{RegressorError, Result};
use crate::features::PatchFeatureSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub head: HeadShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 12,
            patience: 4,
            max_epochs: 150,
            seed: 0,
            validation_fraction: 0.1,
            head: HeadShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return bad("batch_size, patience and max_epochs must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation_fraction must lie in (0, 0.5]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Patience-based stopping on strict improvement of the monitored loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    pub fn update(&mut self, epoch: usize, value: f64) -> StopDecision {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub model: RegressorModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
    /// Training samples seen per epoch.
    pub samples_per_epoch: usize,
    pub train_patients: Vec<usize>,
    pub val_patients: Vec<usize>,
}

/// `epoch,train_mse,val_mse,wall_clock_seconds`
pub fn write_history<W: Write>(history: &[EpochRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,train_mse,val_mse,wall_clock_seconds")?;
    for r in history {
        writeln!(w, "{},{},{},{}", r.epoch, r.train_mse, r.val_mse, r.wall_clock_seconds)?;
    }
    Ok(())
}

struct Setup {
    rng: ChaCha8Rng,
    model: RegressorModel,
    train: Vec<usize>,
    val: Vec<usize>,
}

/// Seeded weight init, patient-level train/validation split, and output
/// bias set to the mean training target.
fn setup(n: usize, f: usize, targets: &[Vec<f64>], config: &TrainConfig) -> Result<Setup> {
    config.validate()?;
    let min = 2 * config.batch_size;
    if n < min {
        return Err(RegressorError::DatasetTooSmall { n, min });
    }
    let g = targets[0].len();
    if targets.iter().any(|t| t.len() != g) {
        return Err(RegressorError::ShapeMismatch("ragged target rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = RegressorModel::init(f, g, config.head, &mut rng)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let n_val = ((n as f64 * config.validation_fraction).round() as usize).clamp(1, n - 1);
    let val = perm[..n_val].to_vec();
    let train = perm[n_val..].to_vec();
    let mut bias = vec![0.0; g];
    for &i in &train {
        for (b, t) in bias.iter_mut().zip(&targets[i]) {
            *b += t;
        }
    }
    let mut out_b = model.out_bias_mut();
    for (o, b) in out_b.iter_mut().zip(&bias) {
        *o = b / train.len() as f64;
    }
    Ok(Setup { rng, model, train, val })
}

fn run<V>(
    mut s: Setup,
    inputs: &[&[f64]],
    targets: &[&[f64]],
    config: &TrainConfig,
    mut validate: V,
) -> Result<TrainOutcome>
where
    V: FnMut(&RegressorModel) -> Result<f64>,
{
    let mut adam = Adam::new(s.model.n_params(), config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = s.model.clone();
    let mut history = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut s.rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb: Vec<&[f64]> = batch.iter().map(|&i| inputs[i]).collect();
            let yb: Vec<&[f64]> = batch.iter().map(|&i| targets[i]).collect();
            let (l, grad) = s.model.loss_and_grad(&xb, &yb)?;
            total += l * batch.len() as f64;
            adam.step(s.model.params_mut(), &grad);
        }
        let train_mse = total / inputs.len() as f64;
        let val_mse = validate(&s.model)?;
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(RegressorError::Diverged(epoch));
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        });
        match stopper.update(epoch, val_mse) {
            StopDecision::Improved => best.clone_from(&s.model),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch: stopper.best_epoch(),
        best_val_mse: stopper.best(),
        stopped_early,
        samples_per_epoch: inputs.len(),
        train_patients: s.train,
        val_patients: s.val,
    })
}

const EVAL_CHUNK: usize = 64;

/// Trains on slide-level features `x` (one row per patient) against
/// targets `y`.
pub fn train(x: &[Vec<f64>], y: &[Vec<f64>], config: &TrainConfig) -> Result<TrainOutcome> {
    if x.len() != y.len() {
        return Err(RegressorError::LengthMismatch);
    }
    let f = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != f) {
        return Err(RegressorError::ShapeMismatch("ragged feature rows".into()));
    }
    let s = setup(x.len(), f, y, config)?;
    let inputs: Vec<&[f64]> = s.train.iter().map(|&i| x[i].as_slice()).collect();
    let targets: Vec<&[f64]> = s.train.iter().map(|&i| y[i].as_slice()).collect();
    let vx: Vec<&[f64]> = s.val.iter().map(|&i| x[i].as_slice()).collect();
    let vy: Vec<&[f64]> = s.val.iter().map(|&i| y[i].as_slice()).collect();
    run(s, &inputs, &targets, config, |m| {
        let preds = m.predict_many(&vx, EVAL_CHUNK)?;
        mean_loss(&preds, &vy)
    })
}

fn mean_loss(preds: &[Vec<f64>], targets: &[&[f64]]) -> Result<f64> {
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += loss(p, t)?;
    }
    Ok(total / preds.len() as f64)
}

fn patch_rows(p: &PatchFeatureSet) -> Vec<Vec<f64>> {
    p.rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
}

/// Mean of the per-patch predictions for one patient.
pub fn predict_patchwise(model: &RegressorModel, patches: &PatchFeatureSet) -> Result<Vec<f64>> {
    let rows = patch_rows(patches);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let preds = model.predict_many(&refs, EVAL_CHUNK)?;
    let mut acc = vec![0.0; model.n_genes()];
    for p in &preds {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let n = preds.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Baseline that treats every patch as a sample carrying its patient's
/// target. Validation is at patient level on mean patch predictions.
pub fn train_patchwise(patches: &[PatchFeatureSet], y: &[Vec<f64>], config: &TrainConfig) -> Result<TrainOutcome> {
    if patches.len() != y.len() {
        return Err(RegressorError::LengthMismatch);
    }
    let f = patches.first().map_or(0, PatchFeatureSet::n_features);
    if patches.iter().any(|p| p.n_features() != f) {
        return Err(RegressorError::ShapeMismatch("patch sets differ in width".into()));
    }
    let s = setup(patches.len(), f, y, config)?;
    let rows: Vec<Vec<Vec<f64>>> = s.train.iter().map(|&i| patch_rows(&patches[i])).collect();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (rows, &i) in rows.iter().zip(&s.train) {
        for r in rows {
            inputs.push(r.as_slice());
            targets.push(y[i].as_slice());
        }
    }
    let val = s.val.clone();
    run(s, &inputs, &targets, config, |m| {
        let mut total = 0.0;
        for &i in &val {
            total += loss(&predict_patchwise(m, &patches[i])?, &y[i])?;
        }
        Ok(total / val.len() as f64)
    })
}
