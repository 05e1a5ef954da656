use serde::{Deserialize, Serialize};

use super::{argmax, check_rows, LinearDiscriminant, LogisticRegression, Mlp, RandomForest, Result, Simplex, Subtype, SubtypeError, N_CLASSES};

const MIN_PER_CLASS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VotingConfig {
    pub lr_c: f64,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_learning_rate: f64,
    pub rf_trees: usize,
    pub seed: u64,
}

impl Default for VotingConfig {
    fn default() -> Self {
        Self { lr_c: 1.0, mlp_hidden: 64, mlp_epochs: 200, mlp_learning_rate: 1e-3, rf_trees: 100, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingModel {
    pub logistic: LogisticRegression,
    pub lda: LinearDiscriminant,
    pub mlp: Mlp,
    pub forest: RandomForest,
}

/// Mean of four simplices, summed pairwise.
pub fn soft_vote(p: [Simplex; 4]) -> Simplex {
    let mut out = [0.0; N_CLASSES];
    for (k, o) in out.iter_mut().enumerate() {
        *o = ((p[0][k] + p[1][k]) + (p[2][k] + p[3][k])) / 4.0;
    }
    out
}

pub fn fit_voting(x: &[Vec<f64>], labels: &[Subtype], cfg: &VotingConfig) -> Result<VotingModel> {
    check_rows(x, labels.len())?;
    for class in Subtype::ALL {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < MIN_PER_CLASS {
            return Err(SubtypeError::ClassTooSmall { class, n, min: MIN_PER_CLASS });
        }
    }
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    Ok(VotingModel {
        logistic: LogisticRegression::fit(x, &y, cfg.lr_c),
        lda: LinearDiscriminant::fit(x, &y),
        mlp: Mlp::fit(x, &y, cfg.mlp_hidden, cfg.mlp_epochs, cfg.mlp_learning_rate, cfg.seed),
        forest: RandomForest::fit(x, &y, cfg.rf_trees, cfg.seed.wrapping_add(1)),
    })
}

impl VotingModel {
    pub fn base_probabilities(&self, x: &[f64]) -> [Simplex; 4] {
        [
            self.logistic.predict_proba(x),
            self.lda.predict_proba(x),
            self.mlp.predict_proba(x),
            self.forest.predict_proba(x),
        ]
    }

    pub fn predict_proba(&self, x: &[f64]) -> Simplex {
        soft_vote(self.base_probabilities(x))
    }

    pub fn predict(&self, x: &[f64]) -> (Subtype, Simplex) {
        let p = self.predict_proba(x);
        (Subtype::from_index(argmax(&p)), p)
    }
}
