use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{argmax, Result, Simplex, Subtype, SubtypeError, N_CLASSES};
use crate::metrics::spearman;
use crate::util::median;

const MIN_PER_SUBTYPE: usize = 2;

/// Per-subtype centroids over median-centered expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub gene_order: Vec<String>,
    pub medians: Vec<f64>,
    pub subtypes: Vec<Subtype>,
    /// One row per entry of `subtypes`.
    pub centroids: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtypeCall {
    pub subtype: Subtype,
    /// Spearman correlation to each centroid, in [`Subtype::ALL`] order.
    pub similarity: Simplex,
}

/// `rows[i]` holds the expression of sample `i` over `genes`.
pub fn fit_centroids(genes: &[String], rows: &[Vec<f64>], labels: &[Subtype]) -> Result<CentroidModel> {
    if rows.len() != labels.len() {
        return Err(SubtypeError::ShapeMismatch(format!("{} rows, {} labels", rows.len(), labels.len())));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != genes.len()) {
        return Err(SubtypeError::LengthMismatch { expected: genes.len(), found: r.len() });
    }
    for subtype in Subtype::ALL {
        let n = labels.iter().filter(|&&l| l == subtype).count();
        if n < MIN_PER_SUBTYPE {
            return Err(SubtypeError::MissingSubtype { subtype, n, min: MIN_PER_SUBTYPE });
        }
    }
    let medians: Vec<f64> = (0..genes.len())
        .map(|g| median(&rows.iter().map(|r| r[g]).collect::<Vec<_>>()).expect("non-empty"))
        .collect();
    let centroids = Subtype::ALL
        .iter()
        .map(|&t| {
            let members: Vec<&Vec<f64>> = rows.iter().zip(labels).filter(|(_, &l)| l == t).map(|(r, _)| r).collect();
            (0..genes.len())
                .map(|g| members.iter().map(|r| r[g] - medians[g]).sum::<f64>() / members.len() as f64)
                .collect()
        })
        .collect();
    Ok(CentroidModel { gene_order: genes.to_vec(), medians, subtypes: Subtype::ALL.to_vec(), centroids })
}

impl CentroidModel {
    pub fn call(&self, sample: &[f64]) -> Result<SubtypeCall> {
        if sample.len() != self.gene_order.len() {
            return Err(SubtypeError::LengthMismatch { expected: self.gene_order.len(), found: sample.len() });
        }
        let centered: Vec<f64> = sample.iter().zip(&self.medians).map(|(x, m)| x - m).collect();
        let mut similarity = [f64::NEG_INFINITY; N_CLASSES];
        for (t, c) in self.subtypes.iter().zip(&self.centroids) {
            // A constant vector has no ranking; treat it as uncorrelated.
            similarity[t.index()] = spearman(&centered, c).map_or(0.0, |r| r.rho);
        }
        Ok(SubtypeCall { subtype: Subtype::from_index(argmax(&similarity)), similarity })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CentroidModel = serde_json::from_str(text)?;
        let p = m.gene_order.len();
        if m.medians.len() != p || m.centroids.len() != m.subtypes.len() || m.centroids.iter().any(|c| c.len() != p) {
            return Err(SubtypeError::ShapeMismatch("centroid table does not match gene_order".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
