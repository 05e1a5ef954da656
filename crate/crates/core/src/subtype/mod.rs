//! Molecular subtype calling: Spearman nearest-centroid assignment and a
//! soft-voting ensemble of four probabilistic classifiers.

mod centroid;
mod forest;
mod lda;
mod logistic;
mod mlp;
mod report;
mod voting;

pub use centroid::{fit_centroids, CentroidModel, SubtypeCall};
pub use forest::{Node, RandomForest, Tree};
pub use lda::LinearDiscriminant;
pub use logistic::LogisticRegression;
pub use mlp::Mlp;
pub use report::{classification_report, ClassMetrics, ClassificationReport};
pub use voting::{fit_voting, soft_vote, VotingConfig, VotingModel};

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_CLASSES: usize = 4;

/// A probability vector over [`Subtype::ALL`].
pub type Simplex = [f64; N_CLASSES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subtype {
    LumA,
    LumB,
    Basal,
    #[serde(rename = "HER2")]
    Her2,
}

impl Subtype {
    /// Fixed class order; ties resolve to the earliest entry.
    pub const ALL: [Subtype; N_CLASSES] = [Subtype::LumA, Subtype::LumB, Subtype::Basal, Subtype::Her2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Subtype {
        Self::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Subtype::LumA => "LumA",
            Subtype::LumB => "LumB",
            Subtype::Basal => "Basal",
            Subtype::Her2 => "HER2",
        }
    }
}

impl fmt::Display for Subtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subtype {
    type Err = SubtypeError;

    fn from_str(s: &str) -> Result<Self> {
        Subtype::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SubtypeError::UnknownSubtype(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SubtypeError {
    #[error("subtype {subtype} has {n} training samples, need at least {min}")]
    MissingSubtype { subtype: Subtype, n: usize, min: usize },
    #[error("class {class} has {n} samples, need at least {min}")]
    ClassTooSmall { class: Subtype, n: usize, min: usize },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown subtype '{0}'")]
    UnknownSubtype(String),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SubtypeError>;

/// Index of the largest entry; the first wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_rows(x: &[Vec<f64>], n_labels: usize) -> Result<usize> {
    if x.len() != n_labels {
        return Err(SubtypeError::ShapeMismatch(format!("{} rows, {} labels", x.len(), n_labels)));
    }
    let d = x.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(SubtypeError::ShapeMismatch("no features".into()));
    }
    if let Some(r) = x.iter().position(|row| row.len() != d) {
        return Err(SubtypeError::ShapeMismatch(format!("row {r} has {} features, expected {d}", x[r].len())));
    }
    Ok(d)
}

fn softmax(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Reads `patient_id,subtype`.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, Subtype)>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| SubtypeError::ParseError { line, message: e.to_string() })?;
        if row.len() < 2 {
            return Err(SubtypeError::ParseError { line, message: "expected patient_id,subtype".into() });
        }
        out.push((row[0].to_string(), row[1].parse()?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub patient_id: String,
    pub subtype: Subtype,
    pub proba: Simplex,
}

pub const PREDICTIONS_HEADER: &str = "patient_id,subtype,p_luma,p_lumb,p_basal,p_her2";

pub fn write_predictions<W: Write>(mut w: W, rows: &[Prediction]) -> std::io::Result<()> {
    writeln!(w, "{PREDICTIONS_HEADER}")?;
    for p in rows {
        let [a, b, c, d] = p.proba;
        writeln!(w, "{},{},{a},{b},{c},{d}", p.patient_id, p.subtype)?;
    }
    Ok(())
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<Prediction>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| SubtypeError::ParseError { line: 1, message: e.to_string() })?;
    if header.iter().collect::<Vec<_>>().join(",") != PREDICTIONS_HEADER {
        return Err(SubtypeError::ParseError { line: 1, message: format!("expected header {PREDICTIONS_HEADER}") });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| SubtypeError::ParseError { line, message: e.to_string() })?;
        let mut proba = [0.0; N_CLASSES];
        for (k, p) in proba.iter_mut().enumerate() {
            *p = row[2 + k].parse().map_err(|_| SubtypeError::ParseError {
                line,
                message: format!("invalid probability '{}'", &row[2 + k]),
            })?;
        }
        out.push(Prediction { patient_id: row[0].to_string(), subtype: row[1].parse()?, proba });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in Subtype::ALL {
            assert_eq!(t.name().parse::<Subtype>().unwrap(), t);
            assert_eq!(Subtype::from_index(t.index()), t);
        }
        assert_eq!(serde_json::to_string(&Subtype::Her2).unwrap(), "\"HER2\"");
        assert!("Normal".parse::<Subtype>().is_err());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[0.25; 4]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn predictions_round_trip() {
        let rows = vec![
            Prediction { patient_id: "A".into(), subtype: Subtype::LumB, proba: [0.1, 0.7, 0.1, 0.1] },
            Prediction { patient_id: "B".into(), subtype: Subtype::Her2, proba: [0.0, 0.0, 0.25, 0.75] },
        ];
        let mut buf = Vec::new();
        write_predictions(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with(PREDICTIONS_HEADER));
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn labels() {
        let l = read_labels("patient_id,subtype\nA,LumA\nB,her2\n".as_bytes()).unwrap();
        assert_eq!(l, vec![("A".into(), Subtype::LumA), ("B".into(), Subtype::Her2)]);
        assert!(matches!(read_labels("patient_id,subtype\nA,X\n".as_bytes()), Err(SubtypeError::UnknownSubtype(_))));
    }
}
