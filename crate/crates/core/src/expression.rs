//! Gene panels and patient × gene expression matrices.
//!
//! Raw expression arrives as a CSV with a `patient_id` column followed by
//! gene symbols. Columns are reordered to panel order on load; the panel
//! order defines the regressor's output-channel index.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::fnv1a;

#[derive(Debug, Error)]
pub enum ExpressionError {
    #[error("negative expression value at row {row}, column {col}")]
    NegativeExpression { row: usize, col: usize },
    #[error("matrix is already log-transformed")]
    AlreadyTransformed,
    #[error("panel gene {0} is absent from the expression header")]
    MissingGene(String),
    #[error("duplicate patient id {0}")]
    DuplicatePatient(String),
    #[error("duplicate gene symbol {0} in panel")]
    DuplicateGene(String),
    #[error("panel flags {0} PAM50 genes; at most 50 allowed")]
    TooManyPam50(usize),
    #[error("parse error on line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("panel JSON: {0}")]
    PanelFormat(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ExpressionError>;

/// The default 138-slot panel shipped with the crate.
pub const DEFAULT_PANEL_JSON: &str = include_str!("../data/panel_default.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneEntry {
    pub symbol: String,
    #[serde(default)]
    pub assays: Vec<String>,
    #[serde(default)]
    pub pam50: bool,
}

/// Ordered gene panel. Order is significant and persisted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<GeneEntry>", into = "Vec<GeneEntry>")]
pub struct GenePanel {
    genes: Vec<GeneEntry>,
}

impl TryFrom<Vec<GeneEntry>> for GenePanel {
    type Error = ExpressionError;

    fn try_from(genes: Vec<GeneEntry>) -> Result<Self> {
        GenePanel::new(genes)
    }
}

impl From<GenePanel> for Vec<GeneEntry> {
    fn from(p: GenePanel) -> Self {
        p.genes
    }
}

impl GenePanel {
    pub fn new(genes: Vec<GeneEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &genes {
            if !seen.insert(g.symbol.as_str()) {
                return Err(ExpressionError::DuplicateGene(g.symbol.clone()));
            }
        }
        let pam50 = genes.iter().filter(|g| g.pam50).count();
        if pam50 > 50 {
            return Err(ExpressionError::TooManyPam50(pam50));
        }
        Ok(Self { genes })
    }

    /// Panel with the given symbols and no assay annotations.
    pub fn from_symbols<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        Self::new(
            symbols
                .iter()
                .map(|s| GeneEntry { symbol: s.as_ref().to_string(), assays: vec![], pam50: false })
                .collect(),
        )
    }

    pub fn default_panel() -> Self {
        Self::from_json(DEFAULT_PANEL_JSON).expect("bundled panel is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.genes).expect("panel serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn entries(&self) -> &[GeneEntry] {
        &self.genes
    }

    pub fn symbols(&self) -> Vec<String> {
        self.genes.iter().map(|g| g.symbol.clone()).collect()
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.genes.iter().position(|g| g.symbol == symbol)
    }

    pub fn pam50_indices(&self) -> Vec<usize> {
        self.genes.iter().enumerate().filter(|(_, g)| g.pam50).map(|(i, _)| i).collect()
    }

    /// FNV-1a over the symbols joined by commas.
    pub fn fingerprint(&self) -> u64 {
        let joined = self.genes.iter().map(|g| g.symbol.as_str()).collect::<Vec<_>>().join(",");
        fnv1a(joined.as_bytes())
    }
}

/// Patients × genes matrix in panel order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    pub patient_ids: Vec<String>,
    pub genes: Vec<String>,
    /// One row per patient, one column per gene.
    pub values: Vec<Vec<f64>>,
    pub transformed: bool,
}

/// Result of [`load_expression`]: the matrix plus patients rejected for
/// missing panel values.
#[derive(Debug, Clone)]
pub struct LoadedExpression {
    pub matrix: ExpressionMatrix,
    pub rejected: Vec<RejectedPatient>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedPatient {
    pub patient_id: String,
    pub missing_gene: String,
    pub line: usize,
}

pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Inverse of [`log2_1p`]: `2^t − 1`.
pub fn exp2_m1(t: f64) -> f64 {
    (t * std::f64::consts::LN_2).exp_m1()
}

fn map_checked(values: &[Vec<f64>], f: fn(f64) -> f64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(values.len());
    for (row, r) in values.iter().enumerate() {
        let mut o = Vec::with_capacity(r.len());
        for (col, &v) in r.iter().enumerate() {
            if !(v >= 0.0) {
                return Err(ExpressionError::NegativeExpression { row, col });
            }
            o.push(f(v));
        }
        out.push(o);
    }
    Ok(out)
}

impl ExpressionMatrix {
    pub fn n_patients(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    /// `log2(1 + x)` element-wise.
    pub fn log_transform(&self) -> Result<ExpressionMatrix> {
        if self.transformed {
            return Err(ExpressionError::AlreadyTransformed);
        }
        Ok(ExpressionMatrix {
            values: map_checked(&self.values, log2_1p)?,
            transformed: true,
            ..self.clone()
        })
    }

    /// `2^t − 1` element-wise; entries must be non-negative.
    pub fn inverse_transform(&self) -> Result<ExpressionMatrix> {
        Ok(ExpressionMatrix {
            values: map_checked(&self.values, exp2_m1)?,
            transformed: false,
            ..self.clone()
        })
    }

    /// Columns at `indices`, in that order.
    pub fn select_genes(&self, indices: &[usize]) -> ExpressionMatrix {
        ExpressionMatrix {
            patient_ids: self.patient_ids.clone(),
            genes: indices.iter().map(|&i| self.genes[i].clone()).collect(),
            values: self.values.iter().map(|r| indices.iter().map(|&i| r[i]).collect()).collect(),
            transformed: self.transformed,
        }
    }

    pub fn row_of(&self, patient_id: &str) -> Option<&[f64]> {
        self.patient_ids.iter().position(|p| p == patient_id).map(|i| self.values[i].as_slice())
    }

    /// CSV with header `patient_id,GENE1,...`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["patient_id".to_string()];
        header.extend(self.genes.iter().cloned());
        wtr.write_record(&header).map_err(csv_io)?;
        for (id, row) in self.patient_ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec).map_err(csv_io)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> ExpressionError {
    ExpressionError::Io(std::io::Error::other(e))
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads an expression CSV and reorders columns to `panel` order.
///
/// Extra (non-panel) columns are ignored. Patients with a missing panel value
/// are rejected and reported; the values are raw (`transformed == false`).
pub fn load_expression<R: Read>(reader: R, panel: &GenePanel) -> Result<LoadedExpression> {
    load_matrix(reader, panel, false)
}

/// Like [`load_expression`] for files that already hold `log2(1+x)` values.
pub fn load_transformed_expression<R: Read>(reader: R, panel: &GenePanel) -> Result<LoadedExpression> {
    load_matrix(reader, panel, true)
}

fn load_matrix<R: Read>(reader: R, panel: &GenePanel, transformed: bool) -> Result<LoadedExpression> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| ExpressionError::ParseError { line: 1, message: e.to_string() })?
        .clone();
    if header.get(0).map(str::trim) != Some("patient_id") {
        return Err(ExpressionError::ParseError {
            line: 1,
            message: "first column must be patient_id".into(),
        });
    }
    let columns: HashMap<&str, usize> =
        header.iter().enumerate().skip(1).map(|(i, h)| (h.trim(), i)).collect();
    let mut source = Vec::with_capacity(panel.len());
    for g in panel.entries() {
        match columns.get(g.symbol.as_str()) {
            Some(&c) => source.push(c),
            None => return Err(ExpressionError::MissingGene(g.symbol.clone())),
        }
    }

    let mut patient_ids = Vec::new();
    let mut values = Vec::new();
    let mut rejected = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| ExpressionError::ParseError { line, message: e.to_string() })?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(ExpressionError::ParseError { line, message: "empty patient_id".into() });
        }
        if !seen.insert(id.clone()) {
            return Err(ExpressionError::DuplicatePatient(id));
        }
        let mut row = Vec::with_capacity(source.len());
        let mut missing = None;
        for (g, &c) in source.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            if is_missing(cell) {
                missing = Some(panel.entries()[g].symbol.clone());
                break;
            }
            let v: f64 = cell.trim().parse().map_err(|_| ExpressionError::ParseError {
                line,
                message: format!("cannot parse {cell:?} for gene {}", panel.entries()[g].symbol),
            })?;
            if !v.is_finite() {
                return Err(ExpressionError::ParseError {
                    line,
                    message: format!("non-finite value for gene {}", panel.entries()[g].symbol),
                });
            }
            row.push(v);
        }
        match missing {
            Some(missing_gene) => rejected.push(RejectedPatient { patient_id: id, missing_gene, line }),
            None => {
                patient_ids.push(id);
                values.push(row);
            }
        }
    }
    Ok(LoadedExpression {
        matrix: ExpressionMatrix { patient_ids, genes: panel.symbols(), values, transformed },
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn panel3() -> GenePanel {
        GenePanel::from_symbols(&["ESR1", "ERBB2", "MKI67"]).unwrap()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(log2_1p(0.0), 0.0);
        assert_eq!(log2_1p(1.0), 1.0);
        assert_eq!(log2_1p(3.0), 2.0);
        assert_eq!(exp2_m1(2.0), 3.0);
        assert_eq!(exp2_m1(0.0), 0.0);
    }

    #[test]
    fn negative_entry_is_located() {
        let m = ExpressionMatrix {
            patient_ids: vec!["a".into(), "b".into()],
            genes: vec!["g1".into(), "g2".into()],
            values: vec![vec![1.0, 2.0], vec![3.0, -0.5]],
            transformed: false,
        };
        assert!(matches!(
            m.log_transform(),
            Err(ExpressionError::NegativeExpression { row: 1, col: 1 })
        ));
        assert!(matches!(
            m.inverse_transform(),
            Err(ExpressionError::NegativeExpression { row: 1, col: 1 })
        ));
        let t = ExpressionMatrix { values: vec![vec![0.0, 1.0], vec![2.0, 3.0]], ..m };
        let lt = t.log_transform().unwrap();
        assert!(matches!(lt.log_transform(), Err(ExpressionError::AlreadyTransformed)));
    }

    #[test]
    fn random_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let values: Vec<Vec<f64>> =
            (0..30).map(|_| (0..20).map(|_| rng.random::<f64>() * 1e4).collect()).collect();
        let m = ExpressionMatrix {
            patient_ids: (0..30).map(|i| i.to_string()).collect(),
            genes: (0..20).map(|i| format!("g{i}")).collect(),
            values: values.clone(),
            transformed: false,
        };
        let back = m.log_transform().unwrap().inverse_transform().unwrap();
        let mut max_err: f64 = 0.0;
        for (a, b) in back.values.iter().flatten().zip(values.iter().flatten()) {
            max_err = max_err.max((a - b).abs());
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        assert!(max_err < 1e-9);
    }

    #[test]
    fn load_reorders_to_panel() {
        let csv = "patient_id,MKI67,ESR1,ERBB2\nP1,3,1,2\nP2,6,4,5\n";
        let m = load_expression(csv.as_bytes(), &panel3()).unwrap().matrix;
        assert_eq!(m.genes, vec!["ESR1", "ERBB2", "MKI67"]);
        assert_eq!(m.values, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert!(!m.transformed);
    }

    #[test]
    fn load_ignores_extras_and_rejects_missing() {
        let csv = "patient_id,EXTRA,MKI67,ESR1,ERBB2\nP1,9,3,1,2\nP2,9,NA,4,5\nP3,9,1,,1\n";
        let loaded = load_expression(csv.as_bytes(), &panel3()).unwrap();
        assert_eq!(loaded.matrix.n_genes(), 3);
        assert_eq!(loaded.matrix.patient_ids, vec!["P1"]);
        assert_eq!(loaded.rejected.len(), 2);
        assert_eq!(loaded.rejected[0].missing_gene, "MKI67");
        assert_eq!(loaded.rejected[1].missing_gene, "ESR1");
        assert_eq!(loaded.rejected[1].line, 4);
    }

    #[test]
    fn load_errors() {
        let missing = "patient_id,ESR1,ERBB2\nP1,1,2\n";
        assert!(matches!(
            load_expression(missing.as_bytes(), &panel3()),
            Err(ExpressionError::MissingGene(g)) if g == "MKI67"
        ));
        let dup = "patient_id,ESR1,ERBB2,MKI67\nP1,1,2,3\nP1,1,2,3\n";
        assert!(matches!(
            load_expression(dup.as_bytes(), &panel3()),
            Err(ExpressionError::DuplicatePatient(p)) if p == "P1"
        ));
        let bad = "patient_id,ESR1,ERBB2,MKI67\nP1,1,2,3\nP2,1,x,3\n";
        assert!(matches!(
            load_expression(bad.as_bytes(), &panel3()),
            Err(ExpressionError::ParseError { line: 3, .. })
        ));
    }

    #[test]
    fn default_panel_shape() {
        let p = GenePanel::default_panel();
        assert_eq!(p.len(), 138);
        assert_eq!(p.pam50_indices().len(), 50);
        assert!(p.index_of("ESR1").is_some());
    }

    #[test]
    fn panel_save_load_is_byte_identical() {
        let p = GenePanel::default_panel();
        let text = p.to_json();
        let again = GenePanel::from_json(&text).unwrap();
        assert_eq!(again, p);
        assert_eq!(again.to_json(), text);
        assert_eq!(again.fingerprint(), p.fingerprint());
    }

    #[test]
    fn panel_validation() {
        assert!(matches!(
            GenePanel::from_symbols(&["A", "B", "A"]),
            Err(ExpressionError::DuplicateGene(g)) if g == "A"
        ));
        let many: Vec<GeneEntry> = (0..51)
            .map(|i| GeneEntry { symbol: format!("G{i}"), assays: vec![], pam50: true })
            .collect();
        assert!(matches!(GenePanel::new(many), Err(ExpressionError::TooManyPam50(51))));
    }

    proptest! {
        #[test]
        fn log_transform_preserves_order(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            prop_assume!(a < b);
            prop_assert!(log2_1p(a) < log2_1p(b));
        }

        #[test]
        fn load_is_column_permutation_invariant(seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let genes = ["A", "B", "C", "D", "E"];
            let panel = GenePanel::from_symbols(&genes).unwrap();
            let mut order: Vec<usize> = (0..5).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let mut csv = String::from("patient_id");
            for &i in &order { csv.push(','); csv.push_str(genes[i]); }
            csv.push('\n');
            for p in 0..3 {
                csv.push_str(&format!("P{p}"));
                for &i in &order { csv.push_str(&format!(",{}", p * 10 + i)); }
                csv.push('\n');
            }
            let m = load_expression(csv.as_bytes(), &panel).unwrap().matrix;
            for p in 0..3 {
                let expect: Vec<f64> = (0..5).map(|i| (p * 10 + i) as f64).collect();
                prop_assert_eq!(&m.values[p], &expect);
            }
        }
    }
}
