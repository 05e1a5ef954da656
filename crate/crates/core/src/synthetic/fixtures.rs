//! On-disk fixture datasets in the formats the command-line pipeline reads.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{block_blobs, gene_symbol, patient_id, regression_cohort, RegressionTask};
use crate::expression::{ExpressionMatrix, GeneEntry, GenePanel};
use crate::features::EXTENSION;
use crate::subtype::Subtype;
use crate::survival::CLINICAL_HEADER;

fn invalid(e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e.to_string())
}

/// Panel over `gene_symbol(0..n)` with the first `pam50` genes flagged.
pub fn synthetic_panel(n: usize, pam50: usize) -> GenePanel {
    GenePanel::new(
        (0..n)
            .map(|g| GeneEntry { symbol: gene_symbol(g), assays: vec![], pam50: g < pam50 })
            .collect(),
    )
    .expect("unique symbols")
}

fn write_matrix(path: &Path, m: &ExpressionMatrix) -> io::Result<()> {
    m.write_csv(fs::File::create(path)?).map_err(invalid)
}

#[derive(Debug, Clone)]
pub struct RegressionFixture {
    pub panel: PathBuf,
    pub train_features: PathBuf,
    pub test_features: PathBuf,
    /// `log2(1+x)` scale.
    pub train_expression: PathBuf,
    pub test_expression: PathBuf,
}

/// Writes a [`regression_cohort`] as `.h2rf` directories and expression
/// CSVs. The first `test_fraction` of patients form the test split.
pub fn write_regression_fixture(dir: &Path, task: &RegressionTask, test_fraction: f64) -> io::Result<RegressionFixture> {
    let cohort = regression_cohort(task);
    let n_test = (task.n_patients as f64 * test_fraction).round() as usize;
    let out = RegressionFixture {
        panel: dir.join("panel.json"),
        train_features: dir.join("train_features"),
        test_features: dir.join("test_features"),
        train_expression: dir.join("train_expression.csv"),
        test_expression: dir.join("test_expression.csv"),
    };
    fs::create_dir_all(&out.train_features)?;
    fs::create_dir_all(&out.test_features)?;
    synthetic_panel(task.n_genes, task.n_genes / 2).save(&out.panel).map_err(invalid)?;
    for (i, set) in cohort.patches.iter().enumerate() {
        let d = if i < n_test { &out.test_features } else { &out.train_features };
        set.save(d.join(format!("{}.{EXTENSION}", set.patient_id))).map_err(invalid)?;
    }
    let split = |range: std::ops::Range<usize>| ExpressionMatrix {
        patient_ids: cohort.expression.patient_ids[range.clone()].to_vec(),
        genes: cohort.expression.genes.clone(),
        values: cohort.expression.values[range].to_vec(),
        transformed: true,
    };
    write_matrix(&out.test_expression, &split(0..n_test))?;
    write_matrix(&out.train_expression, &split(n_test..task.n_patients))?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SubtypeFixture {
    pub panel: PathBuf,
    /// `log2(1+x)` scale.
    pub train_expression: PathBuf,
    pub train_labels: PathBuf,
    pub query_expression: PathBuf,
    pub query_labels: PathBuf,
}

fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "patient_id,subtype")?;
    for (id, &l) in ids.iter().zip(labels) {
        writeln!(f, "{id},{}", Subtype::from_index(l))?;
    }
    f.flush()
}

/// Four-class block blobs over 50 PAM50-flagged genes, 50 samples per class
/// in both the training and the query set.
pub fn write_subtype_fixture(dir: &Path, seed: u64) -> io::Result<SubtypeFixture> {
    const GENES: usize = 50;
    fs::create_dir_all(dir)?;
    let out = SubtypeFixture {
        panel: dir.join("panel.json"),
        train_expression: dir.join("train_expression.csv"),
        train_labels: dir.join("train_labels.csv"),
        query_expression: dir.join("query_expression.csv"),
        query_labels: dir.join("query_labels.csv"),
    };
    synthetic_panel(GENES, GENES).save(&out.panel).map_err(invalid)?;
    for (expr, labels, s, prefix) in [
        (&out.train_expression, &out.train_labels, seed, "T"),
        (&out.query_expression, &out.query_labels, seed + 1, "Q"),
    ] {
        let b = block_blobs(4, 50, 12, GENES, 4.0, 0.5, s);
        let ids: Vec<String> = (0..b.x.len()).map(|i| format!("{prefix}{}", patient_id(i))).collect();
        let m = ExpressionMatrix {
            patient_ids: ids.clone(),
            genes: (0..GENES).map(gene_symbol).collect(),
            values: b.x,
            transformed: true,
        };
        write_matrix(expr, &m)?;
        write_labels(labels, &ids, &b.labels)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SurvivalFixture {
    pub clinical: PathBuf,
    /// `patient_id,subtype` calls covering every clinical patient.
    pub subtypes: PathBuf,
}

fn pos_neg(v: bool) -> &'static str {
    if v {
        "pos"
    } else {
        "neg"
    }
}

/// Clinical cohort whose hazard rises with LumB, grade 3, size, age and
/// nodal status. With `events == false` every patient is censored.
pub fn write_survival_fixture(dir: &Path, n: usize, seed: u64, events: bool) -> io::Result<SurvivalFixture> {
    fs::create_dir_all(dir)?;
    let out = SurvivalFixture { clinical: dir.join("clinical.csv"), subtypes: dir.join("subtypes.csv") };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clinical = io::BufWriter::new(fs::File::create(&out.clinical)?);
    let mut calls = io::BufWriter::new(fs::File::create(&out.subtypes)?);
    writeln!(clinical, "{}", CLINICAL_HEADER.join(","))?;
    writeln!(calls, "patient_id,subtype")?;
    let censor = Exp::new(1.0 / 150.0).expect("positive rate");
    for i in 0..n {
        let u: f64 = rng.random();
        let subtype = if u < 0.6 {
            Subtype::LumA
        } else if u < 0.85 {
            Subtype::LumB
        } else if u < 0.95 {
            Subtype::Basal
        } else {
            Subtype::Her2
        };
        let grade: u8 = if rng.random::<f64>() < 0.8 { rng.random_range(1..=2) } else { 3 };
        let size: f64 = rng.random_range(5.0..50.0);
        let age: f64 = rng.random_range(35.0..85.0);
        let ln = rng.random::<f64>() < 0.4;
        let lp = 0.6 * f64::from(u8::from(subtype == Subtype::LumB))
            + 0.5 * f64::from(u8::from(grade == 3))
            + 0.4 * f64::from(u8::from(size > 20.0))
            + 0.3 * f64::from(u8::from(age > 55.0))
            + 0.5 * f64::from(u8::from(ln));
        let t = Exp::new(0.01 * f64::exp(lp)).expect("positive rate").sample(&mut rng);
        let c: f64 = censor.sample(&mut rng);
        let c = c.min(180.0);
        let (time, event) = if events { (t.min(c), t <= c) } else { (c, false) };
        let id = patient_id(i);
        writeln!(
            clinical,
            "{id},{:.2},{},{grade},{size:.1},{age:.1},{},{},{},{},{:.1}",
            time.max(0.01),
            u8::from(event),
            pos_neg(ln),
            pos_neg(rng.random::<f64>() < 0.8),
            pos_neg(rng.random::<f64>() < 0.7),
            pos_neg(rng.random::<f64>() < 0.15),
            rng.random_range(0.0..100.0),
        )?;
        writeln!(calls, "{id},{subtype}")?;
    }
    clinical.flush()?;
    calls.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expression::load_transformed_expression;
    use crate::features::feature_files;
    use crate::survival::load_clinical;

    #[test]
    fn regression_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let task = RegressionTask { n_patients: 10, patches_per_patient: 3, n_features: 8, n_genes: 4, ..Default::default() };
        let fx = write_regression_fixture(dir.path(), &task, 0.2).unwrap();
        assert_eq!(feature_files(&fx.test_features).unwrap().len(), 2);
        assert_eq!(feature_files(&fx.train_features).unwrap().len(), 8);
        let panel = GenePanel::load(&fx.panel).unwrap();
        assert_eq!(panel.pam50_indices(), vec![0, 1]);
        let m = load_transformed_expression(fs::File::open(&fx.train_expression).unwrap(), &panel).unwrap();
        assert_eq!(m.matrix.values, regression_cohort(&task).expression.values[2..]);
    }

    #[test]
    fn survival_fixture_parses() {
        let dir = tempfile::tempdir().unwrap();
        let fx = write_survival_fixture(dir.path(), 50, 3, true).unwrap();
        let r = load_clinical(&fx.clinical).unwrap();
        assert_eq!(r.len(), 50);
        assert!(r.iter().any(|c| c.event));
        let fx = write_survival_fixture(dir.path(), 20, 3, false).unwrap();
        assert!(load_clinical(&fx.clinical).unwrap().iter().all(|c| !c.event));
    }
}
