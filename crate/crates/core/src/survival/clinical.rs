use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SurvivalError};

pub const CLINICAL_HEADER: [&str; 11] = [
    "patient_id",
    "time_months",
    "event",
    "grade",
    "size_mm",
    "age_years",
    "ln_positive",
    "er",
    "pr",
    "her2",
    "ki67_percent",
];

/// One row of the clinical CSV. Optional fields were `NA` (or empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalRecord {
    pub patient_id: String,
    pub time: f64,
    pub event: bool,
    pub grade: Option<u8>,
    pub size_mm: Option<f64>,
    pub age_years: Option<f64>,
    pub ln_positive: Option<bool>,
    pub er: Option<bool>,
    pub pr: Option<bool>,
    pub her2: Option<bool>,
    pub ki67_percent: Option<f64>,
}

fn is_na(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

fn parse_status(s: &str) -> Option<Option<bool>> {
    match s.to_ascii_lowercase().as_str() {
        "pos" | "positive" | "1" | "true" => Some(Some(true)),
        "neg" | "negative" | "0" | "false" => Some(Some(false)),
        _ if is_na(s) => Some(None),
        _ => None,
    }
}

fn parse_real(s: &str, line: usize, field: &str, lo: f64, hi: f64) -> Result<Option<f64>> {
    if is_na(s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= lo && v <= hi => Ok(Some(v)),
        _ => Err(SurvivalError::ParseError { line, message: format!("invalid {field} '{s}'") }),
    }
}

/// Reads the clinical CSV; columns must appear in the canonical order.
pub fn read_clinical<R: Read>(reader: R) -> Result<Vec<ClinicalRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| SurvivalError::ParseError { line: 1, message: e.to_string() })?;
    if header.iter().ne(CLINICAL_HEADER.iter().copied()) {
        return Err(SurvivalError::ParseError {
            line: 1,
            message: format!("expected header {}", CLINICAL_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| SurvivalError::ParseError { line, message: e.to_string() })?;
        let bad = |field: &str, v: &str| SurvivalError::ParseError { line, message: format!("invalid {field} '{v}'") };
        let patient_id = row[0].to_string();
        if patient_id.is_empty() {
            return Err(SurvivalError::ParseError { line, message: "empty patient_id".into() });
        }
        let time = match row[1].parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => t,
            _ => return Err(bad("time_months", &row[1])),
        };
        let event = match &row[2] {
            "1" => true,
            "0" => false,
            v => return Err(bad("event", v)),
        };
        let grade = match &row[3] {
            v if is_na(v) => None,
            v => match v.parse::<u8>() {
                Ok(g @ 1..=3) => Some(g),
                _ => return Err(bad("grade", v)),
            },
        };
        let status = |idx: usize, field: &str| parse_status(&row[idx]).ok_or_else(|| bad(field, &row[idx]));
        out.push(ClinicalRecord {
            patient_id,
            time,
            event,
            grade,
            size_mm: parse_real(&row[4], line, "size_mm", 0.0, f64::INFINITY)?,
            age_years: parse_real(&row[5], line, "age_years", 0.0, f64::INFINITY)?,
            ln_positive: status(6, "ln_positive")?,
            er: status(7, "er")?,
            pr: status(8, "pr")?,
            her2: status(9, "her2")?,
            ki67_percent: parse_real(&row[10], line, "ki67_percent", 0.0, 100.0)?,
        });
    }
    Ok(out)
}

pub fn load_clinical(path: impl AsRef<Path>) -> Result<Vec<ClinicalRecord>> {
    read_clinical(File::open(path)?)
}

/// Clinical parameters with fixed risk-group cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parameter {
    Grade,
    Size,
    Age,
    LymphNode,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Grade, Parameter::Size, Parameter::Age, Parameter::LymphNode];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Grade => "Tumour Grade",
            Parameter::Size => "Tumour Size",
            Parameter::Age => "Age",
            Parameter::LymphNode => "LN status",
        }
    }

    /// Indicator group first, reference group second.
    pub fn cutoff(self) -> &'static str {
        match self {
            Parameter::Grade => "1 & 2 vs. 3",
            Parameter::Size => ">20 vs. <=20 (mm)",
            Parameter::Age => ">55 vs. <=55",
            Parameter::LymphNode => "pos. vs. neg.",
        }
    }

    fn indicator(self, r: &ClinicalRecord) -> Option<bool> {
        match self {
            Parameter::Grade => r.grade.map(|g| g <= 2),
            Parameter::Size => r.size_mm.map(|s| s > 20.0),
            Parameter::Age => r.age_years.map(|a| a > 55.0),
            Parameter::LymphNode => r.ln_positive,
        }
    }
}

/// Record indices split by a parameter's cutoff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dichotomy {
    pub parameter: Parameter,
    /// Per-record membership of the indicator group.
    pub indicator: Vec<bool>,
    pub indicator_group: Vec<usize>,
    pub reference_group: Vec<usize>,
}

impl Dichotomy {
    pub fn design_column(&self) -> Vec<f64> {
        self.indicator.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

pub fn dichotomize(records: &[ClinicalRecord], parameter: Parameter) -> Result<Dichotomy> {
    let mut d = Dichotomy { parameter, indicator: vec![], indicator_group: vec![], reference_group: vec![] };
    for (i, r) in records.iter().enumerate() {
        let b = parameter.indicator(r).ok_or_else(|| SurvivalError::MissingValue {
            patient_id: r.patient_id.clone(),
            parameter: parameter.name().to_string(),
        })?;
        d.indicator.push(b);
        if b {
            d.indicator_group.push(i);
        } else {
            d.reference_group.push(i);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "patient_id,time_months,event,grade,size_mm,age_years,ln_positive,er,pr,her2,ki67_percent
P1,12.5,1,3,20,55,pos,pos,neg,neg,14
P2,40,0,1,20.5,55.1,neg,pos,pos,NA,NA
P3,3,1,NA,8,70,NA,neg,neg,pos,
";

    #[test]
    fn parses_rows() {
        let r = read_clinical(CSV.as_bytes()).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].grade, Some(3));
        assert_eq!(r[1].her2, None);
        assert_eq!(r[2].ki67_percent, None);
        assert!(!r[1].event);
    }

    #[test]
    fn boundaries_fall_low() {
        let r = read_clinical(CSV.as_bytes()).unwrap();
        let size = dichotomize(&r, Parameter::Size).unwrap();
        assert_eq!(size.indicator_group, vec![1]);
        assert_eq!(size.reference_group, vec![0, 2]);
        let age = dichotomize(&r, Parameter::Age).unwrap();
        assert_eq!(age.indicator, vec![false, true, true]);
    }

    #[test]
    fn missing_value_names_patient() {
        let r = read_clinical(CSV.as_bytes()).unwrap();
        match dichotomize(&r, Parameter::Grade) {
            Err(SurvivalError::MissingValue { patient_id, .. }) => assert_eq!(patient_id, "P3"),
            other => panic!("{other:?}"),
        }
        let empty = dichotomize(&r[..2], Parameter::LymphNode).unwrap();
        assert_eq!(empty.indicator_group, vec![0]);
        let one_side = dichotomize(&r[..1], Parameter::Size).unwrap();
        assert!(one_side.indicator_group.is_empty());
    }

    #[test]
    fn rejects_bad_values() {
        for bad in ["P,0,1,1,1,1,pos,pos,pos,pos,1", "P,1,2,1,1,1,pos,pos,pos,pos,1", "P,1,1,4,1,1,pos,pos,pos,pos,1"] {
            let text = format!("{}\n{bad}\n", CLINICAL_HEADER.join(","));
            assert!(matches!(read_clinical(text.as_bytes()), Err(SurvivalError::ParseError { line: 2, .. })));
        }
        assert!(read_clinical("a,b\n".as_bytes()).is_err());
    }
}
