//! Raw event rows loaded from the three CSV tables.
//!
//! Expected headers (exact, in order):
//!   admissions.csv: patient_id,visit_id,admit_time
//!   diagnoses.csv:  patient_id,visit_id,icd_code
//!   labevents.csv:  patient_id,visit_id,item_code,abnormal,timestamp
//!
//! Row numbers in errors are 1-based data rows, the header excluded.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissionEvent {
    pub patient_id: String,
    pub visit_id: String,
    pub admit_time: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosisEvent {
    pub patient_id: String,
    pub visit_id: String,
    pub icd_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabEvent {
    pub patient_id: String,
    pub visit_id: String,
    pub item_code: String,
    pub abnormal: bool,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    Admissions,
    Diagnoses,
    LabEvents,
}

impl Schema {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::Admissions => &["patient_id", "visit_id", "admit_time"],
            Schema::Diagnoses => &["patient_id", "visit_id", "icd_code"],
            Schema::LabEvents => &[
                "patient_id",
                "visit_id",
                "item_code",
                "abnormal",
                "timestamp",
            ],
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Schema::Admissions => "admissions.csv",
            Schema::Diagnoses => "diagnoses.csv",
            Schema::LabEvents => "labevents.csv",
        }
    }
}

fn open_reader(path: &Path, schema: Schema) -> Result<csv::Reader<std::fs::File>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Invalid(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?
        .clone();
    let expected = schema.columns();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        for col in expected {
            if !got.contains(col) {
                return Err(Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: (*col).to_string(),
                });
            }
        }
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            expected: expected.join(","),
            got: got.join(","),
        });
    }
    Ok(reader)
}

fn bad_row(path: &Path, row: usize, msg: impl Into<String>) -> Error {
    Error::BadRow {
        path: path.to_path_buf(),
        row,
        msg: msg.into(),
    }
}

fn field<'a>(
    path: &Path,
    row: usize,
    record: &'a csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'a str> {
    let value = record
        .get(idx)
        .ok_or_else(|| bad_row(path, row, format!("missing {name}")))?;
    if value.is_empty() {
        return Err(bad_row(path, row, format!("missing {name}")));
    }
    Ok(value)
}

fn parse_i64(path: &Path, row: usize, value: &str, name: &str) -> Result<i64> {
    value
        .parse::<i64>()
        .map_err(|_| bad_row(path, row, format!("unparseable {name} `{value}`")))
}

fn rows(path: &Path, schema: Schema) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = open_reader(path, schema)?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| bad_row(path, row, e.to_string()))?;
        out.push((row, record));
    }
    Ok(out)
}

pub fn load_admissions(path: impl AsRef<Path>) -> Result<Vec<AdmissionEvent>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (row, record) in rows(path, Schema::Admissions)? {
        out.push(AdmissionEvent {
            patient_id: field(path, row, &record, 0, "patient_id")?.to_string(),
            visit_id: field(path, row, &record, 1, "visit_id")?.to_string(),
            admit_time: parse_i64(
                path,
                row,
                field(path, row, &record, 2, "admit_time")?,
                "admit_time",
            )?,
        });
    }
    Ok(out)
}

pub fn load_diagnoses(path: impl AsRef<Path>) -> Result<Vec<DiagnosisEvent>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (row, record) in rows(path, Schema::Diagnoses)? {
        out.push(DiagnosisEvent {
            patient_id: field(path, row, &record, 0, "patient_id")?.to_string(),
            visit_id: field(path, row, &record, 1, "visit_id")?.to_string(),
            icd_code: field(path, row, &record, 2, "icd_code")?.to_string(),
        });
    }
    Ok(out)
}

/// Rows of one table, tagged by schema.
#[derive(Debug, Clone)]
pub enum TableRows {
    Admissions(Vec<AdmissionEvent>),
    Diagnoses(Vec<DiagnosisEvent>),
    LabEvents(Vec<LabEvent>),
}

impl TableRows {
    pub fn len(&self) -> usize {
        match self {
            TableRows::Admissions(v) => v.len(),
            TableRows::Diagnoses(v) => v.len(),
            TableRows::LabEvents(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Schema-dispatched loader over the typed table readers.
pub fn load_table(path: impl AsRef<Path>, schema: Schema) -> Result<TableRows> {
    Ok(match schema {
        Schema::Admissions => TableRows::Admissions(load_admissions(path)?),
        Schema::Diagnoses => TableRows::Diagnoses(load_diagnoses(path)?),
        Schema::LabEvents => TableRows::LabEvents(load_labevents(path)?),
    })
}

pub fn load_labevents(path: impl AsRef<Path>) -> Result<Vec<LabEvent>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (row, record) in rows(path, Schema::LabEvents)? {
        let abnormal = match field(path, row, &record, 3, "abnormal")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(bad_row(
                    path,
                    row,
                    format!("abnormal must be 0 or 1, got `{other}`"),
                ));
            }
        };
        out.push(LabEvent {
            patient_id: field(path, row, &record, 0, "patient_id")?.to_string(),
            visit_id: field(path, row, &record, 1, "visit_id")?.to_string(),
            item_code: field(path, row, &record, 2, "item_code")?.to_string(),
            abnormal,
            timestamp: parse_i64(
                path,
                row,
                field(path, row, &record, 4, "timestamp")?,
                "timestamp",
            )?,
        });
    }
    Ok(out)
}
