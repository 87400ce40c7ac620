use serde::{Deserialize, Serialize};

use crate::ehr::encode::{encode_visit, DropCounter, UnknownCodePolicy};
use crate::ehr::multihot::MultiHotVector;
use crate::ehr::patient::PatientRecord;
use crate::ehr::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dg,
    Hf,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Dg => "dg",
            Task::Hf => "hf",
        }
    }

    pub fn output_dim(self, n_diag_codes: usize) -> usize {
        match self {
            Task::Dg => n_diag_codes,
            Task::Hf => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskLabel {
    Dg(MultiHotVector),
    Hf(bool),
}

/// One supervised sample per patient: the full visit history up to the
/// last visit as input, the last visit as label.
#[derive(Debug, Clone)]
pub struct TaskSample {
    pub patient_id: String,
    /// (x_diag, x_lab) per history visit; length is T - 1.
    pub history: Vec<(MultiHotVector, MultiHotVector)>,
    pub label: TaskLabel,
}

/// ICD-9 heart-failure prefix rule: the code portion before any dot must
/// start with 428. Catches both "428.22" and undotted forms like "4280".
pub fn is_heart_failure_code(code: &str) -> bool {
    let stem = code.split('.').next().unwrap_or("");
    stem.starts_with("428")
}

pub fn make_sample(
    patient: &PatientRecord,
    task: Task,
    diag_vocab: &Vocabulary,
    lab_vocab: &Vocabulary,
    policy: UnknownCodePolicy,
    counter: &mut DropCounter,
) -> Result<TaskSample> {
    let t = patient.num_visits();
    if t < 2 {
        return Err(Error::Invalid(format!(
            "patient `{}` has {t} visit(s); samples need at least 2",
            patient.patient_id
        )));
    }
    let mut history = Vec::with_capacity(t - 1);
    for visit in &patient.visits[..t - 1] {
        history.push(encode_visit(visit, diag_vocab, lab_vocab, policy, counter)?);
    }
    let last = &patient.visits[t - 1];
    let label = match task {
        Task::Dg => {
            let (x_diag, _) = encode_visit(last, diag_vocab, lab_vocab, policy, counter)?;
            TaskLabel::Dg(x_diag)
        }
        Task::Hf => TaskLabel::Hf(last.diag_codes.iter().any(|c| is_heart_failure_code(c))),
    };
    Ok(TaskSample {
        patient_id: patient.patient_id.clone(),
        history,
        label,
    })
}
