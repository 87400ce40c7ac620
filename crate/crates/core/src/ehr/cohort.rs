use std::collections::BTreeSet;

use crate::ehr::patient::PatientRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CohortKind {
    Pretrain,
    Prediction,
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub kind: CohortKind,
    pub patient_ids: BTreeSet<String>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patient_ids.is_empty()
    }

    pub fn contains(&self, patient_id: &str) -> bool {
        self.patient_ids.contains(patient_id)
    }
}

/// Cohort selection.
///
/// Prediction: at least two visits and no visit with missing diagnosis
/// codes. Pretraining: at least one lab event, regardless of visit count —
/// this is where single-visit patients contribute.
pub fn select_cohorts(patients: &[PatientRecord]) -> (Cohort, Cohort) {
    let mut pretrain = BTreeSet::new();
    let mut prediction = BTreeSet::new();
    for p in patients {
        if p.lab_event_count > 0 {
            pretrain.insert(p.patient_id.clone());
        }
        if p.num_visits() >= 2 && p.visits.iter().all(|v| !v.diag_codes.is_empty()) {
            prediction.insert(p.patient_id.clone());
        }
    }
    (
        Cohort {
            kind: CohortKind::Pretrain,
            patient_ids: pretrain,
        },
        Cohort {
            kind: CohortKind::Prediction,
            patient_ids: prediction,
        },
    )
}
