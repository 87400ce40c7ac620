//! Patient assembly: join the three event tables into chronologically
//! ordered visit records.
//!
//! Lab semantics are last-observation-carried-forward on the abnormal
//! flag: at each visit, a lab item is abnormal iff its most recent event
//! at or before the visit's admit time was abnormal. An item never tested
//! (or last tested normal) is normal. Ties on timestamp resolve to the
//! event appearing later in the input.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ehr::events::{AdmissionEvent, DiagnosisEvent, LabEvent};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Visit {
    pub visit_id: String,
    pub admit_time: i64,
    pub diag_codes: BTreeSet<String>,
    pub lab_abnormal: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    /// Ascending by (admit_time, visit_id).
    pub visits: Vec<Visit>,
    /// Raw lab-event count for this patient, before any recency collapse.
    pub lab_event_count: usize,
}

impl PatientRecord {
    pub fn num_visits(&self) -> usize {
        self.visits.len()
    }
}

pub fn assemble_patients(
    admissions: &[AdmissionEvent],
    diagnoses: &[DiagnosisEvent],
    labevents: &[LabEvent],
) -> Result<Vec<PatientRecord>> {
    // patient -> visit -> admit_time, with duplicate detection.
    let mut visit_times: HashMap<(&str, &str), i64> = HashMap::new();
    let mut per_patient: BTreeMap<&str, Vec<&AdmissionEvent>> = BTreeMap::new();
    for adm in admissions {
        if visit_times
            .insert((&adm.patient_id, &adm.visit_id), adm.admit_time)
            .is_some()
        {
            return Err(Error::Invalid(format!(
                "duplicate admission for patient `{}` visit `{}`",
                adm.patient_id, adm.visit_id
            )));
        }
        per_patient.entry(&adm.patient_id).or_default().push(adm);
    }

    // Group diagnosis codes per visit, verifying referential integrity.
    let mut diag_by_visit: HashMap<(&str, &str), BTreeSet<String>> = HashMap::new();
    for (idx, d) in diagnoses.iter().enumerate() {
        if !visit_times.contains_key(&(d.patient_id.as_str(), d.visit_id.as_str())) {
            return Err(Error::UnknownVisit {
                kind: "diagnosis",
                event_id: format!("#{idx}"),
                patient_id: d.patient_id.clone(),
                visit_id: d.visit_id.clone(),
            });
        }
        diag_by_visit
            .entry((&d.patient_id, &d.visit_id))
            .or_default()
            .insert(d.icd_code.clone());
    }

    // Group lab events per patient, verifying referential integrity.
    let mut labs_by_patient: HashMap<&str, Vec<&LabEvent>> = HashMap::new();
    for (idx, l) in labevents.iter().enumerate() {
        if !visit_times.contains_key(&(l.patient_id.as_str(), l.visit_id.as_str())) {
            return Err(Error::UnknownVisit {
                kind: "lab",
                event_id: format!("#{idx}"),
                patient_id: l.patient_id.clone(),
                visit_id: l.visit_id.clone(),
            });
        }
        labs_by_patient.entry(&l.patient_id).or_default().push(l);
    }

    let mut patients = Vec::with_capacity(per_patient.len());
    for (patient_id, adms) in per_patient {
        let mut adms = adms;
        adms.sort_by(|a, b| {
            a.admit_time
                .cmp(&b.admit_time)
                .then_with(|| a.visit_id.cmp(&b.visit_id))
        });

        // Stable sort keeps input order among equal timestamps, so the
        // last qualifying event wins ties.
        let mut labs = labs_by_patient.remove(patient_id).unwrap_or_default();
        labs.sort_by_key(|l| l.timestamp);
        let lab_event_count = labs.len();

        let mut visits = Vec::with_capacity(adms.len());
        let mut state: BTreeMap<&str, bool> = BTreeMap::new();
        let mut cursor = 0usize;
        for adm in adms {
            while cursor < labs.len() && labs[cursor].timestamp <= adm.admit_time {
                state.insert(&labs[cursor].item_code, labs[cursor].abnormal);
                cursor += 1;
            }
            let lab_abnormal: BTreeSet<String> = state
                .iter()
                .filter(|&(_, &abn)| abn)
                .map(|(&item, _)| item.to_string())
                .collect();
            let diag_codes = diag_by_visit
                .remove(&(patient_id, adm.visit_id.as_str()))
                .unwrap_or_default();
            visits.push(Visit {
                visit_id: adm.visit_id.clone(),
                admit_time: adm.admit_time,
                diag_codes,
                lab_abnormal,
            });
        }
        patients.push(PatientRecord {
            patient_id: patient_id.to_string(),
            visits,
            lab_event_count,
        });
    }
    Ok(patients)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adm(p: &str, v: &str, t: i64) -> AdmissionEvent {
        AdmissionEvent {
            patient_id: p.into(),
            visit_id: v.into(),
            admit_time: t,
        }
    }

    fn diag(p: &str, v: &str, code: &str) -> DiagnosisEvent {
        DiagnosisEvent {
            patient_id: p.into(),
            visit_id: v.into(),
            icd_code: code.into(),
        }
    }

    fn lab(p: &str, v: &str, item: &str, abnormal: bool, ts: i64) -> LabEvent {
        LabEvent {
            patient_id: p.into(),
            visit_id: v.into(),
            item_code: item.into(),
            abnormal,
            timestamp: ts,
        }
    }

    #[test]
    fn out_of_order_admissions_are_sorted() {
        let admissions = vec![adm("p1", "v2", 200), adm("p1", "v1", 100)];
        let diagnoses = vec![diag("p1", "v1", "a"), diag("p1", "v2", "b")];
        let patients = assemble_patients(&admissions, &diagnoses, &[]).unwrap();
        assert_eq!(patients.len(), 1);
        let visits = &patients[0].visits;
        assert_eq!(visits[0].visit_id, "v1");
        assert_eq!(visits[1].visit_id, "v2");
    }

    #[test]
    fn equal_admit_times_break_ties_by_visit_id() {
        let admissions = vec![adm("p1", "vb", 100), adm("p1", "va", 100)];
        let patients = assemble_patients(&admissions, &[], &[]).unwrap();
        assert_eq!(patients[0].visits[0].visit_id, "va");
        assert_eq!(patients[0].visits[1].visit_id, "vb");
    }

    #[test]
    fn most_recent_lab_flag_carries_forward() {
        // Abnormal before visit 1, re-tested normal before visit 2.
        let admissions = vec![adm("p1", "v1", 100), adm("p1", "v2", 200)];
        let labevents = vec![
            lab("p1", "v1", "item", true, 90),
            lab("p1", "v2", "item", false, 150),
        ];
        let patients = assemble_patients(&admissions, &[], &labevents).unwrap();
        let visits = &patients[0].visits;
        assert!(visits[0].lab_abnormal.contains("item"));
        assert!(!visits[1].lab_abnormal.contains("item"));
    }

    #[test]
    fn event_at_admit_time_counts() {
        let admissions = vec![adm("p1", "v1", 100)];
        let labevents = vec![lab("p1", "v1", "item", true, 100)];
        let patients = assemble_patients(&admissions, &[], &labevents).unwrap();
        assert!(patients[0].visits[0].lab_abnormal.contains("item"));
    }

    #[test]
    fn no_lab_events_means_all_normal() {
        let admissions = vec![adm("p1", "v1", 100), adm("p1", "v2", 200)];
        let patients = assemble_patients(&admissions, &[], &[]).unwrap();
        assert!(patients[0].visits.iter().all(|v| v.lab_abnormal.is_empty()));
        assert_eq!(patients[0].lab_event_count, 0);
    }

    #[test]
    fn unknown_visit_reference_is_an_error() {
        let admissions = vec![adm("p1", "v1", 100)];
        let diagnoses = vec![diag("p1", "v9", "x")];
        let err = assemble_patients(&admissions, &diagnoses, &[]).unwrap_err();
        assert!(matches!(err, Error::UnknownVisit { .. }));
        assert!(err.to_string().contains("v9"));

        let labevents = vec![lab("p2", "v1", "i", true, 5)];
        let err = assemble_patients(&admissions, &[], &labevents).unwrap_err();
        assert!(matches!(err, Error::UnknownVisit { .. }));
    }

    #[test]
    fn duplicate_visit_is_rejected() {
        let admissions = vec![adm("p1", "v1", 100), adm("p1", "v1", 200)];
        assert!(assemble_patients(&admissions, &[], &[]).is_err());
    }

    #[test]
    fn timestamp_tie_takes_later_input_event() {
        let admissions = vec![adm("p1", "v1", 100)];
        let labevents = vec![
            lab("p1", "v1", "item", true, 50),
            lab("p1", "v1", "item", false, 50),
        ];
        let patients = assemble_patients(&admissions, &[], &labevents).unwrap();
        assert!(!patients[0].visits[0].lab_abnormal.contains("item"));
    }
}
