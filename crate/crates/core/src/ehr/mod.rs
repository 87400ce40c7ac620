//! EHR data layer: CSV ingestion, vocabulary construction, patient
//! assembly with lab recency semantics, multi-hot encoding, cohort
//! selection, patient-level splitting and task-sample construction.

pub mod cohort;
pub mod encode;
pub mod events;
pub mod multihot;
pub mod patient;
pub mod samples;
pub mod split;
pub mod vocab;

pub use cohort::{select_cohorts, Cohort, CohortKind};
pub use encode::{encode_visit, DropCounter, UnknownCodePolicy};
pub use events::{
    load_admissions, load_diagnoses, load_labevents, load_table, AdmissionEvent, DiagnosisEvent,
    LabEvent, Schema, TableRows,
};
pub use multihot::MultiHotVector;
pub use patient::{assemble_patients, PatientRecord, Visit};
pub use samples::{is_heart_failure_code, make_sample, Task, TaskLabel, TaskSample};
pub use split::{split_dataset, DatasetSplit};
pub use vocab::{VocabKind, Vocabulary, MIMIC3_DIAGNOSIS_CODES, MIMIC3_LAB_ITEMS};
