use std::collections::BTreeSet;

use crate::ehr::cohort::Cohort;
use crate::error::{Error, Result};
use crate::log;
use crate::rng::Rng;

/// Patient-level train/validation/test split. Splitting by patient, never
/// by sample, keeps one patient's history from leaking across splits.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn split_of(&self, patient_id: &str) -> Option<&'static str> {
        if self.train.contains(patient_id) {
            Some("train")
        } else if self.val.contains(patient_id) {
            Some("val")
        } else if self.test.contains(patient_id) {
            Some("test")
        } else {
            None
        }
    }
}

pub fn split_dataset(cohort: &Cohort, ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    let (r_train, r_val, r_test) = ratios;
    if r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(Error::Config("split ratios must be non-negative".into()));
    }
    if ((r_train + r_val + r_test) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {}",
            r_train + r_val + r_test
        )));
    }
    let n = cohort.len();
    if n < 3 {
        return Err(Error::Empty(format!(
            "prediction cohort has {n} patients; at least 3 are required to split"
        )));
    }

    let mut ids: Vec<&String> = cohort.patient_ids.iter().collect();
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut ids);

    let n_train = ((n as f64) * r_train).round() as usize;
    let n_train = n_train.min(n);
    let n_val = (((n as f64) * r_val).round() as usize).min(n - n_train);

    let train: BTreeSet<String> = ids[..n_train].iter().map(|s| s.to_string()).collect();
    let val: BTreeSet<String> = ids[n_train..n_train + n_val]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let test: BTreeSet<String> = ids[n_train + n_val..]
        .iter()
        .map(|s| s.to_string())
        .collect();

    if test.is_empty() {
        log::warn("dataset split produced an empty test set");
    }
    if val.is_empty() {
        log::warn("dataset split produced an empty validation set");
    }

    Ok(DatasetSplit {
        train,
        val,
        test,
        seed,
    })
}
