//! Synthetic EHR generator with a planted generative process.
//!
//! Each patient draws a latent disease subset of fixed size. Every disease
//! implies a fixed random subset of lab items; a visit's lab observations
//! are that union with independent per-item flip noise. Observed diagnosis
//! codes are a noisy view of the latent set: codes appear with a base
//! observation rate, persist into the next visit with a configured
//! probability, latent codes can surface later, and spurious codes arrive
//! at a small noise rate. The planted parameters are returned so an exact
//! posterior predictor can be computed as a performance ceiling.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::ehr::events::{AdmissionEvent, DiagnosisEvent, LabEvent};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub use oracle::BayesOracle;

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub n_diag_codes: usize,
    pub n_lab_items: usize,
    /// Exact fraction of patients generated with a single visit.
    pub single_visit_fraction: f64,
    pub min_visits: usize,
    pub max_visits: usize,
    /// Latent diseases drawn per patient (uniform over subsets of this size).
    pub diseases_per_patient: usize,
    /// Lab items implied by each disease.
    pub labs_per_disease: usize,
    /// When set, disease lab subsets are drawn without reuse across
    /// diseases, making the lab pattern uniquely identify the disease set.
    pub distinct_disease_labs: bool,
    /// Per-item probability that a lab observation is flipped.
    pub lab_flip_noise: f64,
    /// Probability that an observed latent code persists into the next visit.
    pub persistence: f64,
    /// Persistence applied to spurious (non-latent) codes.
    pub noise_persistence: f64,
    /// Probability that a latent code is observed at the first visit.
    pub obs_rate: f64,
    /// Probability that a so-far-unobserved latent code surfaces at a later visit.
    pub new_code_rate: f64,
    /// Per-code probability of a spurious diagnosis at any visit.
    pub noise_code_rate: f64,
    /// Exact fraction of patients generated without any lab events.
    pub lab_missing_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 1000,
            n_diag_codes: 40,
            n_lab_items: 50,
            single_visit_fraction: 0.6,
            min_visits: 2,
            max_visits: 4,
            diseases_per_patient: 3,
            labs_per_disease: 3,
            distinct_disease_labs: false,
            lab_flip_noise: 0.1,
            persistence: 0.7,
            noise_persistence: 0.1,
            obs_rate: 0.8,
            new_code_rate: 0.3,
            noise_code_rate: 0.02,
            lab_missing_fraction: 0.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients == 0 {
            return Err(Error::Config("n_patients must be positive".into()));
        }
        if self.n_diag_codes == 0 || self.n_diag_codes > 4000 {
            return Err(Error::Config(format!(
                "n_diag_codes must be in [1, 4000], got {}",
                self.n_diag_codes
            )));
        }
        if self.n_lab_items == 0 {
            return Err(Error::Config("n_lab_items must be positive".into()));
        }
        for (name, p) in [
            ("single_visit_fraction", self.single_visit_fraction),
            ("lab_flip_noise", self.lab_flip_noise),
            ("persistence", self.persistence),
            ("noise_persistence", self.noise_persistence),
            ("obs_rate", self.obs_rate),
            ("new_code_rate", self.new_code_rate),
            ("noise_code_rate", self.noise_code_rate),
            ("lab_missing_fraction", self.lab_missing_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.min_visits < 2 || self.max_visits < self.min_visits {
            return Err(Error::Config(format!(
                "need 2 <= min_visits <= max_visits, got {}..{}",
                self.min_visits, self.max_visits
            )));
        }
        if self.diseases_per_patient == 0 || self.diseases_per_patient > self.n_diag_codes {
            return Err(Error::Config(format!(
                "diseases_per_patient must be in [1, {}], got {}",
                self.n_diag_codes, self.diseases_per_patient
            )));
        }
        if self.labs_per_disease == 0 || self.labs_per_disease > self.n_lab_items {
            return Err(Error::Config(format!(
                "labs_per_disease must be in [1, {}], got {}",
                self.n_lab_items, self.labs_per_disease
            )));
        }
        if self.distinct_disease_labs
            && self.n_diag_codes * self.labs_per_disease > self.n_lab_items
        {
            return Err(Error::Config(format!(
                "distinct_disease_labs needs n_diag_codes * labs_per_disease <= n_lab_items ({} * {} > {})",
                self.n_diag_codes, self.labs_per_disease, self.n_lab_items
            )));
        }
        Ok(())
    }
}

/// Planted parameters, serialized next to the generated CSVs so the exact
/// posterior predictor can be reconstructed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub disease_codes: Vec<String>,
    pub lab_item_codes: Vec<String>,
    /// Lab item indices implied by each disease, ascending.
    pub disease_labs: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub admissions: Vec<AdmissionEvent>,
    pub diagnoses: Vec<DiagnosisEvent>,
    pub labevents: Vec<LabEvent>,
    pub ground_truth: GroundTruth,
}

/// Diagnosis code string for a disease index. Indices 0 and 1 carry
/// heart-failure codes (ICD-9 prefix 428) so the HF task has positives;
/// the 4-digit zero-padding of the rest never collides with that prefix
/// for vocabularies within the validated size bound.
pub fn disease_code(index: usize) -> String {
    match index {
        0 => "428.0".to_string(),
        1 => "428.22".to_string(),
        i => format!("{:04}.{}", i, i % 10),
    }
}

pub fn lab_item_code(index: usize) -> String {
    format!("{}", 50_000 + index)
}

fn exact_count_flags(n: usize, fraction: f64, rng: &mut Rng) -> Vec<bool> {
    let count = ((n as f64) * fraction).round() as usize;
    let count = count.min(n);
    let mut flags = vec![false; n];
    for f in flags.iter_mut().take(count) {
        *f = true;
    }
    rng.shuffle(&mut flags);
    flags
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut master = Rng::new(config.seed);

    let mut rng_structure = master.split();
    let mut disease_labs: Vec<Vec<usize>> = Vec::with_capacity(config.n_diag_codes);
    if config.distinct_disease_labs {
        let pool = rng_structure.choose_distinct(
            config.n_lab_items,
            config.n_diag_codes * config.labs_per_disease,
        );
        let mut shuffled = pool;
        rng_structure.shuffle(&mut shuffled);
        for d in 0..config.n_diag_codes {
            let mut labs =
                shuffled[d * config.labs_per_disease..(d + 1) * config.labs_per_disease].to_vec();
            labs.sort_unstable();
            disease_labs.push(labs);
        }
    } else {
        for _ in 0..config.n_diag_codes {
            disease_labs
                .push(rng_structure.choose_distinct(config.n_lab_items, config.labs_per_disease));
        }
    }

    let mut rng_assign = master.split();
    let single_flags = exact_count_flags(
        config.n_patients,
        config.single_visit_fraction,
        &mut rng_assign,
    );
    let nolab_flags = exact_count_flags(
        config.n_patients,
        config.lab_missing_fraction,
        &mut rng_assign,
    );

    let mut rng_patients = master.split();

    let base_time: i64 = 1_400_000_000;
    let mut admissions = Vec::new();
    let mut diagnoses = Vec::new();
    let mut labevents = Vec::new();

    for idx in 0..config.n_patients {
        let mut prng = rng_patients.split();
        let patient_id = format!("p{idx:06}");
        let latent = prng.choose_distinct(config.n_diag_codes, config.diseases_per_patient);
        let in_latent = |c: usize| latent.binary_search(&c).is_ok();

        let n_visits = if single_flags[idx] {
            1
        } else {
            config.min_visits + prng.below(config.max_visits - config.min_visits + 1)
        };
        let has_labs = !nolab_flags[idx];

        let mut lab_pattern = vec![false; config.n_lab_items];
        for &d in &latent {
            for &item in &disease_labs[d] {
                lab_pattern[item] = true;
            }
        }

        let mut admit_time = base_time + (idx as i64) * 97 + prng.below(86_400) as i64;
        let mut prev_codes: Vec<usize> = Vec::new();
        for visit_idx in 0..n_visits {
            let visit_id = format!("{patient_id}_v{visit_idx:02}");
            admissions.push(AdmissionEvent {
                patient_id: patient_id.clone(),
                visit_id: visit_id.clone(),
                admit_time,
            });

            let mut codes: Vec<usize> = Vec::new();
            if visit_idx == 0 {
                for &d in &latent {
                    if prng.bernoulli(config.obs_rate) {
                        codes.push(d);
                    }
                }
                for c in 0..config.n_diag_codes {
                    if !in_latent(c) && prng.bernoulli(config.noise_code_rate) {
                        codes.push(c);
                    }
                }
            } else {
                for &c in &prev_codes {
                    let keep = if in_latent(c) {
                        config.persistence
                    } else {
                        config.noise_persistence
                    };
                    if prng.bernoulli(keep) {
                        codes.push(c);
                    }
                }
                for &d in &latent {
                    if !prev_codes.contains(&d)
                        && !codes.contains(&d)
                        && prng.bernoulli(config.new_code_rate)
                    {
                        codes.push(d);
                    }
                }
                for c in 0..config.n_diag_codes {
                    if !in_latent(c)
                        && !codes.contains(&c)
                        && prng.bernoulli(config.noise_code_rate)
                    {
                        codes.push(c);
                    }
                }
            }
            if codes.is_empty() {
                codes.push(latent[prng.below(latent.len())]);
            }
            codes.sort_unstable();
            codes.dedup();
            for &c in &codes {
                diagnoses.push(DiagnosisEvent {
                    patient_id: patient_id.clone(),
                    visit_id: visit_id.clone(),
                    icd_code: disease_code(c),
                });
            }
            prev_codes = codes;

            if has_labs {
                for (item, &truth_bit) in lab_pattern.iter().enumerate() {
                    let flip = prng.bernoulli(config.lab_flip_noise);
                    let observed = truth_bit != flip;
                    labevents.push(LabEvent {
                        patient_id: patient_id.clone(),
                        visit_id: visit_id.clone(),
                        item_code: lab_item_code(item),
                        abnormal: observed,
                        timestamp: admit_time - 3600,
                    });
                }
            }

            admit_time += 86_400 * (10 + prng.below(50) as i64);
        }
    }

    let ground_truth = GroundTruth {
        config: config.clone(),
        disease_codes: (0..config.n_diag_codes).map(disease_code).collect(),
        lab_item_codes: (0..config.n_lab_items).map(lab_item_code).collect(),
        disease_labs,
    };

    Ok(SynthDataset {
        admissions,
        diagnoses,
        labevents,
        ground_truth,
    })
}
