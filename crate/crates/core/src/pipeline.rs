//! Experiment configuration and the pipeline stages behind the CLI:
//! synth -> ingest -> pretrain -> train -> eval -> report.
//!
//! Stages communicate only through files under the output directory. Every
//! stage recomputes what it needs from the dataset CSVs deterministically
//! (vocabularies are lexicographic, the split is a pure function of the
//! cohort and seed), so deleting intermediate artifacts and rerunning the
//! producing stage restores them byte-identically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checkpoint::{file_sha256, read_json, write_bytes_atomic, write_json_atomic};
use crate::ehr::cohort::{select_cohorts, Cohort};
use crate::ehr::encode::{DropCounter, UnknownCodePolicy};
use crate::ehr::events::{load_admissions, load_diagnoses, load_labevents, Schema};
use crate::ehr::multihot::MultiHotVector;
use crate::ehr::patient::{assemble_patients, PatientRecord};
use crate::ehr::samples::{make_sample, Task, TaskLabel, TaskSample};
use crate::ehr::split::{split_dataset, DatasetSplit};
use crate::ehr::vocab::{VocabKind, Vocabulary};
use crate::error::{Error, Result};
use crate::fusion::{
    prepare_samples, train_downstream, DownstreamConfig, DownstreamModel, ExperimentMeta, Mode,
};
use crate::log;
use crate::metrics::report::{format_comparison, format_report};
use crate::metrics::{
    aggregate_runs, binary_f1, recall_at_k_dataset, roc_auc, weighted_f1, MetricValues,
    MetricsReport, RunMetrics,
};
use crate::pretrain::{build_pretrain_set, train_pretrain, PretrainConfig, PretrainedLabModule};
use crate::rng::Rng;
use crate::synth::{generate, SynthConfig, SynthDataset};

pub const CONFIG_VERSION: u32 = 1;
pub const MANIFEST_VERSION: &str = "mplite-manifest-v1";

fn default_version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    /// Train/validation/test fractions; must sum to 1. The defaults mirror
    /// the 6000/493/1000 proportions commonly used on MIMIC-III.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.8, 0.066, 0.134],
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Directory holding the dataset CSVs; defaults to `<out_dir>/dataset`,
    /// which is where `synth` writes.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub synth: Option<SynthConfig>,
    pub split: SplitConfig,
    pub pretrain: PretrainConfig,
    pub pretrain_seed: u64,
    pub downstream: DownstreamConfig,
    pub task: Task,
    pub n_runs: usize,
    /// Explicit per-run seeds; derived from `base_seed` when absent.
    pub run_seeds: Option<Vec<u64>>,
    pub base_seed: u64,
    pub unknown_code_policy: UnknownCodePolicy,
    /// Validation hooks: error when the built vocabulary sizes differ.
    pub expected_diag_codes: Option<usize>,
    pub expected_lab_items: Option<usize>,
    /// Cap the Recall@k denominator at k instead of the positive count.
    pub recall_capped: bool,
    /// Decision threshold for the HF F1 metric.
    pub hf_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            data_dir: None,
            out_dir: PathBuf::from("mplite-out"),
            synth: None,
            split: SplitConfig::default(),
            pretrain: PretrainConfig::default(),
            pretrain_seed: 11,
            downstream: DownstreamConfig::default(),
            task: Task::Dg,
            n_runs: 1,
            run_seeds: None,
            base_seed: 100,
            unknown_code_policy: UnknownCodePolicy::default(),
            expected_diag_codes: None,
            expected_lab_items: None,
            recall_capped: false,
            hf_threshold: 0.5,
        }
    }
}

/// Flag-level overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    /// Reseeds the whole experiment: synth, split, pretraining and the
    /// derived per-run seeds.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub task: Option<Task>,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::Config(format!(
                "config file not found: {}",
                path.display()
            )));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, overrides: &CliOverrides) {
        if let Some(seed) = overrides.seed {
            if let Some(synth) = &mut self.synth {
                synth.seed = seed;
            }
            self.split.seed = seed;
            self.pretrain_seed = seed;
            self.base_seed = seed;
            self.run_seeds = None;
        }
        if let Some(out) = &overrides.out {
            self.out_dir = out.clone();
        }
        if let Some(task) = overrides.task {
            self.task = task;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("out_dir must not be empty".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if let Some(seeds) = &self.run_seeds {
            if seeds.len() != self.n_runs {
                return Err(Error::Config(format!(
                    "run_seeds has {} entries but n_runs is {}",
                    seeds.len(),
                    self.n_runs
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.hf_threshold) {
            return Err(Error::Config(format!(
                "hf_threshold must be in [0, 1], got {}",
                self.hf_threshold
            )));
        }
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        self.pretrain.validate()?;
        self.downstream.validate()?;
        Ok(())
    }

    pub fn run_seed_list(&self) -> Vec<u64> {
        match &self.run_seeds {
            Some(seeds) => seeds.clone(),
            None => (0..self.n_runs as u64)
                .map(|i| self.base_seed + i)
                .collect(),
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("dataset"))
    }

    pub fn lab_module_path(&self) -> PathBuf {
        self.out_dir.join("lab_module.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.json")
    }

    pub fn experiment_path(&self, mode: Mode, seed: u64) -> PathBuf {
        self.out_dir.join(format!(
            "experiment_{}_{}_seed{}.json",
            self.task.name(),
            mode.name(),
            seed
        ))
    }

    pub fn metrics_path(&self, mode: Mode) -> PathBuf {
        self.out_dir
            .join(format!("metrics_{}_{}.json", self.task.name(), mode.name()))
    }

    pub fn report_path(&self) -> PathBuf {
        self.out_dir
            .join(format!("report_{}.txt", self.task.name()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub patients_total: usize,
    pub patients_multi: usize,
    pub patients_single: usize,
    pub patients_single_utilized: usize,
    pub patients_multi_utilized: usize,
    pub n_diag_codes: usize,
    pub n_lab_items: usize,
    pub diag_vocab_fingerprint: String,
    pub lab_vocab_fingerprint: String,
    pub pretrain_cohort: usize,
    pub prediction_cohort: usize,
    pub pretrain_samples: usize,
    pub pretrain_dropped_empty: u64,
    pub split_train: usize,
    pub split_val: usize,
    pub split_test: usize,
    pub split_seed: u64,
    pub drop_counter: DropCounter,
}

/// Everything the model stages need, rebuilt deterministically from the
/// dataset files.
pub struct LoadedDataset {
    pub patients: Vec<PatientRecord>,
    pub diag_vocab: Vocabulary,
    pub lab_vocab: Vocabulary,
    pub pretrain_cohort: Cohort,
    pub prediction_cohort: Cohort,
    pub split: DatasetSplit,
    pub manifest: DatasetManifest,
}

impl LoadedDataset {
    pub fn patient(&self, id: &str) -> Option<&PatientRecord> {
        self.patients
            .binary_search_by(|p| p.patient_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.patients[i])
    }

    /// Task samples for the patients of one split set, in patient order.
    pub fn samples_for(
        &self,
        ids: &std::collections::BTreeSet<String>,
        task: Task,
        policy: UnknownCodePolicy,
        counter: &mut DropCounter,
    ) -> Result<Vec<TaskSample>> {
        let mut out = Vec::with_capacity(ids.len());
        for id in ids {
            let patient = self.patient(id).ok_or_else(|| {
                Error::Invalid(format!("split references unknown patient `{id}`"))
            })?;
            out.push(make_sample(
                patient,
                task,
                &self.diag_vocab,
                &self.lab_vocab,
                policy,
                counter,
            )?);
        }
        Ok(out)
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LoadedDataset> {
    let dir = cfg.data_dir();
    for schema in [Schema::Admissions, Schema::Diagnoses, Schema::LabEvents] {
        let path = dir.join(schema.file_name());
        if !path.exists() {
            return Err(Error::Config(format!(
                "dataset file not found: {}; point data_dir at an existing dataset or run `mplite synth`",
                path.display()
            )));
        }
    }
    let admissions = load_admissions(dir.join(Schema::Admissions.file_name()))?;
    let diagnoses = load_diagnoses(dir.join(Schema::Diagnoses.file_name()))?;
    let labevents = load_labevents(dir.join(Schema::LabEvents.file_name()))?;

    let patients = assemble_patients(&admissions, &diagnoses, &labevents)?;
    let diag_vocab = Vocabulary::build(VocabKind::Diagnosis, diagnoses.iter().map(|d| &d.icd_code));
    let lab_vocab = Vocabulary::build(VocabKind::Lab, labevents.iter().map(|l| &l.item_code));
    if let Some(expected) = cfg.expected_diag_codes {
        diag_vocab.expect_size(expected)?;
    }
    if let Some(expected) = cfg.expected_lab_items {
        lab_vocab.expect_size(expected)?;
    }

    let (pretrain_cohort, prediction_cohort) = select_cohorts(&patients);
    if prediction_cohort.is_empty() {
        return Err(Error::Empty(
            "no prediction cohort: the dataset has no multi-visit patients with complete diagnoses"
                .into(),
        ));
    }
    let split = split_dataset(&prediction_cohort, cfg.split.ratios.into(), cfg.split.seed)?;

    let mut counter = DropCounter::default();
    let mut n_task_samples = 0usize;
    let patients_by_id: BTreeMap<&str, &PatientRecord> = patients
        .iter()
        .map(|p| (p.patient_id.as_str(), p))
        .collect();
    for id in &prediction_cohort.patient_ids {
        let p = patients_by_id[id.as_str()];
        make_sample(
            p,
            cfg.task,
            &diag_vocab,
            &lab_vocab,
            cfg.unknown_code_policy,
            &mut counter,
        )?;
        n_task_samples += 1;
    }
    debug_assert_eq!(n_task_samples, prediction_cohort.len());

    let (pretrain_samples, pretrain_dropped_empty) = build_pretrain_set(
        &patients,
        &pretrain_cohort,
        &split,
        &diag_vocab,
        &lab_vocab,
        cfg.unknown_code_policy,
        &mut counter,
    )
    .map(|(s, d)| (s.len(), d))
    .unwrap_or((0, 0));

    let patients_multi = patients.iter().filter(|p| p.num_visits() >= 2).count();
    let patients_single = patients.len() - patients_multi;
    let patients_single_utilized = patients
        .iter()
        .filter(|p| p.num_visits() == 1 && p.lab_event_count > 0)
        .count();

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION.to_string(),
        patients_total: patients.len(),
        patients_multi,
        patients_single,
        patients_single_utilized,
        patients_multi_utilized: prediction_cohort.len(),
        n_diag_codes: diag_vocab.size(),
        n_lab_items: lab_vocab.size(),
        diag_vocab_fingerprint: diag_vocab.fingerprint(),
        lab_vocab_fingerprint: lab_vocab.fingerprint(),
        pretrain_cohort: pretrain_cohort.len(),
        prediction_cohort: prediction_cohort.len(),
        pretrain_samples,
        pretrain_dropped_empty,
        split_train: split.train.len(),
        split_val: split.val.len(),
        split_test: split.test.len(),
        split_seed: split.seed,
        drop_counter: counter,
    };

    Ok(LoadedDataset {
        patients,
        diag_vocab,
        lab_vocab,
        pretrain_cohort,
        prediction_cohort,
        split,
        manifest,
    })
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::Invalid(format!("csv write: {e}")))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| Error::Invalid(format!("csv write: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| Error::Invalid(format!("csv flush: {e}")))
}

pub fn write_dataset_csvs(dir: &Path, ds: &SynthDataset) -> Result<()> {
    let admissions: Vec<Vec<String>> = ds
        .admissions
        .iter()
        .map(|a| {
            vec![
                a.patient_id.clone(),
                a.visit_id.clone(),
                a.admit_time.to_string(),
            ]
        })
        .collect();
    write_bytes_atomic(
        dir.join(Schema::Admissions.file_name()),
        &csv_bytes(Schema::Admissions.columns(), &admissions)?,
    )?;

    let diagnoses: Vec<Vec<String>> = ds
        .diagnoses
        .iter()
        .map(|d| vec![d.patient_id.clone(), d.visit_id.clone(), d.icd_code.clone()])
        .collect();
    write_bytes_atomic(
        dir.join(Schema::Diagnoses.file_name()),
        &csv_bytes(Schema::Diagnoses.columns(), &diagnoses)?,
    )?;

    let labevents: Vec<Vec<String>> = ds
        .labevents
        .iter()
        .map(|l| {
            vec![
                l.patient_id.clone(),
                l.visit_id.clone(),
                l.item_code.clone(),
                if l.abnormal { "1" } else { "0" }.to_string(),
                l.timestamp.to_string(),
            ]
        })
        .collect();
    write_bytes_atomic(
        dir.join(Schema::LabEvents.file_name()),
        &csv_bytes(Schema::LabEvents.columns(), &labevents)?,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub version: String,
    pub n_patients: usize,
    pub n_single_visit: usize,
    pub n_multi_visit: usize,
    pub admission_rows: usize,
    pub diagnosis_rows: usize,
    pub lab_rows: usize,
    pub config: SynthConfig,
}

/// Generate the synthetic dataset and write the three CSVs, the planted
/// ground truth and a generation manifest into the data directory.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let synth_cfg = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `synth` section".into()))?;
    let dir = cfg.data_dir();
    let ds = generate(synth_cfg)?;
    write_dataset_csvs(&dir, &ds)?;
    write_json_atomic(dir.join("ground_truth.json"), &ds.ground_truth)?;

    let mut visit_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &ds.admissions {
        *visit_counts.entry(a.patient_id.as_str()).or_default() += 1;
    }
    let n_single = visit_counts.values().filter(|&&v| v == 1).count();
    let summary = SynthSummary {
        version: MANIFEST_VERSION.to_string(),
        n_patients: visit_counts.len(),
        n_single_visit: n_single,
        n_multi_visit: visit_counts.len() - n_single,
        admission_rows: ds.admissions.len(),
        diagnosis_rows: ds.diagnoses.len(),
        lab_rows: ds.labevents.len(),
        config: synth_cfg.clone(),
    };
    write_json_atomic(dir.join("synth_manifest.json"), &summary)?;
    log::info(format!(
        "synth: {} patients ({} single-visit), {} lab rows -> {}",
        summary.n_patients,
        summary.n_single_visit,
        summary.lab_rows,
        dir.display()
    ));
    Ok(dir)
}

/// Ingest the dataset, build vocabularies/cohorts/split, and write the
/// manifest.
pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    write_json_atomic(cfg.manifest_path(), &data.manifest)?;
    log::info(format!(
        "ingest: {} patients ({} multi-visit utilized, {} single-visit utilized), |D|={}, |L|={}",
        data.manifest.patients_total,
        data.manifest.patients_multi_utilized,
        data.manifest.patients_single_utilized,
        data.manifest.n_diag_codes,
        data.manifest.n_lab_items
    ));
    Ok(data.manifest)
}

/// Train the lab module on the pretraining set and write its checkpoint.
pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let mut counter = DropCounter::default();
    let (samples, dropped) = build_pretrain_set(
        &data.patients,
        &data.pretrain_cohort,
        &data.split,
        &data.diag_vocab,
        &data.lab_vocab,
        cfg.unknown_code_policy,
        &mut counter,
    )?;
    log::info(format!(
        "pretrain: {} samples ({} dropped empty), |L|={} -> hidden {}",
        samples.len(),
        dropped,
        data.lab_vocab.size(),
        cfg.pretrain.hidden
    ));
    let (module, train_log) = train_pretrain(
        &samples,
        &cfg.pretrain,
        &data.diag_vocab,
        &data.lab_vocab,
        cfg.pretrain_seed,
    )?;
    let path = cfg.lab_module_path();
    module.save(&path)?;
    write_json_atomic(cfg.out_dir.join("pretrain_log.json"), &train_log)?;
    log::info(format!(
        "pretrain: best epoch {} of {}, module -> {}",
        train_log.best_epoch,
        train_log.epochs_run,
        path.display()
    ));
    Ok(path)
}

fn load_lab_module_checked(
    cfg: &ExperimentConfig,
    data: &LoadedDataset,
) -> Result<(std::sync::Arc<PretrainedLabModule>, String)> {
    let path = cfg.lab_module_path();
    if !path.exists() {
        return Err(Error::Config(format!(
            "no lab module checkpoint at {}; run `mplite pretrain` first",
            path.display()
        )));
    }
    let module = PretrainedLabModule::load(&path)?;
    module.verify_vocabs(&data.diag_vocab, &data.lab_vocab)?;
    let hash = file_sha256(&path)?;
    Ok((std::sync::Arc::new(module), hash))
}

/// Train one downstream model per run seed and write experiment
/// checkpoints. Baseline and fused runs share the same seed list, so the
/// comparison is paired.
pub fn cmd_train(cfg: &ExperimentConfig, mode: Mode) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let mut counter = DropCounter::default();
    let train_samples = data.samples_for(
        &data.split.train,
        cfg.task,
        cfg.unknown_code_policy,
        &mut counter,
    )?;
    let val_samples = data.samples_for(
        &data.split.val,
        cfg.task,
        cfg.unknown_code_policy,
        &mut counter,
    )?;

    let (lab_module, lab_hash) = match mode {
        Mode::Baseline => (None, None),
        Mode::Mplite => {
            let (module, hash) = load_lab_module_checked(cfg, &data)?;
            (Some(module), Some(hash))
        }
    };
    let train_prepared = prepare_samples(&train_samples, mode, lab_module.as_deref())?;
    let val_prepared = prepare_samples(&val_samples, mode, lab_module.as_deref())?;

    let mut paths = Vec::new();
    for seed in cfg.run_seed_list() {
        let mut rng = Rng::new(seed);
        let mut model = DownstreamModel::new(
            mode,
            cfg.task,
            data.diag_vocab.size(),
            lab_module.clone(),
            &cfg.downstream,
            &mut rng,
        )?;
        let train_log = train_downstream(
            &mut model,
            &train_prepared,
            &val_prepared,
            &cfg.downstream,
            seed,
        )?;
        let meta = ExperimentMeta {
            diag_vocab_fingerprint: data.diag_vocab.fingerprint(),
            lab_vocab_fingerprint: data.lab_vocab.fingerprint(),
            lab_module_hash: lab_hash.clone(),
            seed,
            config: cfg.downstream.clone(),
        };
        let path = cfg.experiment_path(mode, seed);
        model.save(&path, &meta)?;
        log::info(format!(
            "train {} seed {}: best val {:?} (epoch {:?}) -> {}",
            mode.name(),
            seed,
            train_log.best_val_metric,
            train_log.best_epoch,
            path.display()
        ));
        paths.push(path);
    }
    Ok(paths)
}

fn eval_one(
    cfg: &ExperimentConfig,
    model: &DownstreamModel,
    test: &[crate::fusion::PreparedSample],
    seed: u64,
) -> Result<RunMetrics> {
    let mut scores = Vec::with_capacity(test.len());
    for s in test {
        scores.push(model.predict_scores(s)?);
    }
    let values = match cfg.task {
        Task::Dg => {
            let truth: Vec<MultiHotVector> = test
                .iter()
                .map(|s| match &s.label {
                    TaskLabel::Dg(v) => v.clone(),
                    TaskLabel::Hf(_) => unreachable!("task-checked samples"),
                })
                .collect();
            let w_f1 = weighted_f1(&scores, &truth, 0.5)?;
            let r10 = recall_at_k_dataset(&scores, &truth, 10, cfg.recall_capped)?;
            let r20 = recall_at_k_dataset(&scores, &truth, 20, cfg.recall_capped)?;
            if r10.skipped > 0 {
                log::warn(format!(
                    "recall: skipped {} positive-free samples",
                    r10.skipped
                ));
            }
            MetricValues {
                w_f1: Some(w_f1),
                r_at_10: Some(r10.value),
                r_at_20: Some(r20.value),
                auc: None,
                f1: None,
            }
        }
        Task::Hf => {
            let flat: Vec<f64> = scores.iter().map(|s| s[0]).collect();
            let labels: Vec<bool> = test
                .iter()
                .map(|s| match &s.label {
                    TaskLabel::Hf(b) => *b,
                    TaskLabel::Dg(_) => unreachable!("task-checked samples"),
                })
                .collect();
            MetricValues {
                w_f1: None,
                r_at_10: None,
                r_at_20: None,
                auc: Some(roc_auc(&flat, &labels)?),
                f1: Some(binary_f1(&flat, &labels, cfg.hf_threshold)?),
            }
        }
    };
    Ok(RunMetrics { seed, values })
}

/// Evaluate saved experiment checkpoints on the test split and write one
/// metrics report per mode.
pub fn cmd_eval(cfg: &ExperimentConfig, mode: Option<Mode>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    let mut counter = DropCounter::default();
    let test_samples = data.samples_for(
        &data.split.test,
        cfg.task,
        cfg.unknown_code_policy,
        &mut counter,
    )?;
    if test_samples.is_empty() {
        return Err(Error::Empty(
            "test split is empty; nothing to evaluate".into(),
        ));
    }

    let modes: Vec<Mode> = match mode {
        Some(m) => vec![m],
        None => vec![Mode::Baseline, Mode::Mplite],
    };
    let mut written = Vec::new();
    for mode in modes {
        let (lab_module, lab_hash) = match mode {
            Mode::Baseline => (None, None),
            Mode::Mplite => {
                let (module, hash) = load_lab_module_checked(cfg, &data)?;
                (Some(module), Some(hash))
            }
        };
        let test_prepared = prepare_samples(&test_samples, mode, lab_module.as_deref())?;

        let mut runs = Vec::new();
        for seed in cfg.run_seed_list() {
            let path = cfg.experiment_path(mode, seed);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "no experiment checkpoint at {}; run `mplite train --mode {}` first",
                    path.display(),
                    mode.name()
                )));
            }
            let (model, ckpt) = DownstreamModel::load(&path, lab_module.clone())?;
            if ckpt.diag_vocab_fingerprint != data.diag_vocab.fingerprint() {
                return Err(Error::Fingerprint {
                    what: "experiment diagnosis vocabulary",
                    expected: ckpt.diag_vocab_fingerprint.clone(),
                    got: data.diag_vocab.fingerprint(),
                });
            }
            if ckpt.lab_vocab_fingerprint != data.lab_vocab.fingerprint() {
                return Err(Error::Fingerprint {
                    what: "experiment lab vocabulary",
                    expected: ckpt.lab_vocab_fingerprint.clone(),
                    got: data.lab_vocab.fingerprint(),
                });
            }
            if mode == Mode::Mplite && ckpt.lab_module_hash != lab_hash {
                return Err(Error::Fingerprint {
                    what: "lab module checkpoint",
                    expected: ckpt.lab_module_hash.clone().unwrap_or_default(),
                    got: lab_hash.clone().unwrap_or_default(),
                });
            }
            runs.push(eval_one(cfg, &model, &test_prepared, seed)?);
        }
        let report = aggregate_runs(&runs)?;
        let path = cfg.metrics_path(mode);
        write_json_atomic(&path, &report)?;
        let label = match mode {
            Mode::Baseline => "GRU",
            Mode::Mplite => "GRU+MPLite",
        };
        print!("{}", format_report(cfg.task, label, &report));
        written.push(path);
    }
    Ok(written)
}

/// Read both metrics reports and print the paired comparison table.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let baseline_path = cfg.metrics_path(Mode::Baseline);
    let mplite_path = cfg.metrics_path(Mode::Mplite);
    for (path, mode) in [(&baseline_path, "baseline"), (&mplite_path, "mplite")] {
        if !path.exists() {
            return Err(Error::Config(format!(
                "no metrics report at {}; run `mplite eval --mode {mode}` first",
                path.display()
            )));
        }
    }
    let baseline: MetricsReport = read_json(&baseline_path)?;
    let mplite: MetricsReport = read_json(&mplite_path)?;
    let table = format_comparison(cfg.task, &baseline, &mplite);
    write_bytes_atomic(cfg.report_path(), table.as_bytes())?;
    print!("{table}");
    Ok(table)
}
