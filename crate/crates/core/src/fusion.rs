//! Fusion of the sequential backbone with the frozen lab module, plus the
//! downstream training loop shared by the plain baseline and the fused
//! model.
//!
//! The fused forward pass concatenates the backbone representation with
//! the frozen encoder's view of the integrated lab history, applies
//! dropout, and feeds a sigmoid classifier. Gradients reach the backbone
//! and classifier only; the lab module is shared read-only and its
//! parameters never change. Since the frozen encoding of a sample is
//! constant across epochs, it is precomputed once during sample
//! preparation.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneCache, BackboneGrads, BackboneModel};
use crate::checkpoint::{
    decode_f64s, encode_f64s, read_json, write_json_atomic, CHECKPOINT_VERSION,
};
use crate::ehr::multihot::MultiHotVector;
use crate::ehr::samples::{Task, TaskLabel, TaskSample};
use crate::error::{Error, Result};
use crate::log;
use crate::metrics::{roc_auc, weighted_f1};
use crate::nn::{
    bce_loss, dropout_backward, dropout_forward, Activation, AdamConfig, AdamState, DenseCache,
    DenseGrads, DenseLayer, Schedule,
};
use crate::pretrain::{integrate, PretrainedLabModule};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Mplite,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Mplite => "mplite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamConfig {
    /// GRU hidden units.
    pub hidden: usize,
    /// Dropout rate on the classifier input.
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub schedule: Schedule,
    /// Strict-fidelity option: project the GRU hidden state before fusion.
    pub project_to_vocab: bool,
    /// Projection output dimension; the diagnosis-vocabulary size when
    /// absent. Only meaningful with `project_to_vocab`.
    pub projection_dim: Option<usize>,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        DownstreamConfig {
            hidden: 128,
            dropout: 0.4,
            batch_size: 64,
            epochs: 100,
            schedule: Schedule::default(),
            project_to_vocab: false,
            projection_dim: None,
        }
    }
}

impl DownstreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config(
                "downstream hidden size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config(
                "downstream batch size must be positive".into(),
            ));
        }
        if self.epochs < 2 {
            return Err(Error::Config("downstream epochs must be at least 2".into()));
        }
        if self.projection_dim == Some(0) {
            return Err(Error::Config("projection_dim must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Backbone plus frozen lab module plus classifier.
#[derive(Debug, Clone)]
pub struct FusedModel {
    pub backbone: BackboneModel,
    pub lab_module: Arc<PretrainedLabModule>,
    pub classifier: DenseLayer,
    pub dropout_rate: f64,
    pub task: Task,
}

/// Backbone plus sigmoid head, no lab channel.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub backbone: BackboneModel,
    pub head: DenseLayer,
    pub dropout_rate: f64,
    pub task: Task,
}

#[derive(Debug, Clone)]
pub enum DownstreamModel {
    Baseline(BaselineModel),
    Fused(FusedModel),
}

impl FusedModel {
    /// Full fused forward pass from raw histories, per the layout
    /// o' = (backbone output) followed by (lab hidden state).
    pub fn forward(
        &self,
        hist_diag: &[Vec<f64>],
        hist_lab: &[MultiHotVector],
        training: bool,
        rng: &mut Rng,
    ) -> Result<Vec<f64>> {
        if hist_diag.is_empty() || hist_diag.len() != hist_lab.len() {
            return Err(Error::Invalid(format!(
                "fused forward needs equal-length non-empty histories, got {} and {}",
                hist_diag.len(),
                hist_lab.len()
            )));
        }
        let h_lab = self.lab_module.encode_vector(&integrate(hist_lab)?)?;
        let (o, _) = self.backbone.forward(hist_diag)?;
        let mut z = o;
        z.extend_from_slice(&h_lab);
        let (zd, _) = dropout_forward(&z, self.dropout_rate, rng, training)?;
        let (y_hat, _) = self.classifier.forward(&zd)?;
        Ok(y_hat)
    }
}

/// A task sample converted to the trainer's representation: f64 history
/// vectors, the frozen lab encoding (fused mode), and the label both as a
/// target vector and in its original form for metrics.
pub struct PreparedSample {
    pub patient_id: String,
    pub hist_diag: Vec<Vec<f64>>,
    pub h_lab: Option<Vec<f64>>,
    pub target: Vec<f64>,
    pub label: TaskLabel,
}

pub fn prepare_samples(
    samples: &[TaskSample],
    mode: Mode,
    lab_module: Option<&PretrainedLabModule>,
) -> Result<Vec<PreparedSample>> {
    if mode == Mode::Mplite && lab_module.is_none() {
        return Err(Error::Config(
            "mplite mode requires a pretrained lab module".into(),
        ));
    }
    let mut prepared = Vec::with_capacity(samples.len());
    for s in samples {
        let hist_diag: Vec<Vec<f64>> = s.history.iter().map(|(d, _)| d.to_f64()).collect();
        let h_lab = match mode {
            Mode::Baseline => None,
            Mode::Mplite => {
                let labs: Vec<MultiHotVector> = s.history.iter().map(|(_, l)| l.clone()).collect();
                let integrated = integrate(&labs)?;
                Some(lab_module.unwrap().encode_vector(&integrated)?)
            }
        };
        let target = match &s.label {
            TaskLabel::Dg(v) => v.to_f64(),
            TaskLabel::Hf(b) => vec![if *b { 1.0 } else { 0.0 }],
        };
        prepared.push(PreparedSample {
            patient_id: s.patient_id.clone(),
            hist_diag,
            h_lab,
            target,
            label: s.label.clone(),
        });
    }
    Ok(prepared)
}

pub struct DownstreamGrads {
    backbone: BackboneGrads,
    classifier: DenseGrads,
}

struct ForwardCache {
    backbone: BackboneCache,
    classifier: DenseCache,
    drop_mask: Vec<bool>,
}

impl DownstreamModel {
    pub fn new(
        mode: Mode,
        task: Task,
        n_diag_codes: usize,
        lab_module: Option<Arc<PretrainedLabModule>>,
        cfg: &DownstreamConfig,
        rng: &mut Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let project_to = cfg
            .project_to_vocab
            .then_some(cfg.projection_dim.unwrap_or(n_diag_codes));
        let backbone = BackboneModel::new(n_diag_codes, cfg.hidden, project_to, rng);
        let d_o = backbone.output_dim();
        let task_dim = task.output_dim(n_diag_codes);
        match mode {
            Mode::Baseline => Ok(DownstreamModel::Baseline(BaselineModel {
                backbone,
                head: DenseLayer::new(d_o, task_dim, Activation::Sigmoid, rng),
                dropout_rate: cfg.dropout,
                task,
            })),
            Mode::Mplite => {
                let module = lab_module.ok_or_else(|| {
                    Error::Config("mplite mode requires a pretrained lab module".into())
                })?;
                if module.n_diag_codes() != n_diag_codes {
                    return Err(Error::Shape {
                        context: "DownstreamModel::new lab module",
                        expected: n_diag_codes,
                        got: module.n_diag_codes(),
                    });
                }
                let classifier =
                    DenseLayer::new(d_o + module.hidden, task_dim, Activation::Sigmoid, rng);
                Ok(DownstreamModel::Fused(FusedModel {
                    backbone,
                    lab_module: module,
                    classifier,
                    dropout_rate: cfg.dropout,
                    task,
                }))
            }
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            DownstreamModel::Baseline(_) => Mode::Baseline,
            DownstreamModel::Fused(_) => Mode::Mplite,
        }
    }

    pub fn task(&self) -> Task {
        match self {
            DownstreamModel::Baseline(m) => m.task,
            DownstreamModel::Fused(m) => m.task,
        }
    }

    fn backbone(&self) -> &BackboneModel {
        match self {
            DownstreamModel::Baseline(m) => &m.backbone,
            DownstreamModel::Fused(m) => &m.backbone,
        }
    }

    fn classifier(&self) -> &DenseLayer {
        match self {
            DownstreamModel::Baseline(m) => &m.head,
            DownstreamModel::Fused(m) => &m.classifier,
        }
    }

    fn dropout_rate(&self) -> f64 {
        match self {
            DownstreamModel::Baseline(m) => m.dropout_rate,
            DownstreamModel::Fused(m) => m.dropout_rate,
        }
    }

    pub fn lab_module(&self) -> Option<&Arc<PretrainedLabModule>> {
        match self {
            DownstreamModel::Baseline(_) => None,
            DownstreamModel::Fused(m) => Some(&m.lab_module),
        }
    }

    pub fn grads_zeros(&self) -> DownstreamGrads {
        DownstreamGrads {
            backbone: BackboneGrads::zeros(self.backbone()),
            classifier: DenseGrads::zeros(self.classifier()),
        }
    }

    fn forward_prepared(
        &self,
        sample: &PreparedSample,
        training: bool,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let (o, bcache) = self.backbone().forward(&sample.hist_diag)?;
        let mut z = o;
        match (self, &sample.h_lab) {
            (DownstreamModel::Fused(_), Some(h)) => z.extend_from_slice(h),
            (DownstreamModel::Fused(_), None) => {
                return Err(Error::Invalid(
                    "fused model given a sample prepared without a lab encoding".into(),
                ));
            }
            (DownstreamModel::Baseline(_), _) => {}
        }
        let (zd, mask) = dropout_forward(&z, self.dropout_rate(), rng, training)?;
        let (y_hat, ccache) = self.classifier().forward(&zd)?;
        Ok((
            y_hat,
            ForwardCache {
                backbone: bcache,
                classifier: ccache,
                drop_mask: mask,
            },
        ))
    }

    fn backward_prepared(
        &self,
        cache: &ForwardCache,
        d_y_hat: &[f64],
        grads: &mut DownstreamGrads,
    ) -> Result<()> {
        let dzd = self
            .classifier()
            .backward(&cache.classifier, d_y_hat, &mut grads.classifier)?;
        let dz = dropout_backward(&dzd, &cache.drop_mask, self.dropout_rate());
        let d_o = &dz[..self.backbone().output_dim()];
        // Anything past d_o flows toward the frozen lab module and is
        // intentionally dropped.
        self.backbone()
            .backward(&cache.backbone, d_o, &mut grads.backbone)?;
        Ok(())
    }

    /// Inference scores for one sample: |D| probabilities for DG, one for HF.
    pub fn predict_scores(&self, sample: &PreparedSample) -> Result<Vec<f64>> {
        let mut rng = Rng::new(0); // unused: dropout is inactive at inference
        let (y_hat, _) = self.forward_prepared(sample, false, &mut rng)?;
        Ok(y_hat)
    }

    fn named_tensors(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = Vec::new();
        let (backbone, cls): (&mut BackboneModel, &mut DenseLayer) = match self {
            DownstreamModel::Baseline(m) => (&mut m.backbone, &mut m.head),
            DownstreamModel::Fused(m) => (&mut m.backbone, &mut m.classifier),
        };
        let gru = &mut backbone.gru;
        out.push(("gru.w_z", gru.w_z.data_mut()));
        out.push(("gru.u_z", gru.u_z.data_mut()));
        out.push(("gru.b_z", gru.b_z.as_mut_slice()));
        out.push(("gru.w_r", gru.w_r.data_mut()));
        out.push(("gru.u_r", gru.u_r.data_mut()));
        out.push(("gru.b_r", gru.b_r.as_mut_slice()));
        out.push(("gru.w_n", gru.w_n.data_mut()));
        out.push(("gru.u_n", gru.u_n.data_mut()));
        out.push(("gru.b_n", gru.b_n.as_mut_slice()));
        if let Some(proj) = &mut backbone.projection {
            let (w, b) = proj.parts_mut();
            out.push(("proj.w", w.data_mut()));
            out.push(("proj.b", b));
        }
        let (w, b) = cls.parts_mut();
        out.push(("cls.w", w.data_mut()));
        out.push(("cls.b", b));
        out
    }

    fn named_tensor_views(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = Vec::new();
        let (backbone, cls): (&BackboneModel, &DenseLayer) = match self {
            DownstreamModel::Baseline(m) => (&m.backbone, &m.head),
            DownstreamModel::Fused(m) => (&m.backbone, &m.classifier),
        };
        let gru = &backbone.gru;
        out.push(("gru.w_z", gru.w_z.data()));
        out.push(("gru.u_z", gru.u_z.data()));
        out.push(("gru.b_z", gru.b_z.as_slice()));
        out.push(("gru.w_r", gru.w_r.data()));
        out.push(("gru.u_r", gru.u_r.data()));
        out.push(("gru.b_r", gru.b_r.as_slice()));
        out.push(("gru.w_n", gru.w_n.data()));
        out.push(("gru.u_n", gru.u_n.data()));
        out.push(("gru.b_n", gru.b_n.as_slice()));
        if let Some(proj) = &backbone.projection {
            out.push(("proj.w", proj.weights().data()));
            out.push(("proj.b", proj.bias()));
        }
        out.push(("cls.w", cls.weights().data()));
        out.push(("cls.b", cls.bias()));
        out
    }

    fn grad_tensors(grads: &DownstreamGrads) -> Vec<(&'static str, Vec<f64>)> {
        let mut out: Vec<(&'static str, Vec<f64>)> = Vec::new();
        let g = &grads.backbone.gru;
        out.push(("gru.w_z", g.w_z.data().to_vec()));
        out.push(("gru.u_z", g.u_z.data().to_vec()));
        out.push(("gru.b_z", g.b_z.clone()));
        out.push(("gru.w_r", g.w_r.data().to_vec()));
        out.push(("gru.u_r", g.u_r.data().to_vec()));
        out.push(("gru.b_r", g.b_r.clone()));
        out.push(("gru.w_n", g.w_n.data().to_vec()));
        out.push(("gru.u_n", g.u_n.data().to_vec()));
        out.push(("gru.b_n", g.b_n.clone()));
        if let Some(p) = &grads.backbone.projection {
            out.push(("proj.w", p.dw.data().to_vec()));
            out.push(("proj.b", p.db.clone()));
        }
        out.push(("cls.w", grads.classifier.dw.data().to_vec()));
        out.push(("cls.b", grads.classifier.db.clone()));
        out
    }

    /// Trainable parameters flattened in canonical tensor order, for
    /// gradient checking and diagnostics.
    pub fn param_vec(&self) -> Vec<f64> {
        self.named_tensor_views()
            .into_iter()
            .flat_map(|(_, t)| t.to_vec())
            .collect()
    }

    pub fn set_param_vec(&mut self, values: &[f64]) -> Result<()> {
        let mut offset = 0usize;
        for (_, tensor) in self.named_tensors() {
            let next = offset + tensor.len();
            if next > values.len() {
                return Err(Error::Shape {
                    context: "set_param_vec",
                    expected: next,
                    got: values.len(),
                });
            }
            tensor.copy_from_slice(&values[offset..next]);
            offset = next;
        }
        if offset != values.len() {
            return Err(Error::Shape {
                context: "set_param_vec",
                expected: offset,
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Mean BCE over the batch and its gradient with respect to the
    /// flattened trainable parameters, dropout inactive. Used by the
    /// finite-difference acceptance checks.
    pub fn loss_and_grad_flat(&self, batch: &[&PreparedSample]) -> Result<(f64, Vec<f64>)> {
        let mut rng = Rng::new(0);
        let mut grads = self.grads_zeros();
        let mut total = 0.0;
        for sample in batch {
            let (y_hat, cache) = self.forward_prepared_nodrop(sample, &mut rng)?;
            let (loss, d_y_hat) = bce_loss(&y_hat, &sample.target)?;
            total += loss;
            self.backward_nodrop(&cache, &d_y_hat, &mut grads)?;
        }
        let scale = 1.0 / batch.len() as f64;
        grads.backbone.scale(scale);
        grads.classifier.scale(scale);
        let flat: Vec<f64> = Self::grad_tensors(&grads)
            .into_iter()
            .flat_map(|(_, v)| v)
            .collect();
        Ok((total * scale, flat))
    }

    fn forward_prepared_nodrop(
        &self,
        sample: &PreparedSample,
        rng: &mut Rng,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        self.forward_prepared(sample, false, rng)
    }

    fn backward_nodrop(
        &self,
        cache: &ForwardCache,
        d_y_hat: &[f64],
        grads: &mut DownstreamGrads,
    ) -> Result<()> {
        self.backward_prepared(cache, d_y_hat, grads)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub best_val_metric: Option<f64>,
}

/// Model-selection metric on the validation set: weighted F1 for DG, AUC
/// for HF. Falls back to negative validation loss when the metric is
/// undefined (e.g. a single-class HF validation set).
fn validation_metric(model: &DownstreamModel, val: &[PreparedSample]) -> Result<Option<f64>> {
    if val.is_empty() {
        return Ok(None);
    }
    let mut scores = Vec::with_capacity(val.len());
    for s in val {
        scores.push(model.predict_scores(s)?);
    }
    let metric = match model.task() {
        Task::Dg => {
            let truth: Vec<MultiHotVector> = val
                .iter()
                .map(|s| match &s.label {
                    TaskLabel::Dg(v) => v.clone(),
                    TaskLabel::Hf(_) => unreachable!("task checked above"),
                })
                .collect();
            weighted_f1(&scores, &truth, 0.5)
        }
        Task::Hf => {
            let flat: Vec<f64> = scores.iter().map(|s| s[0]).collect();
            let labels: Vec<bool> = val
                .iter()
                .map(|s| match &s.label {
                    TaskLabel::Hf(b) => *b,
                    TaskLabel::Dg(_) => unreachable!("task checked above"),
                })
                .collect();
            roc_auc(&flat, &labels)
        }
    };
    match metric {
        Ok(m) => Ok(Some(m)),
        Err(Error::Metric(msg)) => {
            log::warn(format!(
                "validation metric undefined ({msg}); selecting on negative validation loss"
            ));
            let mut total = 0.0;
            for (s, score) in val.iter().zip(&scores) {
                let (loss, _) = bce_loss(score, &s.target)?;
                total += loss;
            }
            Ok(Some(-total / val.len() as f64))
        }
        Err(e) => Err(e),
    }
}

/// Minibatch Adam over the trainable parameters with the configured
/// learning-rate schedule; returns the weights of the best validation
/// epoch. The frozen lab module is untouched by construction.
pub fn train_downstream(
    model: &mut DownstreamModel,
    train: &[PreparedSample],
    val: &[PreparedSample],
    cfg: &DownstreamConfig,
    seed: u64,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty(
            "train_downstream needs training samples".into(),
        ));
    }
    let mut rng = Rng::new(seed);
    let mut shuffle_rng = rng.split();
    let mut dropout_rng = rng.split();

    let mut adam = AdamState::new(AdamConfig::default());
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut log_epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch, cfg.epochs)?;
        let mut order: Vec<usize> = (0..train.len()).collect();
        shuffle_rng.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut grads = model.grads_zeros();
            let mut batch_loss = 0.0;
            for &i in chunk {
                let sample = &train[i];
                let (y_hat, cache) = model.forward_prepared(sample, true, &mut dropout_rng)?;
                let (loss, d_y_hat) = bce_loss(&y_hat, &sample.target)?;
                batch_loss += loss;
                model.backward_prepared(&cache, &d_y_hat, &mut grads)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            grads.backbone.scale(scale);
            grads.classifier.scale(scale);
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let grad_tensors = DownstreamModel::grad_tensors(&grads);
            adam.begin_step();
            for ((name, param), (gname, grad)) in
                model.named_tensors().into_iter().zip(grad_tensors)
            {
                debug_assert_eq!(name, gname);
                adam.update(name, param, &grad, lr)?;
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;

        let val_metric = validation_metric(model, val)?;
        if let Some(m) = val_metric {
            let improved = best.as_ref().map(|(_, b, _)| m > *b).unwrap_or(true);
            if improved {
                best = Some((epoch, m, model.param_vec()));
            }
        }
        log_epochs.push(EpochLog {
            epoch,
            lr,
            train_loss,
            val_metric,
        });
    }

    let (best_epoch, best_val_metric) = match best {
        Some((epoch, metric, params)) => {
            model.set_param_vec(&params)?;
            (Some(epoch), Some(metric))
        }
        None => (None, None),
    };
    Ok(TrainLog {
        epochs: log_epochs,
        best_epoch,
        best_val_metric,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentCheckpoint {
    pub version: String,
    pub kind: String,
    pub task: Task,
    pub mode: Mode,
    pub n_diag_codes: usize,
    pub hidden: usize,
    pub projection_dim: Option<usize>,
    pub lab_hidden: Option<usize>,
    pub diag_vocab_fingerprint: String,
    pub lab_vocab_fingerprint: String,
    /// Content hash of the lab-module checkpoint this model was trained
    /// against; absent for the baseline.
    pub lab_module_hash: Option<String>,
    pub seed: u64,
    pub config: DownstreamConfig,
    pub weights: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentMeta {
    pub diag_vocab_fingerprint: String,
    pub lab_vocab_fingerprint: String,
    pub lab_module_hash: Option<String>,
    pub seed: u64,
    pub config: DownstreamConfig,
}

impl DownstreamModel {
    pub fn to_checkpoint(&self, meta: &ExperimentMeta) -> ExperimentCheckpoint {
        let task = self.task();
        let mode = self.mode();
        let n_diag_codes = self.backbone().input_dim();
        let hidden = self.backbone().gru.hidden_size();
        let projection_dim = self.backbone().projection.as_ref().map(|p| p.out_dim());
        let lab_hidden = self.lab_module().map(|m| m.hidden);
        let weights: BTreeMap<String, String> = self
            .named_tensor_views()
            .into_iter()
            .map(|(name, t)| (name.to_string(), encode_f64s(t)))
            .collect();
        ExperimentCheckpoint {
            version: CHECKPOINT_VERSION.to_string(),
            kind: "experiment".to_string(),
            task,
            mode,
            n_diag_codes,
            hidden,
            projection_dim,
            lab_hidden,
            diag_vocab_fingerprint: meta.diag_vocab_fingerprint.clone(),
            lab_vocab_fingerprint: meta.lab_vocab_fingerprint.clone(),
            lab_module_hash: meta.lab_module_hash.clone(),
            seed: meta.seed,
            config: meta.config.clone(),
            weights,
        }
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>, meta: &ExperimentMeta) -> Result<()> {
        write_json_atomic(path, &self.to_checkpoint(meta))
    }

    pub fn load(
        path: impl AsRef<std::path::Path>,
        lab_module: Option<Arc<PretrainedLabModule>>,
    ) -> Result<(Self, ExperimentCheckpoint)> {
        let ckpt: ExperimentCheckpoint = read_json(path)?;
        let model = Self::from_checkpoint(&ckpt, lab_module)?;
        Ok((model, ckpt))
    }

    pub fn from_checkpoint(
        ckpt: &ExperimentCheckpoint,
        lab_module: Option<Arc<PretrainedLabModule>>,
    ) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version `{}`",
                ckpt.version
            )));
        }
        if ckpt.kind != "experiment" {
            return Err(Error::Checkpoint(format!(
                "expected an experiment checkpoint, got `{}`",
                ckpt.kind
            )));
        }
        let cfg = DownstreamConfig {
            hidden: ckpt.hidden,
            project_to_vocab: ckpt.projection_dim.is_some(),
            projection_dim: ckpt.projection_dim,
            ..ckpt.config.clone()
        };
        if ckpt.mode == Mode::Mplite {
            let module = lab_module.as_ref().ok_or_else(|| {
                Error::Checkpoint(
                    "experiment checkpoint requires the lab module it references".into(),
                )
            })?;
            if Some(module.hidden) != ckpt.lab_hidden {
                return Err(Error::Checkpoint(format!(
                    "lab module hidden size {} does not match checkpoint {:?}",
                    module.hidden, ckpt.lab_hidden
                )));
            }
        }
        let mut rng = Rng::new(0);
        let mut model = DownstreamModel::new(
            ckpt.mode,
            ckpt.task,
            ckpt.n_diag_codes,
            lab_module,
            &cfg,
            &mut rng,
        )?;
        for (name, tensor) in model.named_tensors() {
            let blob = ckpt.weights.get(name).ok_or_else(|| {
                Error::Checkpoint(format!("checkpoint missing weight tensor `{name}`"))
            })?;
            let values = decode_f64s(blob, tensor.len())?;
            tensor.copy_from_slice(&values);
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::vocab::{VocabKind, Vocabulary};
    use crate::pretrain::{train_pretrain, PretrainConfig, PretrainSample};

    fn vocabs(n_lab: usize, n_diag: usize) -> (Vocabulary, Vocabulary) {
        (
            Vocabulary::build(
                VocabKind::Diagnosis,
                (0..n_diag).map(|i| format!("d{i:03}")),
            ),
            Vocabulary::build(VocabKind::Lab, (0..n_lab).map(|i| format!("l{i:03}"))),
        )
    }

    fn tiny_module(n_lab: usize, n_diag: usize, hidden: usize) -> Arc<PretrainedLabModule> {
        let (diag, lab) = vocabs(n_lab, n_diag);
        let cfg = PretrainConfig {
            hidden,
            epochs: 3,
            ..PretrainConfig::default()
        };
        let samples: Vec<PretrainSample> = (0..10)
            .map(|i| PretrainSample {
                patient_id: format!("p{i}"),
                x_lab: MultiHotVector::from_indices(n_lab, [i % n_lab]).unwrap(),
                y: MultiHotVector::from_indices(n_diag, [i % n_diag]).unwrap(),
                n_visits: 1,
            })
            .collect();
        let (module, _) = train_pretrain(&samples, &cfg, &diag, &lab, 5).unwrap();
        Arc::new(module)
    }

    fn toy_samples(n: usize, n_diag: usize, n_lab: usize, seed: u64) -> Vec<TaskSample> {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let t = 1 + rng.below(3);
                let history = (0..t)
                    .map(|_| {
                        let d = MultiHotVector::from_indices(n_diag, [rng.below(n_diag)]).unwrap();
                        let l = MultiHotVector::from_indices(n_lab, [rng.below(n_lab)]).unwrap();
                        (d, l)
                    })
                    .collect();
                TaskSample {
                    patient_id: format!("p{i}"),
                    history,
                    label: TaskLabel::Dg(
                        MultiHotVector::from_indices(n_diag, [rng.below(n_diag)]).unwrap(),
                    ),
                }
            })
            .collect()
    }

    #[test]
    fn zero_classifier_outputs_half_regardless_of_input() {
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(2);
        let backbone = BackboneModel::new(5, 4, None, &mut rng);
        let model = FusedModel {
            backbone,
            lab_module: module,
            classifier: DenseLayer::zeros(4 + 3, 5, Activation::Sigmoid),
            dropout_rate: 0.0,
            task: Task::Dg,
        };
        let hist_d = vec![vec![1.0, 0.0, 0.0, 1.0, 0.0]];
        let hist_l = vec![MultiHotVector::from_bits(vec![true, false, false, true])];
        let y = model.forward(&hist_d, &hist_l, false, &mut rng).unwrap();
        assert!(y.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn concatenation_layout_backbone_then_lab() {
        // With an identity check: feed a classifier that reads exactly one
        // input coordinate and verify element d_o + j equals h_lab[j].
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(3);
        let backbone = BackboneModel::new(5, 4, None, &mut rng);
        let d_o = backbone.output_dim();
        let labs = MultiHotVector::from_bits(vec![true, true, false, false]);
        let h_lab = module.encode_vector(&labs).unwrap();
        for j in 0..3 {
            let mut cls = DenseLayer::zeros(d_o + 3, 1, Activation::Identity);
            cls.weights_mut().set(0, d_o + j, 1.0);
            let model = FusedModel {
                backbone: backbone.clone(),
                lab_module: module.clone(),
                classifier: cls,
                dropout_rate: 0.0,
                task: Task::Hf,
            };
            let y = model
                .forward(
                    &[vec![0.0; 5]],
                    std::slice::from_ref(&labs),
                    false,
                    &mut rng,
                )
                .unwrap();
            assert!((y[0] - h_lab[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_is_deterministic_with_dropout_configured() {
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(4);
        let model = DownstreamModel::new(
            Mode::Mplite,
            Task::Dg,
            5,
            Some(module.clone()),
            &DownstreamConfig {
                hidden: 4,
                dropout: 0.4,
                ..DownstreamConfig::default()
            },
            &mut rng,
        )
        .unwrap();
        let samples = toy_samples(1, 5, 4, 7);
        let prepared = prepare_samples(&samples, Mode::Mplite, Some(&module)).unwrap();
        let a = model.predict_scores(&prepared[0]).unwrap();
        let b = model.predict_scores(&prepared[0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_mode_forward_applies_dropout() {
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(40);
        let backbone = BackboneModel::new(5, 4, None, &mut rng);
        let model = FusedModel {
            backbone,
            lab_module: module,
            classifier: DenseLayer::new(4 + 3, 5, Activation::Sigmoid, &mut rng),
            dropout_rate: 0.5,
            task: Task::Dg,
        };
        let hist_d = vec![vec![1.0, 0.0, 1.0, 0.0, 1.0]];
        let hist_l = vec![MultiHotVector::from_bits(vec![true, false, true, false])];
        let inference = model.forward(&hist_d, &hist_l, false, &mut rng).unwrap();
        // With rate 0.5 on a 7-dim concat, some mask across a few draws
        // must differ from the identity.
        let mut saw_difference = false;
        for _ in 0..8 {
            let trained = model.forward(&hist_d, &hist_l, true, &mut rng).unwrap();
            assert_eq!(trained.len(), inference.len());
            if trained != inference {
                saw_difference = true;
            }
        }
        assert!(saw_difference, "training-mode dropout never fired");
    }

    #[test]
    fn direct_forward_agrees_with_prepared_path() {
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(50);
        let cfg = DownstreamConfig {
            hidden: 4,
            dropout: 0.4,
            ..DownstreamConfig::default()
        };
        let model = DownstreamModel::new(
            Mode::Mplite,
            Task::Dg,
            5,
            Some(module.clone()),
            &cfg,
            &mut rng,
        )
        .unwrap();
        let samples = toy_samples(6, 5, 4, 51);
        let prepared = prepare_samples(&samples, Mode::Mplite, Some(&module)).unwrap();
        let fused = match &model {
            DownstreamModel::Fused(m) => m,
            _ => unreachable!(),
        };
        for (sample, prep) in samples.iter().zip(&prepared) {
            let hist_d: Vec<Vec<f64>> = sample.history.iter().map(|(d, _)| d.to_f64()).collect();
            let hist_l: Vec<MultiHotVector> =
                sample.history.iter().map(|(_, l)| l.clone()).collect();
            let direct = fused.forward(&hist_d, &hist_l, false, &mut rng).unwrap();
            let via_prepared = model.predict_scores(prep).unwrap();
            assert_eq!(direct, via_prepared);
        }
    }

    #[test]
    fn training_leaves_lab_module_checksum_unchanged() {
        let module = tiny_module(4, 5, 3);
        let before = module.weight_checksum();
        let mut rng = Rng::new(5);
        let cfg = DownstreamConfig {
            hidden: 4,
            dropout: 0.2,
            batch_size: 8,
            epochs: 5,
            ..DownstreamConfig::default()
        };
        let mut model = DownstreamModel::new(
            Mode::Mplite,
            Task::Dg,
            5,
            Some(module.clone()),
            &cfg,
            &mut rng,
        )
        .unwrap();
        let samples = toy_samples(24, 5, 4, 8);
        let prepared = prepare_samples(&samples, Mode::Mplite, Some(&module)).unwrap();
        let (train, val) = prepared.split_at(20);
        train_downstream(&mut model, train, val, &cfg, 6).unwrap();
        assert_eq!(module.weight_checksum(), before);
    }

    #[test]
    fn same_seed_reproduces_the_training_log() {
        let module = tiny_module(4, 5, 3);
        let cfg = DownstreamConfig {
            hidden: 4,
            dropout: 0.3,
            batch_size: 8,
            epochs: 4,
            ..DownstreamConfig::default()
        };
        let samples = toy_samples(24, 5, 4, 9);
        let prepared = prepare_samples(&samples, Mode::Mplite, Some(&module)).unwrap();
        let (train, val) = prepared.split_at(20);
        let run = || {
            let mut rng = Rng::new(10);
            let mut model = DownstreamModel::new(
                Mode::Mplite,
                Task::Dg,
                5,
                Some(module.clone()),
                &cfg,
                &mut rng,
            )
            .unwrap();
            let log = train_downstream(&mut model, train, val, &cfg, 11).unwrap();
            (log.best_val_metric, model.param_vec())
        };
        let (m1, p1) = run();
        let (m2, p2) = run();
        assert_eq!(m1, m2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn experiment_checkpoint_round_trips() {
        let module = tiny_module(4, 5, 3);
        let mut rng = Rng::new(12);
        let cfg = DownstreamConfig {
            hidden: 4,
            ..DownstreamConfig::default()
        };
        let model = DownstreamModel::new(
            Mode::Mplite,
            Task::Hf,
            5,
            Some(module.clone()),
            &cfg,
            &mut rng,
        )
        .unwrap();
        let meta = ExperimentMeta {
            diag_vocab_fingerprint: "d".into(),
            lab_vocab_fingerprint: "l".into(),
            lab_module_hash: Some("hash".into()),
            seed: 12,
            config: cfg,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.json");
        model.save(&path, &meta).unwrap();
        let (loaded, ckpt) = DownstreamModel::load(&path, Some(module.clone())).unwrap();
        assert_eq!(ckpt.lab_module_hash.as_deref(), Some("hash"));
        assert_eq!(model.param_vec(), loaded.param_vec());

        let samples = toy_samples(3, 5, 4, 13);
        let hf_samples: Vec<TaskSample> = samples
            .into_iter()
            .map(|mut s| {
                s.label = TaskLabel::Hf(true);
                s
            })
            .collect();
        let prepared = prepare_samples(&hf_samples, Mode::Mplite, Some(&module)).unwrap();
        for p in &prepared {
            assert_eq!(
                model.predict_scores(p).unwrap(),
                loaded.predict_scores(p).unwrap()
            );
        }
    }

    #[test]
    fn mplite_mode_without_module_is_config_error() {
        let mut rng = Rng::new(1);
        let err = DownstreamModel::new(
            Mode::Mplite,
            Task::Dg,
            5,
            None,
            &DownstreamConfig::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn hf_scores_are_scalar_probabilities() {
        let mut rng = Rng::new(20);
        let cfg = DownstreamConfig {
            hidden: 4,
            ..DownstreamConfig::default()
        };
        let model =
            DownstreamModel::new(Mode::Baseline, Task::Hf, 5, None, &cfg, &mut rng).unwrap();
        let samples = toy_samples(2, 5, 4, 21);
        let prepared = prepare_samples(&samples, Mode::Baseline, None).unwrap();
        for p in &prepared {
            let s = model.predict_scores(p).unwrap();
            assert_eq!(s.len(), 1);
            assert!(s[0] > 0.0 && s[0] < 1.0);
        }
    }
}
