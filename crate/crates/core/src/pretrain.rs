//! The lab-result pretraining module.
//!
//! Proxy task: predict the union of a patient's diagnoses from the
//! integration (element-wise OR) of the patient's per-visit lab vectors.
//! The task needs no next-visit label, so single-visit patients — the
//! majority of a typical EHR dataset — contribute training signal.
//! After training the module is frozen; downstream models consume its
//! hidden representation and never update it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::checkpoint::{
    decode_f64s, encode_f64s, read_json, sha256_hex, write_json_atomic, CHECKPOINT_VERSION,
};
use crate::ehr::cohort::Cohort;
use crate::ehr::encode::{encode_visit, DropCounter, UnknownCodePolicy};
use crate::ehr::multihot::MultiHotVector;
use crate::ehr::patient::PatientRecord;
use crate::ehr::split::DatasetSplit;
use crate::ehr::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::log;
use crate::nn::{
    bce_loss, Activation, AdamConfig, AdamState, DenseGrads, DenseLayer, Matrix, Schedule,
};
use crate::rng::Rng;

/// Element-wise OR across a list of equal-length multi-hot vectors. This
/// collapses a visit sequence into a single lab view, aligning multi-visit
/// patients with the single-visit input format.
pub fn integrate(vectors: &[MultiHotVector]) -> Result<MultiHotVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Empty("integrate over an empty vector list".into()))?;
    let mut acc = first.clone();
    for v in &vectors[1..] {
        acc.or_assign(v)?;
    }
    Ok(acc)
}

/// One pretraining sample: integrated lab vector in, union of the
/// patient's diagnoses out.
#[derive(Debug, Clone)]
pub struct PretrainSample {
    pub patient_id: String,
    pub x_lab: MultiHotVector,
    pub y: MultiHotVector,
    /// Number of visits whose labs fed the integration.
    pub n_visits: usize,
}

/// Assemble the pretraining set.
///
/// Single-visit patients with labs are always eligible — they never appear
/// in the prediction splits. Multi-visit patients are kept only when they
/// fall in the prediction training split, so pretraining never sees
/// validation or test patients.
pub fn build_pretrain_set(
    patients: &[PatientRecord],
    pretrain_cohort: &Cohort,
    split: &DatasetSplit,
    diag_vocab: &Vocabulary,
    lab_vocab: &Vocabulary,
    policy: UnknownCodePolicy,
    counter: &mut DropCounter,
) -> Result<(Vec<PretrainSample>, u64)> {
    let mut samples = Vec::new();
    let mut dropped_empty = 0u64;
    for p in patients {
        if !pretrain_cohort.contains(&p.patient_id) {
            continue;
        }
        if p.num_visits() >= 2 && !split.train.contains(&p.patient_id) {
            continue;
        }
        let mut lab_vectors = Vec::with_capacity(p.num_visits());
        let mut union_codes: BTreeSet<&String> = BTreeSet::new();
        for visit in &p.visits {
            let (_, x_lab) = encode_visit(visit, diag_vocab, lab_vocab, policy, counter)?;
            lab_vectors.push(x_lab);
            union_codes.extend(visit.diag_codes.iter());
        }
        let mut y = MultiHotVector::new(diag_vocab.size());
        for code in union_codes {
            match diag_vocab.index_of(code) {
                Some(i) => y.set(i, true),
                None => match policy {
                    UnknownCodePolicy::DropWithCount => counter.diag_dropped += 1,
                    UnknownCodePolicy::Error => {
                        return Err(Error::Invalid(format!(
                            "code `{code}` not in diagnosis vocabulary"
                        )));
                    }
                },
            }
        }
        if y.count_ones() == 0 {
            dropped_empty += 1;
            continue;
        }
        let n_visits = lab_vectors.len();
        samples.push(PretrainSample {
            patient_id: p.patient_id.clone(),
            x_lab: integrate(&lab_vectors)?,
            y,
            n_visits,
        });
    }
    if samples.is_empty() {
        return Err(Error::Empty("pretraining set is empty".into()));
    }
    Ok((samples, dropped_empty))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Hidden dimension of the encoder output.
    pub hidden: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub schedule: Schedule,
    pub encoder_activation: Activation,
    /// Fraction of samples held out for early stopping.
    pub holdout_fraction: f64,
    /// Epochs without holdout improvement before stopping.
    pub patience: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            hidden: 200,
            batch_size: 64,
            epochs: 100,
            schedule: Schedule::default(),
            encoder_activation: Activation::Relu,
            holdout_fraction: 0.1,
            patience: 10,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config(
                "pretrain hidden size must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("pretrain batch size must be positive".into()));
        }
        if self.epochs < 2 {
            return Err(Error::Config("pretrain epochs must be at least 2".into()));
        }
        if !(0.0..0.5).contains(&self.holdout_fraction) {
            return Err(Error::Config(format!(
                "holdout_fraction must be in [0, 0.5), got {}",
                self.holdout_fraction
            )));
        }
        self.schedule.validate()
    }
}

/// The frozen two-layer module: encoder |L| -> h, sigmoid decoder h -> |D|.
#[derive(Debug, Clone)]
pub struct PretrainedLabModule {
    encoder: DenseLayer,
    decoder: DenseLayer,
    pub hidden: usize,
    pub lab_vocab_fingerprint: String,
    pub diag_vocab_fingerprint: String,
    pub frozen: bool,
    pub seed: u64,
    pub config: PretrainConfig,
}

impl PretrainedLabModule {
    pub fn n_lab_items(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn n_diag_codes(&self) -> usize {
        self.decoder.out_dim()
    }

    /// Full proxy-task forward pass: hidden representation and per-code
    /// probabilities.
    pub fn forward(&self, x_lab: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (h, _) = self.encoder.forward(x_lab)?;
        let (y_hat, _) = self.decoder.forward(&h)?;
        Ok((h, y_hat))
    }

    /// Encoder-only forward pass for downstream fusion. Requires the
    /// module to be frozen; never mutates anything.
    pub fn encode(&self, x_lab: &[f64]) -> Result<Vec<f64>> {
        if !self.frozen {
            return Err(Error::Invalid(
                "encode called on an unfrozen lab module".into(),
            ));
        }
        let (h, _) = self.encoder.forward(x_lab)?;
        Ok(h)
    }

    pub fn encode_vector(&self, x_lab: &MultiHotVector) -> Result<Vec<f64>> {
        self.encode(&x_lab.to_f64())
    }

    /// Fails unless the supplied vocabularies are the ones the module was
    /// trained against.
    pub fn verify_vocabs(&self, diag_vocab: &Vocabulary, lab_vocab: &Vocabulary) -> Result<()> {
        let lab_fp = lab_vocab.fingerprint();
        if lab_fp != self.lab_vocab_fingerprint {
            return Err(Error::Fingerprint {
                what: "lab vocabulary",
                expected: self.lab_vocab_fingerprint.clone(),
                got: lab_fp,
            });
        }
        let diag_fp = diag_vocab.fingerprint();
        if diag_fp != self.diag_vocab_fingerprint {
            return Err(Error::Fingerprint {
                what: "diagnosis vocabulary",
                expected: self.diag_vocab_fingerprint.clone(),
                got: diag_fp,
            });
        }
        Ok(())
    }

    /// Content hash over the weight tensors, in checkpoint order.
    pub fn weight_checksum(&self) -> String {
        let mut bytes = Vec::new();
        for tensor in [
            self.encoder.weights().data(),
            self.encoder.bias(),
            self.decoder.weights().data(),
            self.decoder.bias(),
        ] {
            for v in tensor {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        sha256_hex(&bytes)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        if !self.frozen {
            return Err(Error::Invalid(
                "refusing to save an unfrozen lab module".into(),
            ));
        }
        write_json_atomic(path, &self.to_checkpoint())
    }

    pub fn to_checkpoint(&self) -> LabModuleCheckpoint {
        LabModuleCheckpoint {
            version: CHECKPOINT_VERSION.to_string(),
            kind: "lab_module".to_string(),
            hidden: self.hidden,
            n_lab_items: self.n_lab_items(),
            n_diag_codes: self.n_diag_codes(),
            encoder_activation: self.encoder.activation(),
            lab_vocab_fingerprint: self.lab_vocab_fingerprint.clone(),
            diag_vocab_fingerprint: self.diag_vocab_fingerprint.clone(),
            seed: self.seed,
            train_config: self.config.clone(),
            encoder_w: encode_f64s(self.encoder.weights().data()),
            encoder_b: encode_f64s(self.encoder.bias()),
            decoder_w: encode_f64s(self.decoder.weights().data()),
            decoder_b: encode_f64s(self.decoder.bias()),
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let ckpt: LabModuleCheckpoint = read_json(path)?;
        Self::from_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: LabModuleCheckpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version `{}`",
                ckpt.version
            )));
        }
        if ckpt.kind != "lab_module" {
            return Err(Error::Checkpoint(format!(
                "expected a lab_module checkpoint, got `{}`",
                ckpt.kind
            )));
        }
        let enc_w = decode_f64s(&ckpt.encoder_w, ckpt.hidden * ckpt.n_lab_items)?;
        let enc_b = decode_f64s(&ckpt.encoder_b, ckpt.hidden)?;
        let dec_w = decode_f64s(&ckpt.decoder_w, ckpt.n_diag_codes * ckpt.hidden)?;
        let dec_b = decode_f64s(&ckpt.decoder_b, ckpt.n_diag_codes)?;
        let encoder = DenseLayer::from_parts(
            Matrix::from_vec(ckpt.hidden, ckpt.n_lab_items, enc_w)?,
            enc_b,
            ckpt.encoder_activation,
        )?;
        let decoder = DenseLayer::from_parts(
            Matrix::from_vec(ckpt.n_diag_codes, ckpt.hidden, dec_w)?,
            dec_b,
            Activation::Sigmoid,
        )?;
        Ok(PretrainedLabModule {
            encoder,
            decoder,
            hidden: ckpt.hidden,
            lab_vocab_fingerprint: ckpt.lab_vocab_fingerprint,
            diag_vocab_fingerprint: ckpt.diag_vocab_fingerprint,
            frozen: true,
            seed: ckpt.seed,
            config: ckpt.train_config,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabModuleCheckpoint {
    pub version: String,
    pub kind: String,
    pub hidden: usize,
    pub n_lab_items: usize,
    pub n_diag_codes: usize,
    pub encoder_activation: Activation,
    pub lab_vocab_fingerprint: String,
    pub diag_vocab_fingerprint: String,
    pub seed: u64,
    pub train_config: PretrainConfig,
    pub encoder_w: String,
    pub encoder_b: String,
    pub decoder_w: String,
    pub decoder_b: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PretrainLog {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_loss: Vec<f64>,
    pub holdout_loss: Vec<f64>,
}

struct Net {
    encoder: DenseLayer,
    decoder: DenseLayer,
}

impl Net {
    fn loss_and_grads(
        &self,
        batch: &[&PretrainSample],
        enc_grads: &mut DenseGrads,
        dec_grads: &mut DenseGrads,
    ) -> Result<f64> {
        let mut total = 0.0;
        for sample in batch {
            let x = sample.x_lab.to_f64();
            let y = sample.y.to_f64();
            let (h, enc_cache) = self.encoder.forward(&x)?;
            let (y_hat, dec_cache) = self.decoder.forward(&h)?;
            let (loss, d_y_hat) = bce_loss(&y_hat, &y)?;
            total += loss;
            let d_h = self.decoder.backward(&dec_cache, &d_y_hat, dec_grads)?;
            self.encoder.backward(&enc_cache, &d_h, enc_grads)?;
        }
        Ok(total / batch.len() as f64)
    }

    fn mean_loss(&self, samples: &[&PretrainSample]) -> Result<f64> {
        let mut total = 0.0;
        for sample in samples {
            let x = sample.x_lab.to_f64();
            let (h, _) = self.encoder.forward(&x)?;
            let (y_hat, _) = self.decoder.forward(&h)?;
            let (loss, _) = bce_loss(&y_hat, &sample.y.to_f64())?;
            total += loss;
        }
        Ok(total / samples.len() as f64)
    }
}

/// Train the proxy task with minibatch Adam and return the frozen module.
pub fn train_pretrain(
    samples: &[PretrainSample],
    config: &PretrainConfig,
    diag_vocab: &Vocabulary,
    lab_vocab: &Vocabulary,
    seed: u64,
) -> Result<(PretrainedLabModule, PretrainLog)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty(
            "train_pretrain needs at least one sample".into(),
        ));
    }
    let n_lab = lab_vocab.size();
    let n_diag = diag_vocab.size();
    for s in samples {
        if s.x_lab.len() != n_lab || s.y.len() != n_diag {
            return Err(Error::Shape {
                context: "train_pretrain sample",
                expected: n_lab,
                got: s.x_lab.len(),
            });
        }
    }

    let mut rng = Rng::new(seed);
    let mut init_rng = rng.split();
    let mut net = Net {
        encoder: DenseLayer::new(
            n_lab,
            config.hidden,
            config.encoder_activation,
            &mut init_rng,
        ),
        decoder: DenseLayer::new(config.hidden, n_diag, Activation::Sigmoid, &mut init_rng),
    };

    // Holdout slice for early stopping, carved from a seeded shuffle.
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = rng.split();
    shuffle_rng.shuffle(&mut order);
    let n_holdout = if samples.len() >= 10 {
        ((samples.len() as f64) * config.holdout_fraction).round() as usize
    } else {
        0
    };
    let holdout: Vec<&PretrainSample> = order[..n_holdout].iter().map(|&i| &samples[i]).collect();
    let train_idx: Vec<usize> = order[n_holdout..].to_vec();

    let mut adam = AdamState::new(AdamConfig::default());
    let mut epoch_rng = rng.split();

    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_weights: Option<(DenseLayer, DenseLayer)> = None;
    let mut since_best = 0usize;
    let mut train_losses = Vec::new();
    let mut holdout_losses = Vec::new();
    let mut epochs_run = 0usize;

    for epoch in 0..config.epochs {
        epochs_run = epoch + 1;
        let lr = config.schedule.lr_at(epoch, config.epochs)?;
        let mut idx = train_idx.clone();
        epoch_rng.shuffle(&mut idx);

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in idx.chunks(config.batch_size) {
            let batch: Vec<&PretrainSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let mut enc_grads = DenseGrads::zeros(&net.encoder);
            let mut dec_grads = DenseGrads::zeros(&net.decoder);
            let loss = net.loss_and_grads(&batch, &mut enc_grads, &mut dec_grads)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let scale = 1.0 / batch.len() as f64;
            enc_grads.scale(scale);
            dec_grads.scale(scale);
            adam.begin_step();
            adam.update(
                "encoder_w",
                net.encoder.weights_mut().data_mut(),
                enc_grads.dw.data(),
                lr,
            )?;
            adam.update("encoder_b", net.encoder.bias_mut(), &enc_grads.db, lr)?;
            adam.update(
                "decoder_w",
                net.decoder.weights_mut().data_mut(),
                dec_grads.dw.data(),
                lr,
            )?;
            adam.update("decoder_b", net.decoder.bias_mut(), &dec_grads.db, lr)?;
            epoch_loss += loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;
        train_losses.push(train_loss);

        let monitor = if holdout.is_empty() {
            train_loss
        } else {
            let hl = net.mean_loss(&holdout)?;
            holdout_losses.push(hl);
            hl
        };
        if !monitor.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        if monitor < best_loss {
            best_loss = monitor;
            best_epoch = epoch;
            best_weights = Some((net.encoder.clone(), net.decoder.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                log::debug(format!(
                    "pretraining stopped early at epoch {epoch} (best {best_epoch})"
                ));
                break;
            }
        }
    }

    let (encoder, decoder) = best_weights.unwrap_or((net.encoder, net.decoder));
    let module = PretrainedLabModule {
        encoder,
        decoder,
        hidden: config.hidden,
        lab_vocab_fingerprint: lab_vocab.fingerprint(),
        diag_vocab_fingerprint: diag_vocab.fingerprint(),
        frozen: true,
        seed,
        config: config.clone(),
    };
    let log = PretrainLog {
        epochs_run,
        best_epoch,
        train_loss: train_losses,
        holdout_loss: holdout_losses,
    };
    Ok((module, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::vocab::VocabKind;

    fn vocabs(n_lab: usize, n_diag: usize) -> (Vocabulary, Vocabulary) {
        let diag = Vocabulary::build(
            VocabKind::Diagnosis,
            (0..n_diag).map(|i| format!("d{i:03}")),
        );
        let lab = Vocabulary::build(VocabKind::Lab, (0..n_lab).map(|i| format!("l{i:03}")));
        (diag, lab)
    }

    fn sample(x_bits: &[usize], y_bits: &[usize], n_lab: usize, n_diag: usize) -> PretrainSample {
        PretrainSample {
            patient_id: "p".into(),
            x_lab: MultiHotVector::from_indices(n_lab, x_bits.iter().copied()).unwrap(),
            y: MultiHotVector::from_indices(n_diag, y_bits.iter().copied()).unwrap(),
            n_visits: 1,
        }
    }

    #[test]
    fn integrate_singleton_is_identity() {
        let v = MultiHotVector::from_bits(vec![true, false, true]);
        assert_eq!(integrate(std::slice::from_ref(&v)).unwrap(), v);
    }

    #[test]
    fn integrate_is_elementwise_or() {
        let a = MultiHotVector::from_bits(vec![true, false, true]);
        let b = MultiHotVector::from_bits(vec![false, false, true]);
        let out = integrate(&[a, b]).unwrap();
        assert_eq!(out.bits(), &[true, false, true]);
    }

    #[test]
    fn integrate_rejects_empty_and_mismatched() {
        assert!(integrate(&[]).is_err());
        let a = MultiHotVector::new(3);
        let b = MultiHotVector::new(4);
        assert!(integrate(&[a, b]).is_err());
    }

    #[test]
    fn zero_weight_module_outputs_half() {
        let (diag, lab) = vocabs(5, 4);
        let module = PretrainedLabModule {
            encoder: DenseLayer::zeros(5, 3, Activation::Relu),
            decoder: DenseLayer::zeros(3, 4, Activation::Sigmoid),
            hidden: 3,
            lab_vocab_fingerprint: lab.fingerprint(),
            diag_vocab_fingerprint: diag.fingerprint(),
            frozen: true,
            seed: 0,
            config: PretrainConfig::default(),
        };
        let (h, y_hat) = module.forward(&[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(y_hat.len(), 4);
        assert!(y_hat.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn memorizes_a_single_sample() {
        let (diag, lab) = vocabs(6, 5);
        // Constant learning rate: the decaying default starves a
        // 200-step run of total movement.
        let config = PretrainConfig {
            hidden: 8,
            epochs: 200,
            patience: 200,
            holdout_fraction: 0.0,
            schedule: Schedule::Geometric {
                lr_start: 1e-2,
                lr_end: 1e-2,
            },
            ..PretrainConfig::default()
        };
        let samples = vec![sample(&[0, 2], &[1, 3], 6, 5)];
        let (module, log) = train_pretrain(&samples, &config, &diag, &lab, 3).unwrap();
        let (_, y_hat) = module.forward(&samples[0].x_lab.to_f64()).unwrap();
        let (loss, _) = bce_loss(&y_hat, &samples[0].y.to_f64()).unwrap();
        assert!(
            loss < 0.01,
            "memorization loss {loss} after {} epochs",
            log.epochs_run
        );
    }

    #[test]
    fn same_seed_gives_identical_weights() {
        let (diag, lab) = vocabs(6, 5);
        let config = PretrainConfig {
            hidden: 4,
            epochs: 5,
            ..PretrainConfig::default()
        };
        let samples: Vec<PretrainSample> = (0..20)
            .map(|i| sample(&[i % 6, (i + 2) % 6], &[i % 5], 6, 5))
            .collect();
        let (m1, _) = train_pretrain(&samples, &config, &diag, &lab, 11).unwrap();
        let (m2, _) = train_pretrain(&samples, &config, &diag, &lab, 11).unwrap();
        assert_eq!(m1.weight_checksum(), m2.weight_checksum());
    }

    #[test]
    fn encode_requires_frozen() {
        let (diag, lab) = vocabs(3, 2);
        let mut module = PretrainedLabModule {
            encoder: DenseLayer::zeros(3, 2, Activation::Relu),
            decoder: DenseLayer::zeros(2, 2, Activation::Sigmoid),
            hidden: 2,
            lab_vocab_fingerprint: lab.fingerprint(),
            diag_vocab_fingerprint: diag.fingerprint(),
            frozen: false,
            seed: 0,
            config: PretrainConfig::default(),
        };
        assert!(module.encode(&[0.0, 0.0, 0.0]).is_err());
        module.frozen = true;
        let h = module.encode(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(h.len(), 2);
        // Purity: repeated calls agree bitwise and match forward's hidden part.
        let h2 = module.encode(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(h, h2);
        let (h3, _) = module.forward(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(h, h3);
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let (diag, lab) = vocabs(7, 4);
        let config = PretrainConfig {
            hidden: 5,
            epochs: 3,
            ..PretrainConfig::default()
        };
        let samples: Vec<PretrainSample> =
            (0..12).map(|i| sample(&[i % 7], &[i % 4], 7, 4)).collect();
        let (module, _) = train_pretrain(&samples, &config, &diag, &lab, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("module.json");
        module.save(&path).unwrap();
        let loaded = PretrainedLabModule::load(&path).unwrap();
        assert_eq!(module.weight_checksum(), loaded.weight_checksum());
        assert!(loaded.frozen);
        assert_eq!(loaded.hidden, 5);
        loaded.verify_vocabs(&diag, &lab).unwrap();
    }

    #[test]
    fn wrong_vocabulary_fails_fingerprint_check() {
        let (diag, lab) = vocabs(3, 2);
        let module = PretrainedLabModule {
            encoder: DenseLayer::zeros(3, 2, Activation::Relu),
            decoder: DenseLayer::zeros(2, 2, Activation::Sigmoid),
            hidden: 2,
            lab_vocab_fingerprint: lab.fingerprint(),
            diag_vocab_fingerprint: diag.fingerprint(),
            frozen: true,
            seed: 0,
            config: PretrainConfig::default(),
        };
        let (_, other_lab) = vocabs(4, 2);
        let err = module.verify_vocabs(&diag, &other_lab).unwrap_err();
        assert!(matches!(err, Error::Fingerprint { .. }));
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let (diag, lab) = vocabs(3, 2);
        let module = PretrainedLabModule {
            encoder: DenseLayer::zeros(3, 2, Activation::Relu),
            decoder: DenseLayer::zeros(2, 2, Activation::Sigmoid),
            hidden: 2,
            lab_vocab_fingerprint: lab.fingerprint(),
            diag_vocab_fingerprint: diag.fingerprint(),
            frozen: true,
            seed: 0,
            config: PretrainConfig::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("module.json");
        module.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(PretrainedLabModule::load(&path).is_err());
    }
}
