//! Sequential backbone over admission histories.
//!
//! A GRU consumes the multi-hot diagnosis vector of each history visit and
//! the final hidden state is the patient representation. Only diagnosis
//! bits feed the backbone — lab signal reaches the classifier exclusively
//! through the frozen pretrained module, so any improvement from fusion is
//! attributable to it. An optional projection maps the hidden state to the
//! vocabulary dimension for strict-fidelity experiments.

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseGrads, DenseLayer, GruCache, GruGrads, GruLayer};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct BackboneModel {
    pub gru: GruLayer,
    pub projection: Option<DenseLayer>,
}

pub struct BackboneCache {
    gru: GruCache,
    projection: Option<crate::nn::DenseCache>,
}

#[derive(Debug, Clone)]
pub struct BackboneGrads {
    pub gru: GruGrads,
    pub projection: Option<DenseGrads>,
}

impl BackboneGrads {
    pub fn zeros(model: &BackboneModel) -> Self {
        BackboneGrads {
            gru: GruGrads::zeros(&model.gru),
            projection: model.projection.as_ref().map(DenseGrads::zeros),
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.gru.scale(s);
        if let Some(p) = &mut self.projection {
            p.scale(s);
        }
    }
}

impl BackboneModel {
    pub fn new(input_dim: usize, hidden: usize, project_to: Option<usize>, rng: &mut Rng) -> Self {
        let gru = GruLayer::new(input_dim, hidden, rng);
        let projection = project_to.map(|d| DenseLayer::new(hidden, d, Activation::Identity, rng));
        BackboneModel { gru, projection }
    }

    pub fn input_dim(&self) -> usize {
        self.gru.input_size()
    }

    /// Representation dimension: hidden size, or the projection output.
    pub fn output_dim(&self) -> usize {
        self.projection
            .as_ref()
            .map(|p| p.out_dim())
            .unwrap_or_else(|| self.gru.hidden_size())
    }

    /// Encode a non-empty history into its representation o_t.
    pub fn forward(&self, history: &[Vec<f64>]) -> Result<(Vec<f64>, BackboneCache)> {
        if history.is_empty() {
            return Err(Error::Empty("backbone forward on empty history".into()));
        }
        let h0 = vec![0.0; self.gru.hidden_size()];
        let (hidden, gru_cache) = self.gru.forward(history, &h0)?;
        let last = hidden.last().expect("non-empty sequence").clone();
        match &self.projection {
            None => Ok((
                last,
                BackboneCache {
                    gru: gru_cache,
                    projection: None,
                },
            )),
            Some(proj) => {
                let (o, cache) = proj.forward(&last)?;
                Ok((
                    o,
                    BackboneCache {
                        gru: gru_cache,
                        projection: Some(cache),
                    },
                ))
            }
        }
    }

    /// Backpropagate the representation gradient through the projection
    /// (when present) and the GRU.
    pub fn backward(
        &self,
        cache: &BackboneCache,
        d_output: &[f64],
        grads: &mut BackboneGrads,
    ) -> Result<()> {
        let d_hidden = match (&self.projection, &cache.projection) {
            (Some(proj), Some(pcache)) => {
                let pgrads = grads
                    .projection
                    .as_mut()
                    .expect("projection grads allocated with model");
                proj.backward(pcache, d_output, pgrads)?
            }
            (None, None) => d_output.to_vec(),
            _ => {
                return Err(Error::Invalid(
                    "backbone cache does not match model structure".into(),
                ));
            }
        };
        self.gru.backward(&cache.gru, &d_hidden, &mut grads.gru)?;
        Ok(())
    }
}

/// Sigmoid task head used by the plain (no-fusion) baseline: |D| outputs
/// for diagnosis prediction, one for heart failure.
pub fn baseline_head(input_dim: usize, task_dim: usize, rng: &mut Rng) -> DenseLayer {
    DenseLayer::new(input_dim, task_dim, Activation::Sigmoid, rng)
}
