use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::matrix::Matrix;
use crate::rng::Rng;

/// Sigmoid outputs are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] so that
/// log-losses stay finite and gradients stay well defined.
pub const PROB_CLAMP: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative dy/dz, given both pre-activation and output.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected layer y = activation(W x + b) with W of shape out×in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    w: Matrix,
    b: Vec<f64>,
    activation: Activation,
}

/// Values retained by the forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
}

/// Parameter gradients, accumulated across a batch.
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros(layer: &DenseLayer) -> Self {
        DenseGrads {
            dw: Matrix::zeros(layer.w.rows(), layer.w.cols()),
            db: vec![0.0; layer.b.len()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.dw.scale(s);
        for v in &mut self.db {
            *v *= s;
        }
    }
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut Rng) -> Self {
        DenseLayer {
            w: Matrix::glorot(out_dim, in_dim, rng),
            b: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            w: Matrix::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn from_parts(w: Matrix, b: Vec<f64>, activation: Activation) -> Result<Self> {
        if b.len() != w.rows() {
            return Err(Error::Shape {
                context: "DenseLayer::from_parts",
                expected: w.rows(),
                got: b.len(),
            });
        }
        Ok(DenseLayer { w, b, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn bias_mut(&mut self) -> &mut Vec<f64> {
        &mut self.b
    }

    /// Simultaneous mutable access to weights and bias.
    pub fn parts_mut(&mut self) -> (&mut Matrix, &mut [f64]) {
        (&mut self.w, &mut self.b)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, DenseCache)> {
        let mut z = self.w.matvec(x)?;
        for (zi, bi) in z.iter_mut().zip(&self.b) {
            *zi += bi;
        }
        let y: Vec<f64> = z.iter().map(|&zi| self.activation.apply(zi)).collect();
        Ok((
            y.clone(),
            DenseCache {
                x: x.to_vec(),
                z,
                y,
            },
        ))
    }

    /// Backpropagate `dy` through the layer, accumulating parameter
    /// gradients into `grads` and returning the input gradient.
    pub fn backward(
        &self,
        cache: &DenseCache,
        dy: &[f64],
        grads: &mut DenseGrads,
    ) -> Result<Vec<f64>> {
        if dy.len() != self.out_dim() {
            return Err(Error::Shape {
                context: "DenseLayer::backward",
                expected: self.out_dim(),
                got: dy.len(),
            });
        }
        let dz: Vec<f64> = dy
            .iter()
            .zip(cache.z.iter().zip(&cache.y))
            .map(|(&d, (&z, &y))| d * self.activation.derivative(z, y))
            .collect();
        grads.dw.add_outer(&dz, &cache.x)?;
        for (g, d) in grads.db.iter_mut().zip(&dz) {
            *g += d;
        }
        self.w.matvec_t(&dz)
    }
}
