//! Deterministic from-scratch numerical kernels: dense layers, a GRU with
//! backpropagation through time, dropout, binary cross entropy, Adam, the
//! learning-rate schedule, and finite-difference gradient checking.
//!
//! All math is in 64-bit floats. Forward passes are pure functions; the
//! only mutable state is optimizer moments owned by a training loop.

pub mod adam;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod matrix;
pub mod schedule;

pub use adam::{AdamConfig, AdamState};
pub use dense::{sigmoid, Activation, DenseCache, DenseGrads, DenseLayer, PROB_CLAMP};
pub use dropout::{dropout_backward, dropout_forward};
pub use gradcheck::grad_check;
pub use gru::{GruCache, GruGrads, GruLayer};
pub use loss::bce_loss;
pub use matrix::Matrix;
pub use schedule::{lr_schedule, Schedule};
