use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-epoch learning-rate schedule. The default geometric form decays
/// from `lr_start` at epoch 0 to `lr_end` at the final epoch, hitting both
/// endpoints exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schedule {
    Geometric {
        lr_start: f64,
        lr_end: f64,
    },
    Step {
        lr_start: f64,
        decay: f64,
        every: usize,
    },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric {
            lr_start: 1e-2,
            lr_end: 1e-5,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Geometric { lr_start, lr_end } => {
                if !(lr_start > 0.0 && lr_end > 0.0 && lr_end <= lr_start) {
                    return Err(Error::Config(format!(
                        "geometric schedule requires 0 < lr_end <= lr_start, got {lr_start} -> {lr_end}"
                    )));
                }
            }
            Schedule::Step {
                lr_start,
                decay,
                every,
            } => {
                if !(lr_start > 0.0 && decay > 0.0 && decay <= 1.0 && every > 0) {
                    return Err(Error::Config(format!(
                        "step schedule requires lr_start > 0, 0 < decay <= 1, every > 0; got lr_start={lr_start} decay={decay} every={every}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize, total_epochs: usize) -> Result<f64> {
        if total_epochs < 2 {
            return Err(Error::Config(format!(
                "schedule requires at least 2 epochs, got {total_epochs}"
            )));
        }
        if epoch >= total_epochs {
            return Err(Error::Config(format!(
                "epoch {epoch} out of range for {total_epochs} epochs"
            )));
        }
        Ok(match *self {
            Schedule::Geometric { lr_start, lr_end } => {
                if epoch == 0 {
                    lr_start
                } else if epoch == total_epochs - 1 {
                    lr_end
                } else {
                    let frac = epoch as f64 / (total_epochs - 1) as f64;
                    lr_start * (lr_end / lr_start).powf(frac)
                }
            }
            Schedule::Step {
                lr_start,
                decay,
                every,
            } => lr_start * decay.powi((epoch / every) as i32),
        })
    }
}

/// Default geometric decay from 1e-2 to 1e-5.
pub fn lr_schedule(epoch: usize, total_epochs: usize) -> Result<f64> {
    Schedule::default().lr_at(epoch, total_epochs)
}
