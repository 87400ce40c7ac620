use crate::error::{Error, Result};
use crate::nn::dense::PROB_CLAMP;

/// Mean element-wise binary cross entropy and its gradient with respect
/// to the predictions. Predictions are clamped into
/// [PROB_CLAMP, 1 - PROB_CLAMP] before the logarithms, since the loss is
/// undefined at exactly 0 or 1.
pub fn bce_loss(y_hat: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if y_hat.len() != y.len() {
        return Err(Error::Shape {
            context: "bce_loss",
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y_hat.is_empty() {
        return Err(Error::Empty("bce_loss on empty vectors".into()));
    }
    let n = y_hat.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; y_hat.len()];
    for i in 0..y_hat.len() {
        if !y_hat[i].is_finite() || !y[i].is_finite() {
            return Err(Error::Invalid(format!(
                "bce_loss: non-finite input at index {i}"
            )));
        }
        let p = y_hat[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let t = y[i];
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        grad[i] = (p - t) / (p * (1.0 - p)) / n;
    }
    Ok((loss / n, grad))
}
