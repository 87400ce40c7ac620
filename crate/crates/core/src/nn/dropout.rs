use crate::error::{Error, Result};
use crate::rng::Rng;

/// Inverted dropout. During training each element is kept with
/// probability 1 - rate and scaled by 1/(1 - rate); at inference the
/// input passes through untouched.
pub fn dropout_forward(
    x: &[f64],
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.to_vec(), vec![true; x.len()]));
    }
    let keep = 1.0 - rate;
    let inv = 1.0 / keep;
    let mut y = vec![0.0; x.len()];
    let mut mask = vec![false; x.len()];
    for i in 0..x.len() {
        if rng.bernoulli(keep) {
            mask[i] = true;
            y[i] = x[i] * inv;
        }
    }
    Ok((y, mask))
}

pub fn dropout_backward(dy: &[f64], mask: &[bool], rate: f64) -> Vec<f64> {
    if rate == 0.0 {
        return dy.to_vec();
    }
    let inv = 1.0 / (1.0 - rate);
    dy.iter()
        .zip(mask)
        .map(|(&d, &m)| if m { d * inv } else { 0.0 })
        .collect()
}
