//! Central finite-difference gradient checking.
//!
//! `loss_fn` evaluates the loss and its full analytic gradient at a given
//! parameter vector. The checker perturbs each requested coordinate by
//! ±eps and compares the central difference against the analytic value.

/// Maximum relative error between analytic and finite-difference gradients
/// over the given coordinates (all coordinates when `coords` is empty).
///
/// The relative error uses an absolute floor in the denominator,
/// |a - b| / max(|a| + |b|, 1e-3), so that coordinates with vanishing
/// gradients do not drown the comparison in finite-difference noise.
pub fn grad_check<F>(mut loss_fn: F, params: &[f64], eps: f64, coords: &[usize]) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(params);
    assert_eq!(
        analytic.len(),
        params.len(),
        "gradient length must match parameter length"
    );
    let all: Vec<usize>;
    let coords = if coords.is_empty() {
        all = (0..params.len()).collect();
        &all
    } else {
        coords
    };
    let mut work = params.to_vec();
    let mut max_rel = 0.0f64;
    for &i in coords {
        let orig = work[i];
        work[i] = orig + eps;
        let (loss_plus, _) = loss_fn(&work);
        work[i] = orig - eps;
        let (loss_minus, _) = loss_fn(&work);
        work[i] = orig;
        let fd = (loss_plus - loss_minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-3);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn quadratic(p: &[f64]) -> (f64, Vec<f64>) {
        let loss = p.iter().map(|v| v * v).sum();
        let grad = p.iter().map(|v| 2.0 * v).collect();
        (loss, grad)
    }

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let mut rng = Rng::new(12);
        // Keep parameters away from zero so the relative error is meaningful.
        let params: Vec<f64> = (0..10)
            .map(|_| rng.uniform(0.5, 1.5) * if rng.bernoulli(0.5) { 1.0 } else { -1.0 })
            .collect();
        let err = grad_check(quadratic, &params, 1e-5, &[]);
        assert!(err <= 1e-9, "max relative error {err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let corrupt = |p: &[f64]| {
            let (loss, mut grad) = quadratic(p);
            grad[0] *= 2.0; // deliberately wrong
            (loss, grad)
        };
        let params = vec![1.0, -0.5, 0.25];
        let err = grad_check(corrupt, &params, 1e-5, &[]);
        assert!(err > 1e-2, "checker failed to flag corruption: {err}");
    }

    #[test]
    fn sampled_coordinates_are_honored() {
        // Corrupt coordinate 0 but only sample coordinate 1: no alarm.
        let corrupt = |p: &[f64]| {
            let (loss, mut grad) = quadratic(p);
            grad[0] += 1.0;
            (loss, grad)
        };
        let params = vec![1.0, 1.0];
        let err = grad_check(corrupt, &params, 1e-5, &[1]);
        assert!(err <= 1e-9);
    }
}
