//! Exact posterior predictor over the planted generative model.
//!
//! The latent disease set has a fixed size k with a uniform prior over all
//! C(|D|, k) subsets, and lab observations are conditionally independent
//! given the union of the implied lab items. The posterior marginal
//! P(d in latent | labs) is therefore computable by direct enumeration of
//! the subsets, which stays cheap at the desk scales this generator is
//! meant for. Ranking diagnoses by that marginal is a ceiling no learned
//! predictor of the proxy task can beat in expectation.

use crate::ehr::multihot::MultiHotVector;
use crate::error::{Error, Result};
use crate::synth::GroundTruth;

const MAX_SUBSETS: u128 = 2_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
        if acc > MAX_SUBSETS * 1000 {
            return u128::MAX;
        }
    }
    acc
}

/// Advance `idx` to the next k-combination of 0..n in lexicographic
/// order; false when exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] != n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub struct BayesOracle {
    n_diseases: usize,
    subset_size: usize,
    flip_noise: f64,
    n_items: usize,
    words: usize,
    /// Bitmask of implied lab items per disease.
    masks: Vec<Vec<u64>>,
}

impl BayesOracle {
    pub fn new(gt: &GroundTruth) -> Result<Self> {
        let n_diseases = gt.config.n_diag_codes;
        let subset_size = gt.config.diseases_per_patient;
        let count = binomial(n_diseases, subset_size);
        if count > MAX_SUBSETS {
            return Err(Error::Invalid(format!(
                "posterior enumeration over C({n_diseases}, {subset_size}) subsets is too large"
            )));
        }
        let n_items = gt.config.n_lab_items;
        let words = n_items.div_ceil(64);
        let mut masks = vec![vec![0u64; words]; n_diseases];
        for (d, labs) in gt.disease_labs.iter().enumerate() {
            for &item in labs {
                if item >= n_items {
                    return Err(Error::Invalid(format!(
                        "disease {d} implies lab item {item} outside the vocabulary"
                    )));
                }
                masks[d][item / 64] |= 1u64 << (item % 64);
            }
        }
        Ok(BayesOracle {
            n_diseases,
            subset_size,
            flip_noise: gt.config.lab_flip_noise,
            n_items,
            words,
            masks,
        })
    }

    fn for_each_subset(&self, mut f: impl FnMut(&[usize], &[u64])) {
        let k = self.subset_size;
        let mut idx: Vec<usize> = (0..k).collect();
        let mut union = vec![0u64; self.words];
        loop {
            union.fill(0);
            for &d in &idx {
                for w in 0..self.words {
                    union[w] |= self.masks[d][w];
                }
            }
            f(&idx, &union);
            if !next_combination(&mut idx, self.n_diseases) {
                return;
            }
        }
    }

    /// Posterior marginals P(d in latent set | integrated lab vector),
    /// where the vector is an OR over `n_lab_visits` independently
    /// noise-flipped observations of the true pattern.
    pub fn disease_posterior(
        &self,
        labs: &MultiHotVector,
        n_lab_visits: usize,
    ) -> Result<Vec<f64>> {
        if labs.len() != self.n_items {
            return Err(Error::Shape {
                context: "BayesOracle::disease_posterior",
                expected: self.n_items,
                got: labs.len(),
            });
        }
        if n_lab_visits == 0 {
            return Err(Error::Invalid(
                "oracle needs at least one lab-observed visit".into(),
            ));
        }
        let mut x_words = vec![0u64; self.words];
        for i in labs.iter_ones() {
            x_words[i / 64] |= 1u64 << (i % 64);
        }

        let eps = self.flip_noise;
        if eps == 0.0 {
            // Noiseless: the posterior is uniform over subsets whose union
            // matches the observation exactly.
            let mut total = 0.0f64;
            let mut per_disease = vec![0.0f64; self.n_diseases];
            self.for_each_subset(|idx, union| {
                if union == x_words.as_slice() {
                    total += 1.0;
                    for &d in idx {
                        per_disease[d] += 1.0;
                    }
                }
            });
            if total == 0.0 {
                // Observation inconsistent with the model; fall back to the prior.
                let prior = self.subset_size as f64 / self.n_diseases as f64;
                return Ok(vec![prior; self.n_diseases]);
            }
            return Ok(per_disease.iter().map(|c| c / total).collect());
        }

        // P(observed bit | union bit) for an OR of t noisy observations.
        let t = n_lab_visits as f64;
        let p_obs1_given_u1 = 1.0 - eps.powf(t);
        let p_obs1_given_u0 = 1.0 - (1.0 - eps).powf(t);
        // Log-likelihood delta of flipping a union bit from 0 to 1, per item.
        let mut delta = vec![0.0f64; self.n_items];
        for (i, d) in delta.iter_mut().enumerate() {
            let observed = x_words[i / 64] >> (i % 64) & 1 == 1;
            *d = if observed {
                p_obs1_given_u1.ln() - p_obs1_given_u0.ln()
            } else {
                (1.0 - p_obs1_given_u1).ln() - (1.0 - p_obs1_given_u0).ln()
            };
        }

        let log_weight = |union: &[u64]| -> f64 {
            let mut acc = 0.0;
            for (w, &bits) in union.iter().enumerate() {
                let mut b = bits;
                while b != 0 {
                    let bit = b.trailing_zeros() as usize;
                    acc += delta[w * 64 + bit];
                    b &= b - 1;
                }
            }
            acc
        };

        let mut max_log = f64::NEG_INFINITY;
        self.for_each_subset(|_, union| {
            let lw = log_weight(union);
            if lw > max_log {
                max_log = lw;
            }
        });
        if max_log == f64::NEG_INFINITY {
            let prior = self.subset_size as f64 / self.n_diseases as f64;
            return Ok(vec![prior; self.n_diseases]);
        }
        let mut total = 0.0f64;
        let mut per_disease = vec![0.0f64; self.n_diseases];
        self.for_each_subset(|idx, union| {
            let w = (log_weight(union) - max_log).exp();
            total += w;
            for &d in idx {
                per_disease[d] += w;
            }
        });
        Ok(per_disease.iter().map(|c| c / total).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn tiny_gt(distinct: bool, eps: f64) -> GroundTruth {
        let config = SynthConfig {
            n_patients: 10,
            n_diag_codes: 6,
            n_lab_items: 12,
            diseases_per_patient: 2,
            labs_per_disease: 2,
            distinct_disease_labs: distinct,
            lab_flip_noise: eps,
            seed: 9,
            ..SynthConfig::default()
        };
        generate(&config).unwrap().ground_truth
    }

    #[test]
    fn noiseless_unique_union_recovers_the_subset() {
        let gt = tiny_gt(true, 0.0);
        let oracle = BayesOracle::new(&gt).unwrap();
        // Plant diseases {1, 4}: their unions are disjoint by construction.
        let mut labs = MultiHotVector::new(12);
        for &d in &[1usize, 4] {
            for &item in &gt.disease_labs[d] {
                labs.set(item, true);
            }
        }
        let q = oracle.disease_posterior(&labs, 1).unwrap();
        assert!((q[1] - 1.0).abs() < 1e-12);
        assert!((q[4] - 1.0).abs() < 1e-12);
        for d in [0usize, 2, 3, 5] {
            assert!(q[d].abs() < 1e-12);
        }
    }

    #[test]
    fn posteriors_are_probabilities_summing_to_subset_size() {
        let gt = tiny_gt(false, 0.15);
        let oracle = BayesOracle::new(&gt).unwrap();
        let mut labs = MultiHotVector::new(12);
        labs.set(0, true);
        labs.set(5, true);
        let q = oracle.disease_posterior(&labs, 2).unwrap();
        let sum: f64 = q.iter().sum();
        assert!((sum - 2.0).abs() < 1e-9, "marginals sum to k, got {sum}");
        assert!(q.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn inconsistent_noiseless_observation_falls_back_to_prior() {
        let gt = tiny_gt(true, 0.0);
        let oracle = BayesOracle::new(&gt).unwrap();
        // A single abnormal item cannot be a union of two disjoint 2-item sets.
        let mut labs = MultiHotVector::new(12);
        labs.set(0, true);
        let q = oracle.disease_posterior(&labs, 1).unwrap();
        let prior = 2.0 / 6.0;
        assert!(q.iter().all(|&v| (v - prior).abs() < 1e-12));
    }

    #[test]
    fn oversized_enumeration_is_rejected() {
        let config = SynthConfig {
            n_patients: 1,
            n_diag_codes: 300,
            n_lab_items: 310,
            diseases_per_patient: 8,
            labs_per_disease: 1,
            ..SynthConfig::default()
        };
        let gt = generate(&config).unwrap().ground_truth;
        assert!(BayesOracle::new(&gt).is_err());
    }
}
