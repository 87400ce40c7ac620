//! Evaluation metrics: Recall@k, weighted F1, ROC-AUC (Mann-Whitney),
//! binary F1, and repeated-run aggregation. All functions are pure and
//! deterministic; score ties resolve by ascending index.

pub mod report;

use crate::ehr::multihot::MultiHotVector;
use crate::error::{Error, Result};
use crate::log;

pub use report::{aggregate_runs, MetricValues, MetricsReport, RunMetrics};

fn check_finite(scores: &[f64], context: &str) -> Result<()> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("{context}: non-finite score")));
    }
    Ok(())
}

/// Indices of the k highest scores, ties broken by ascending index.
fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores checked finite")
            .then_with(|| a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Recall@k for one sample: |top-k ∩ positives| / |positives|.
///
/// The denominator is the full positive count by default; with `capped`
/// it is min(|positives|, k).
pub fn recall_at_k(scores: &[f64], truth: &MultiHotVector, k: usize, capped: bool) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            context: "recall_at_k",
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if k == 0 {
        return Err(Error::Metric("recall_at_k requires k >= 1".into()));
    }
    check_finite(scores, "recall_at_k")?;
    let positives = truth.count_ones();
    if positives == 0 {
        return Err(Error::Metric(
            "recall_at_k on a sample with no positives".into(),
        ));
    }
    let hits = top_k_indices(scores, k)
        .into_iter()
        .filter(|&i| truth.get(i))
        .count();
    let denom = if capped { positives.min(k) } else { positives };
    Ok(hits as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecall {
    pub value: f64,
    /// Samples skipped because they carry no positive labels.
    pub skipped: usize,
}

/// Mean Recall@k over samples; positive-free samples are skipped and counted.
pub fn recall_at_k_dataset(
    scores: &[Vec<f64>],
    truth: &[MultiHotVector],
    k: usize,
    capped: bool,
) -> Result<DatasetRecall> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            context: "recall_at_k_dataset",
            expected: truth.len(),
            got: scores.len(),
        });
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for (s, t) in scores.iter().zip(truth) {
        if t.count_ones() == 0 {
            skipped += 1;
            continue;
        }
        total += recall_at_k(s, t, k, capped)?;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::Metric(
            "recall_at_k_dataset: every sample was positive-free".into(),
        ));
    }
    Ok(DatasetRecall {
        value: total / counted as f64,
        skipped,
    })
}

/// Prevalence-weighted F1 across labels at a decision threshold.
///
/// Per-label F1 values are combined with weights proportional to each
/// label's support; zero-support labels are excluded from the weighting.
pub fn weighted_f1(scores: &[Vec<f64>], truth: &[MultiHotVector], threshold: f64) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            context: "weighted_f1 rows",
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("weighted_f1 on an empty dataset".into()));
    }
    let n_labels = truth[0].len();
    for (s, t) in scores.iter().zip(truth) {
        if s.len() != n_labels || t.len() != n_labels {
            return Err(Error::Shape {
                context: "weighted_f1 row",
                expected: n_labels,
                got: if s.len() != n_labels {
                    s.len()
                } else {
                    t.len()
                },
            });
        }
        check_finite(s, "weighted_f1")?;
    }

    let mut tp = vec![0u64; n_labels];
    let mut fp = vec![0u64; n_labels];
    let mut fn_ = vec![0u64; n_labels];
    for (s, t) in scores.iter().zip(truth) {
        for j in 0..n_labels {
            let predicted = s[j] >= threshold;
            let actual = t.get(j);
            match (predicted, actual) {
                (true, true) => tp[j] += 1,
                (true, false) => fp[j] += 1,
                (false, true) => fn_[j] += 1,
                (false, false) => {}
            }
        }
    }

    let mut total_support = 0u64;
    let mut acc = 0.0;
    for j in 0..n_labels {
        let support = tp[j] + fn_[j];
        if support == 0 {
            continue;
        }
        total_support += support;
        let denom = 2 * tp[j] + fp[j] + fn_[j];
        let f1 = if denom == 0 {
            0.0
        } else {
            2.0 * tp[j] as f64 / denom as f64
        };
        acc += support as f64 * f1;
    }
    if total_support == 0 {
        return Err(Error::Metric(
            "weighted_f1: truth matrix has no positives".into(),
        ));
    }
    Ok(acc / total_support as f64)
}

/// ROC-AUC via the Mann-Whitney statistic: the probability that a random
/// positive outscores a random negative, ties counting one half.
///
/// Computed from average ranks in O(n log n); the all-pairs definition is
/// kept as the test oracle.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            context: "roc_auc",
            expected: labels.len(),
            got: scores.len(),
        });
    }
    check_finite(scores, "roc_auc")?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "roc_auc undefined with {pos} positives and {neg} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));

    // Average ranks over tied score groups (1-based ranks).
    let mut rank_sum_pos = 0.0;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    let n = neg as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Binary F1 at a decision threshold. With no predicted and no actual
/// positives the score is defined as 0 and a warning is logged.
pub fn binary_f1(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape {
            context: "binary_f1",
            expected: labels.len(),
            got: scores.len(),
        });
    }
    check_finite(scores, "binary_f1")?;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        match (predicted, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        log::warn("binary_f1: no predicted and no actual positives; defining F1 = 0");
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mh(bits: &[bool]) -> MultiHotVector {
        MultiHotVector::from_bits(bits.to_vec())
    }

    #[test]
    fn recall_perfect_ranking_is_one() {
        let truth = mh(&[true, true, false, false]);
        let scores = [0.9, 0.8, 0.2, 0.1];
        assert_eq!(recall_at_k(&scores, &truth, 2, false).unwrap(), 1.0);
    }

    #[test]
    fn recall_uniform_scores_top_k_covers_all() {
        let truth = mh(&[
            false, true, false, false, false, false, true, false, false, false,
        ]);
        let scores = [0.5; 10];
        assert_eq!(recall_at_k(&scores, &truth, 10, false).unwrap(), 1.0);
    }

    #[test]
    fn recall_ties_break_by_ascending_index() {
        // Positives at 2 and 3; all scores tied; k = 2 selects indices 0, 1.
        let truth = mh(&[false, false, true, true]);
        let scores = [0.7; 4];
        assert_eq!(recall_at_k(&scores, &truth, 2, false).unwrap(), 0.0);
    }

    #[test]
    fn recall_uncapped_vs_capped_denominator() {
        // 3 positives, k = 2, both in top-2.
        let truth = mh(&[true, true, true, false]);
        let scores = [0.9, 0.8, 0.1, 0.0];
        assert!((recall_at_k(&scores, &truth, 2, false).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&scores, &truth, 2, true).unwrap(), 1.0);
    }

    #[test]
    fn recall_no_positives_is_error_and_dataset_skips() {
        let truth = mh(&[false, false]);
        let scores = [0.5, 0.5];
        assert!(recall_at_k(&scores, &truth, 1, false).is_err());
        let ds = recall_at_k_dataset(
            &[vec![0.9, 0.1], vec![0.5, 0.5]],
            &[mh(&[true, false]), mh(&[false, false])],
            1,
            false,
        )
        .unwrap();
        assert_eq!(ds.value, 1.0);
        assert_eq!(ds.skipped, 1);
    }

    #[test]
    fn recall_monotone_in_k() {
        let truth = mh(&[true, false, true, false, true, false]);
        let scores = [0.3, 0.9, 0.2, 0.8, 0.7, 0.1];
        let mut prev = 0.0;
        for k in 1..=6 {
            let r = recall_at_k(&scores, &truth, k, false).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn weighted_f1_perfect_predictions() {
        let truth = vec![mh(&[true, false]), mh(&[false, true])];
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        assert_eq!(weighted_f1(&scores, &truth, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn weighted_f1_single_label_closed_form() {
        // One label: TP = 1, FP = 1, FN = 1 -> F1 = 2TP/(2TP+FP+FN) = 1/2.
        let truth = vec![mh(&[true]), mh(&[false]), mh(&[true])];
        let scores = vec![vec![0.9], vec![0.9], vec![0.1]];
        let f1 = weighted_f1(&scores, &truth, 0.5).unwrap();
        assert!((f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weighted_f1_weights_by_support() {
        // Label 0: support 2, perfect. Label 1: support 1, F1 = 2/3
        // (TP=1, FP=1). Weighted: (2*1 + 1*(2/3)) / 3.
        let truth = vec![mh(&[true, true]), mh(&[true, false]), mh(&[false, false])];
        let scores = vec![vec![0.9, 0.9], vec![0.9, 0.9], vec![0.1, 0.1]];
        let f1 = weighted_f1(&scores, &truth, 0.5).unwrap();
        let expected = (2.0 * 1.0 + 1.0 * (2.0 / 3.0)) / 3.0;
        assert!((f1 - expected).abs() < 1e-15);
    }

    #[test]
    fn weighted_f1_all_zero_truth_is_error() {
        let truth = vec![mh(&[false, false])];
        let scores = vec![vec![0.9, 0.1]];
        assert!(weighted_f1(&scores, &truth, 0.5).is_err());
    }

    #[test]
    fn auc_separated_is_one_and_ties_are_half() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5, 0.5, 0.5, 0.5], &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_known_value() {
        let labels = [false, false, true, true];
        let scores = [0.1, 0.4, 0.35, 0.8];
        assert!((roc_auc(&scores, &labels).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_is_error_not_zero() {
        assert!(roc_auc(&[0.5, 0.6], &[true, true]).is_err());
        assert!(roc_auc(&[0.5, 0.6], &[false, false]).is_err());
    }

    #[test]
    fn binary_f1_closed_form() {
        // TP = 2, FP = 1, FN = 1 -> 2/3.
        let labels = [true, true, true, false];
        let scores = [0.9, 0.8, 0.1, 0.7];
        let f1 = binary_f1(&scores, &labels, 0.5).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn binary_f1_degenerate_case_is_zero() {
        let labels = [false, false];
        let scores = [0.1, 0.2];
        assert_eq!(binary_f1(&scores, &labels, 0.5).unwrap(), 0.0);
    }
}
