//! Brute-force reference implementations used to cross-check the library.
//!
//! Everything here is deliberately naive — straight from the definitions,
//! independent of the code paths under test.

#![allow(dead_code)]

use mplite_core::ehr::MultiHotVector;
use mplite_core::Rng;

/// Element-wise OR by scanning every bit position with any().
pub fn or_oracle(vectors: &[MultiHotVector]) -> MultiHotVector {
    let len = vectors[0].len();
    let bits: Vec<bool> = (0..len).map(|i| vectors.iter().any(|v| v.get(i))).collect();
    MultiHotVector::from_bits(bits)
}

/// Recall@k by full sort-and-count: order candidates by (score desc,
/// index asc), take k, count how many are true positives.
pub fn recall_oracle(scores: &[f64], truth: &[bool], k: usize, capped: bool) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let hits = order.iter().take(k).filter(|&&i| truth[i]).count();
    let positives = truth.iter().filter(|&&t| t).count();
    let denom = if capped { positives.min(k) } else { positives };
    hits as f64 / denom as f64
}

/// Weighted F1 from per-label confusion matrices, built one count at a
/// time.
pub fn weighted_f1_oracle(scores: &[Vec<f64>], truth: &[Vec<bool>], threshold: f64) -> f64 {
    let n_labels = truth[0].len();
    let mut weighted_sum = 0.0;
    let mut support_sum = 0.0;
    for label in 0..n_labels {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for (s, t) in scores.iter().zip(truth) {
            let predicted = s[label] >= threshold;
            let actual = t[label];
            if predicted && actual {
                tp += 1.0;
            }
            if predicted && !actual {
                fp += 1.0;
            }
            if !predicted && actual {
                fn_ += 1.0;
            }
        }
        let support = tp + fn_;
        if support == 0.0 {
            continue;
        }
        let f1 = if 2.0 * tp + fp + fn_ == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fn_)
        };
        weighted_sum += support * f1;
        support_sum += support;
    }
    weighted_sum / support_sum
}

/// AUC as the literal Mann-Whitney statistic: iterate every
/// positive/negative pair, count wins, half-count ties.
pub fn auc_pairwise_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut acc = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                acc += 1.0;
            } else if scores[i] == scores[j] {
                acc += 0.5;
            }
        }
    }
    acc / pairs
}

/// Binary F1 via precision and recall.
pub fn binary_f1_oracle(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&s, &l) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        if predicted && l {
            tp += 1.0;
        }
        if predicted && !l {
            fp += 1.0;
        }
        if !predicted && l {
            fn_ += 1.0;
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    2.0 * precision * recall / (precision + recall)
}

/// Lab recency by full replay: the most recent event for the item with
/// timestamp <= `at` wins; ties on timestamp go to the later event in
/// input order.
pub fn recency_oracle(events: &[(String, bool, i64)], item: &str, at: i64) -> bool {
    let mut best: Option<(i64, usize, bool)> = None;
    for (pos, (code, abnormal, ts)) in events.iter().enumerate() {
        if code == item && *ts <= at {
            let key = (*ts, pos);
            if best
                .map(|(bts, bpos, _)| key >= (bts, bpos))
                .unwrap_or(true)
            {
                best = Some((*ts, pos, *abnormal));
            }
        }
    }
    best.map(|(_, _, abnormal)| abnormal).unwrap_or(false)
}

/// Random score vector on a coarse grid so ties actually occur.
pub fn grid_scores(rng: &mut Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.below(17) as f64 / 16.0).collect()
}

pub fn random_truth(rng: &mut Rng, len: usize, p: f64) -> Vec<bool> {
    (0..len).map(|_| rng.bernoulli(p)).collect()
}

/// Instance counts verified per metric by
/// [`compare_metrics_against_oracles`].
pub struct OracleComparisonCounts {
    pub recall: usize,
    pub auc: usize,
    pub weighted_f1: usize,
    pub binary_f1: usize,
}

/// Cross-check all four metrics against the brute-force oracles on
/// randomized instances (≤30 labels, tie-heavy score grids). Panics on
/// the first mismatch beyond 1e-12; returns how many instances each
/// metric was checked on.
pub fn compare_metrics_against_oracles(seed: u64, iterations: usize) -> OracleComparisonCounts {
    use mplite_core::metrics::{binary_f1, recall_at_k, roc_auc, weighted_f1};

    let mut rng = Rng::new(seed);
    let mut counts = OracleComparisonCounts {
        recall: 0,
        auc: 0,
        weighted_f1: 0,
        binary_f1: 0,
    };
    for _ in 0..iterations {
        let n = 2 + rng.below(29);

        let scores = grid_scores(&mut rng, n);
        let truth_bits = random_truth(&mut rng, n, 0.3);
        if truth_bits.iter().any(|&t| t) {
            let truth = MultiHotVector::from_bits(truth_bits.clone());
            let k = 1 + rng.below(n);
            for capped in [false, true] {
                let ours = recall_at_k(&scores, &truth, k, capped).unwrap();
                let oracle = recall_oracle(&scores, &truth_bits, k, capped);
                assert_eq!(ours, oracle, "recall@{k} mismatch (capped={capped})");
            }
            counts.recall += 1;
        }

        let labels = random_truth(&mut rng, n, 0.5);
        let pos = labels.iter().filter(|&&l| l).count();
        if pos > 0 && pos < n {
            let ours = roc_auc(&scores, &labels).unwrap();
            let oracle = auc_pairwise_oracle(&scores, &labels);
            assert!(
                (ours - oracle).abs() <= 1e-12,
                "auc {ours} vs oracle {oracle}"
            );
            counts.auc += 1;
        }

        let ours = binary_f1(&scores, &labels, 0.5).unwrap();
        let oracle = binary_f1_oracle(&scores, &labels, 0.5);
        assert!(
            (ours - oracle).abs() <= 1e-12,
            "f1 {ours} vs oracle {oracle}"
        );
        counts.binary_f1 += 1;

        let rows = 2 + rng.below(20);
        let labels_n = 1 + rng.below(30);
        let score_rows: Vec<Vec<f64>> =
            (0..rows).map(|_| grid_scores(&mut rng, labels_n)).collect();
        let truth_rows: Vec<Vec<bool>> = (0..rows)
            .map(|_| random_truth(&mut rng, labels_n, 0.3))
            .collect();
        if truth_rows.iter().flatten().any(|&t| t) {
            let truth_mh: Vec<MultiHotVector> = truth_rows
                .iter()
                .map(|r| MultiHotVector::from_bits(r.clone()))
                .collect();
            let ours = weighted_f1(&score_rows, &truth_mh, 0.5).unwrap();
            let oracle = weighted_f1_oracle(&score_rows, &truth_rows, 0.5);
            assert!(
                (ours - oracle).abs() <= 1e-12,
                "w-f1 {ours} vs oracle {oracle}"
            );
            counts.weighted_f1 += 1;
        }
    }
    counts
}
