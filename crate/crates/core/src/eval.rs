//! Top-K ranking evaluation over held-out test interactions, plus the two
//! rating-error utilities.
//!
//! For each user with at least one test positive: score every item, drop the
//! user's training positives, rank the rest, and compute precision, recall
//! and NDCG at K against the test positives. Reported numbers are unweighted
//! means over evaluated users; F1 combines the averaged precision and recall.
//! Per-user work is parallel, the reduction is a fixed-order fold, so results
//! do not depend on thread scheduling.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::model::{predict_scores, ForwardTrace};

/// Averaged ranking quality at a fixed cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ndcg: f64,
    pub n_users_evaluated: usize,
}

/// Indices of the up-to-k highest scores outside `exclude`, descending;
/// equal scores rank by ascending index.
pub fn topk_ranking(scores: &[f64], exclude: &HashSet<usize>, k: usize) -> Vec<usize> {
    let mut candidates: Vec<usize> = (0..scores.len())
        .filter(|i| !exclude.contains(i))
        .collect();
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    candidates.truncate(k);
    candidates
}

/// Hit-based precision, recall and their harmonic mean for one list.
pub fn precision_recall_f1(recommended: &[usize], relevant: &HashSet<usize>) -> (f64, f64, f64) {
    if recommended.is_empty() || relevant.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let hits = recommended.iter().filter(|i| relevant.contains(i)).count() as f64;
    let p = hits / recommended.len() as f64;
    let r = hits / relevant.len() as f64;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f1)
}

/// Binary-gain NDCG: DCG with gains 1/log2(position+1) over the first k
/// recommendations, normalized by the ideal DCG of min(|relevant|, k) ones.
pub fn ndcg_at_k(recommended: &[usize], relevant: &HashSet<usize>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let discount = |position: usize| 1.0 / ((position + 1) as f64).log2();
    let dcg: f64 = recommended
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| relevant.contains(item))
        .map(|(idx, _)| discount(idx + 1))
        .sum();
    let ideal: f64 = (1..=relevant.len().min(k)).map(discount).sum();
    dcg / ideal
}

/// Rank all items for every user with test positives and average the
/// per-user metrics.
pub fn evaluate_model(
    trace: &ForwardTrace,
    dataset: &InteractionDataset,
    k: usize,
) -> Result<RankingMetrics> {
    if k == 0 {
        return Err(Error::InvalidArgument("evaluation cutoff must be at least 1".into()));
    }
    let per_user: Vec<(f64, f64, f64)> = (0..dataset.n_users)
        .into_par_iter()
        .filter(|&user| !dataset.test_positives[user].is_empty())
        .map(|user| {
            let scores = predict_scores(trace, user)?;
            let exclude: HashSet<usize> = dataset.train_positives[user].iter().copied().collect();
            let relevant: HashSet<usize> = dataset.test_positives[user].iter().copied().collect();
            let recommended = topk_ranking(&scores, &exclude, k);
            let (p, r, _) = precision_recall_f1(&recommended, &relevant);
            Ok((p, r, ndcg_at_k(&recommended, &relevant, k)))
        })
        .collect::<Result<_>>()?;

    if per_user.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    let n = per_user.len() as f64;
    let (mut precision, mut recall, mut ndcg) = (0.0, 0.0, 0.0);
    for (p, r, g) in &per_user {
        precision += p;
        recall += r;
        ndcg += g;
    }
    precision /= n;
    recall /= n;
    ndcg /= n;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(RankingMetrics {
        k,
        precision,
        recall,
        f1,
        ndcg,
        n_users_evaluated: per_user.len(),
    })
}

/// Mean absolute error and root mean squared error of paired predictions.
pub fn mae_rmse(predicted: &[f64], actual: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            context: "rating error".into(),
            expected: format!("{} predictions", actual.len()),
            actual: format!("{}", predicted.len()),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument(
            "rating error needs at least one pair".into(),
        ));
    }
    let n = predicted.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        let diff = p - a;
        abs_sum += diff.abs();
        sq_sum += diff * diff;
    }
    Ok((abs_sum / n, (sq_sum / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn set(items: &[usize]) -> HashSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn topk_orders_by_score() {
        assert_eq!(topk_ranking(&[0.1, 0.9, 0.5], &set(&[]), 2), vec![1, 2]);
    }

    #[test]
    fn topk_breaks_ties_by_lower_index() {
        assert_eq!(topk_ranking(&[0.9, 0.9], &set(&[]), 1), vec![0]);
        assert_eq!(topk_ranking(&[0.5, 0.9, 0.9, 0.9], &set(&[]), 2), vec![1, 2]);
    }

    #[test]
    fn topk_never_returns_excluded_items() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let out = topk_ranking(&scores, &set(&[0, 2]), 4);
        assert_eq!(out, vec![1, 3]);
    }

    #[test]
    fn topk_with_few_candidates_returns_short_list() {
        assert_eq!(topk_ranking(&[0.3, 0.1], &set(&[]), 10), vec![0, 1]);
    }

    #[test]
    fn precision_recall_hand_case() {
        let (p, r, f1) = precision_recall_f1(&[1, 2, 3], &set(&[2]));
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r, 1.0);
        assert!((f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn precision_recall_perfect_and_disjoint() {
        let (p, r, f1) = precision_recall_f1(&[4, 5], &set(&[4, 5]));
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
        let (p, r, f1) = precision_recall_f1(&[0, 1], &set(&[2, 3]));
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn precision_times_k_is_hit_count() {
        let recommended = [3, 7, 1, 9];
        let relevant = set(&[7, 9, 2]);
        let (p, r, _) = precision_recall_f1(&recommended, &relevant);
        assert_eq!(p * recommended.len() as f64, 2.0);
        assert_eq!(r * relevant.len() as f64, 2.0);
    }

    #[test]
    fn ndcg_hand_cases() {
        assert_eq!(ndcg_at_k(&[5], &set(&[5]), 1), 1.0);
        let got = ndcg_at_k(&[1, 5], &set(&[5]), 2);
        assert!((got - 1.0 / 3.0f64.log2()).abs() < 1e-12);
        assert!((got - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[1, 2], &set(&[5]), 2), 0.0);
    }

    #[test]
    fn ndcg_ignores_items_below_the_last_relevant_hit() {
        let relevant = set(&[2, 4]);
        let a = ndcg_at_k(&[2, 4, 1, 3, 5], &relevant, 5);
        let b = ndcg_at_k(&[2, 4, 5, 1, 3], &relevant, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn recall_is_monotone_in_k() {
        let scores = [0.4, 0.9, 0.1, 0.7, 0.3];
        let relevant = set(&[0, 2]);
        let mut last = 0.0;
        for k in 1..=5 {
            let recommended = topk_ranking(&scores, &set(&[]), k);
            let (_, r, _) = precision_recall_f1(&recommended, &relevant);
            assert!(r >= last);
            last = r;
        }
    }

    fn oracle_dataset() -> InteractionDataset {
        InteractionDataset {
            n_users: 3,
            n_items: 6,
            train_positives: vec![vec![], vec![], vec![]],
            test_positives: vec![vec![0, 1], vec![2], vec![3, 4, 5]],
            user_ids: vec![0, 1, 2],
            item_ids: vec![0, 1, 2, 3, 4, 5],
        }
    }

    /// E* rows built so score(u, i) is 1 exactly on test pairs, 0 elsewhere.
    fn oracle_trace(dataset: &InteractionDataset) -> ForwardTrace {
        let n = dataset.n_users;
        let m = dataset.n_items;
        let mut e = Array2::<f64>::zeros((n + m, n));
        for user in 0..n {
            e[[user, user]] = 1.0;
            for &item in &dataset.test_positives[user] {
                e[[n + item, user]] = 1.0;
            }
        }
        ForwardTrace {
            layer_inputs: Vec::new(),
            pre_activations: Vec::new(),
            final_embedding: e,
            n_users: n,
        }
    }

    #[test]
    fn oracle_scorer_gets_perfect_recall_and_ndcg() {
        let dataset = oracle_dataset();
        let trace = oracle_trace(&dataset);
        let k = 4;
        let metrics = evaluate_model(&trace, &dataset, k).unwrap();
        assert_eq!(metrics.n_users_evaluated, 3);
        assert_eq!(metrics.recall, 1.0);
        assert_eq!(metrics.ndcg, 1.0);
        let expected_p = (2.0 / 4.0 + 1.0 / 4.0 + 3.0 / 4.0) / 3.0;
        assert!((metrics.precision - expected_p).abs() < 1e-15);
        assert_eq!(metrics.k, k);
    }

    #[test]
    fn evaluation_skips_users_without_test_items() {
        let mut dataset = oracle_dataset();
        dataset.test_positives[1].clear();
        let trace = oracle_trace(&dataset);
        let metrics = evaluate_model(&trace, &dataset, 4).unwrap();
        assert_eq!(metrics.n_users_evaluated, 2);
    }

    #[test]
    fn evaluation_without_any_test_user_is_an_error() {
        let mut dataset = oracle_dataset();
        for t in &mut dataset.test_positives {
            t.clear();
        }
        let trace = oracle_trace(&oracle_dataset());
        assert!(matches!(
            evaluate_model(&trace, &dataset, 4).unwrap_err(),
            Error::NoEvaluableUsers
        ));
    }

    #[test]
    fn evaluation_handles_k_beyond_item_count() {
        let dataset = oracle_dataset();
        let trace = oracle_trace(&dataset);
        let metrics = evaluate_model(&trace, &dataset, 50).unwrap();
        assert_eq!(metrics.recall, 1.0);
        assert!(metrics.precision > 0.0 && metrics.precision <= 1.0);
    }

    #[test]
    fn f1_combines_the_averaged_precision_and_recall() {
        let dataset = oracle_dataset();
        let trace = oracle_trace(&dataset);
        let m = evaluate_model(&trace, &dataset, 4).unwrap();
        let expected = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        assert_eq!(m.f1, expected);
    }

    #[test]
    fn mae_rmse_hand_cases() {
        assert_eq!(mae_rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(mae_rmse(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), (1.0, 1.0));
        assert_eq!(mae_rmse(&[0.0, 4.0], &[2.0, 2.0]).unwrap(), (2.0, 2.0));
        assert!(mae_rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae_rmse(&[], &[]).is_err());
    }
}
