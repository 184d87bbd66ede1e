//! Brute-force top-K evaluation: explicit score loops, selection by repeated
//! argmax scan (strictly-greater comparison, so ties keep the lowest index),
//! and direct metric formulas.

use ndarray::Array2;

/// Averages from the reference evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteMetrics {
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
    pub n_users_evaluated: usize,
}

/// Evaluate a final embedding (users stacked above items) against per-user
/// train exclusions and test positives. Returns `None` when no user has test
/// positives.
pub fn brute_force_evaluate(
    embedding: &Array2<f64>,
    n_users: usize,
    train: &[Vec<usize>],
    test: &[Vec<usize>],
    k: usize,
) -> Option<BruteMetrics> {
    let n_items = embedding.nrows() - n_users;
    let width = embedding.ncols();
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut ndcg_sum = 0.0;
    let mut evaluated = 0usize;

    for user in 0..n_users {
        if test[user].is_empty() {
            continue;
        }
        let score = |item: usize| -> f64 {
            (0..width)
                .map(|j| embedding[[user, j]] * embedding[[n_users + item, j]])
                .sum()
        };

        let mut taken: Vec<usize> = Vec::new();
        while taken.len() < k {
            let mut best: Option<(usize, f64)> = None;
            for item in 0..n_items {
                if train[user].contains(&item) || taken.contains(&item) {
                    continue;
                }
                let s = score(item);
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((item, s));
                }
            }
            match best {
                Some((item, _)) => taken.push(item),
                None => break,
            }
        }

        let hits = taken.iter().filter(|i| test[user].contains(i)).count();
        precision_sum += if taken.is_empty() {
            0.0
        } else {
            hits as f64 / taken.len() as f64
        };
        recall_sum += hits as f64 / test[user].len() as f64;

        let mut dcg = 0.0;
        for (pos, item) in taken.iter().enumerate() {
            if test[user].contains(item) {
                dcg += 1.0 / ((pos + 2) as f64).log2();
            }
        }
        let ideal: f64 = (0..test[user].len().min(k))
            .map(|pos| 1.0 / ((pos + 2) as f64).log2())
            .sum();
        ndcg_sum += dcg / ideal;
        evaluated += 1;
    }

    if evaluated == 0 {
        return None;
    }
    let n = evaluated as f64;
    Some(BruteMetrics {
        precision: precision_sum / n,
        recall: recall_sum / n,
        ndcg: ndcg_sum / n,
        n_users_evaluated: evaluated,
    })
}
