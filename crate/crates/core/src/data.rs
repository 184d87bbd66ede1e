//! Dataset ingestion: file parsing, k-core filtering, the random train/test
//! split, and summary statistics.
//!
//! External ids are arbitrary non-negative integers. After filtering and
//! splitting they are mapped to dense indices (sorted external order), and
//! all downstream code works purely in dense index space.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::build_interaction_matrix;
use crate::sparse::SparseMatrix;

/// On-disk layout of an interaction file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    /// One `user_id item_id` pair per line.
    #[default]
    EdgeList,
    /// One line per user: `user_id item_id item_id ...`.
    GroupedList,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-list" => Ok(Self::EdgeList),
            "grouped-list" => Ok(Self::GroupedList),
            other => Err(Error::InvalidArgument(format!(
                "unknown input format {other:?}; expected edge-list or grouped-list"
            ))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EdgeList => "edge-list",
            Self::GroupedList => "grouped-list",
        })
    }
}

/// A filtered and split interaction dataset in dense index space.
///
/// `train_positives[u]` and `test_positives[u]` are sorted, disjoint item
/// index lists; `user_ids` and `item_ids` map dense indices back to the
/// external ids (ascending, so the mapping is a bijection reversible by
/// binary search).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub n_users: usize,
    pub n_items: usize,
    pub train_positives: Vec<Vec<usize>>,
    pub test_positives: Vec<Vec<usize>>,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

/// Summary statistics in the shape reported by dataset tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_relations: usize,
    pub density: f64,
}

impl InteractionDataset {
    pub fn n_train(&self) -> usize {
        self.train_positives.iter().map(Vec::len).sum()
    }

    pub fn n_test(&self) -> usize {
        self.test_positives.iter().map(Vec::len).sum()
    }

    /// Binary user-item matrix over the training positives only.
    pub fn interaction_matrix(&self) -> Result<SparseMatrix> {
        let mut pairs = Vec::with_capacity(self.n_train());
        for (user, items) in self.train_positives.iter().enumerate() {
            for &item in items {
                pairs.push((user, item));
            }
        }
        build_interaction_matrix(&pairs, self.n_users, self.n_items)
    }

    pub fn user_index(&self, external_id: u64) -> Option<usize> {
        self.user_ids.binary_search(&external_id).ok()
    }

    pub fn item_index(&self, external_id: u64) -> Option<usize> {
        self.item_ids.binary_search(&external_id).ok()
    }

    pub fn is_train_positive(&self, user: usize, item: usize) -> bool {
        self.train_positives[user].binary_search(&item).is_ok()
    }

    /// Counts over train and test combined; density is relations over the
    /// full user-item grid.
    pub fn stats(&self) -> DatasetStats {
        let n_relations = self.n_train() + self.n_test();
        DatasetStats {
            n_users: self.n_users,
            n_items: self.n_items,
            n_relations,
            density: n_relations as f64 / (self.n_users as f64 * self.n_items as f64),
        }
    }
}

/// Parse an interaction file. Blank lines are skipped; duplicates are kept
/// (they collapse later in the pipeline).
pub fn load_interactions(path: &Path, format: InputFormat) -> Result<Vec<(u64, u64)>> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut interactions = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let parse = |token: &str, what: &str| -> Result<u64> {
            token.parse::<u64>().map_err(|_| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                message: format!("invalid {what} {token:?}"),
            })
        };
        let mut tokens = line.split_whitespace();
        let user = parse(tokens.next().unwrap(), "user id")?;
        match format {
            InputFormat::EdgeList => {
                let item_token = tokens.next().ok_or_else(|| Error::Parse {
                    path: display.clone(),
                    line: idx + 1,
                    message: "expected \"user_id item_id\"".into(),
                })?;
                let item = parse(item_token, "item id")?;
                if tokens.next().is_some() {
                    return Err(Error::Parse {
                        path: display.clone(),
                        line: idx + 1,
                        message: "trailing tokens after \"user_id item_id\"".into(),
                    });
                }
                interactions.push((user, item));
            }
            InputFormat::GroupedList => {
                for token in tokens {
                    interactions.push((user, parse(token, "item id")?));
                }
            }
        }
    }
    if interactions.is_empty() {
        return Err(Error::EmptyDataset(display));
    }
    Ok(interactions)
}

/// Iteratively drop users and items with fewer than `k` distinct interactions
/// until both sides satisfy the bound. Duplicate pairs collapse before
/// counting. The result is sorted and may be empty.
pub fn k_core_filter(raw: &[(u64, u64)], k: usize) -> Vec<(u64, u64)> {
    let mut pairs: Vec<(u64, u64)> = raw.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    loop {
        let mut user_degree = std::collections::HashMap::new();
        let mut item_degree = std::collections::HashMap::new();
        for &(u, i) in &pairs {
            *user_degree.entry(u).or_insert(0usize) += 1;
            *item_degree.entry(i).or_insert(0usize) += 1;
        }
        let before = pairs.len();
        pairs.retain(|&(u, i)| user_degree[&u] >= k && item_degree[&i] >= k);
        if pairs.len() == before {
            return pairs;
        }
    }
}

/// Randomly hold out `floor(test_fraction * N)` interactions as the test set,
/// never taking a user's last training interaction. Deterministic per seed.
///
/// The holdout is a seeded shuffle of the deduplicated interactions; each
/// user's first interaction in shuffle order is pinned to the training side,
/// and the test set takes the first `floor(test_fraction * N)` unpinned ones.
pub fn train_test_split(
    interactions: &[(u64, u64)],
    test_fraction: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie strictly between 0 and 1, got {test_fraction}"
        )));
    }
    let mut pairs: Vec<(u64, u64)> = interactions.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("no interactions to split".into()));
    }

    let mut user_ids: Vec<u64> = pairs.iter().map(|&(u, _)| u).collect();
    user_ids.sort_unstable();
    user_ids.dedup();
    let mut item_ids: Vec<u64> = pairs.iter().map(|&(_, i)| i).collect();
    item_ids.sort_unstable();
    item_ids.dedup();

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n_test_target = (test_fraction * pairs.len() as f64).floor() as usize;
    let mut seen_user = std::collections::HashSet::new();
    let mut is_test = vec![false; pairs.len()];
    let mut n_test = 0;
    for &idx in &order {
        let (user, _) = pairs[idx];
        if seen_user.insert(user) {
            continue;
        }
        if n_test < n_test_target {
            is_test[idx] = true;
            n_test += 1;
        }
    }

    let mut train_positives = vec![Vec::new(); user_ids.len()];
    let mut test_positives = vec![Vec::new(); user_ids.len()];
    for (idx, &(u, i)) in pairs.iter().enumerate() {
        let user = user_ids.binary_search(&u).unwrap();
        let item = item_ids.binary_search(&i).unwrap();
        if is_test[idx] {
            test_positives[user].push(item);
        } else {
            train_positives[user].push(item);
        }
    }
    for items in train_positives.iter_mut().chain(test_positives.iter_mut()) {
        items.sort_unstable();
    }

    Ok(InteractionDataset {
        n_users: user_ids.len(),
        n_items: item_ids.len(),
        train_positives,
        test_positives,
        user_ids,
        item_ids,
    })
}

/// Synthetic dataset with planted community structure: users and items are
/// partitioned into `n_blocks` equal groups and each user interacts with
/// `per_user` distinct random items of its own block, drawn with a
/// rank-skewed popularity weight (rank r gets weight 1/(r+1)^2). The skew
/// matters: held-out interactions from uniform draws carry no learnable
/// signal beyond block membership, while popular items recur across a
/// block's users and can be ranked above the rest.
pub fn generate_block_dataset(
    n_users: usize,
    n_items: usize,
    n_blocks: usize,
    per_user: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if n_blocks == 0 || n_users % n_blocks != 0 || n_items % n_blocks != 0 {
        return Err(Error::InvalidArgument(format!(
            "{n_blocks} blocks must evenly divide {n_users} users and {n_items} items"
        )));
    }
    let block_items = n_items / n_blocks;
    if per_user > block_items {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {per_user} distinct items from a block of {block_items}"
        )));
    }
    let weights: Vec<f64> = (0..block_items)
        .map(|rank| ((rank + 1) as f64).powi(-2))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_users * per_user);
    for user in 0..n_users {
        let block = user / (n_users / n_blocks);
        let base = block * block_items;
        // Weighted sampling without replacement: item i survives with key
        // u^(1/w_i), u uniform; the per_user largest keys are the draw.
        let mut keyed: Vec<(f64, usize)> = weights
            .iter()
            .enumerate()
            .map(|(item, &w)| (rng.random::<f64>().powf(1.0 / w), item))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, item) in &keyed[..per_user] {
            pairs.push((user as u64, (base + item) as u64));
        }
    }
    train_test_split(&pairs, test_fraction, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::sync::atomic::{AtomicU64, Ordering};

    static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

    fn temp_file(content: &str) -> std::path::PathBuf {
        let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!(
            "interactions-{}-{n}.txt",
            std::process::id()
        ));
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn edge_list_parses_pairs() {
        let path = temp_file("0 5\n1 3\n");
        assert_eq!(
            load_interactions(&path, InputFormat::EdgeList).unwrap(),
            vec![(0, 5), (1, 3)]
        );
    }

    #[test]
    fn grouped_list_expands_per_user() {
        let path = temp_file("7 1 2 3\n");
        assert_eq!(
            load_interactions(&path, InputFormat::GroupedList).unwrap(),
            vec![(7, 1), (7, 2), (7, 3)]
        );
    }

    #[test]
    fn malformed_line_is_reported_with_its_number() {
        let path = temp_file("0 1\na b\n");
        match load_interactions(&path, InputFormat::EdgeList).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn blank_lines_and_crlf_are_tolerated() {
        let path = temp_file("0 1\r\n\r\n\n2 3\r\n");
        assert_eq!(
            load_interactions(&path, InputFormat::EdgeList).unwrap(),
            vec![(0, 1), (2, 3)]
        );
    }

    #[test]
    fn empty_file_is_an_error() {
        let path = temp_file("\n\n");
        assert!(matches!(
            load_interactions(&path, InputFormat::EdgeList).unwrap_err(),
            Error::EmptyDataset(_)
        ));
    }

    #[test]
    fn input_format_round_trips() {
        for f in [InputFormat::EdgeList, InputFormat::GroupedList] {
            assert_eq!(f.to_string().parse::<InputFormat>().unwrap(), f);
        }
        assert!("csv".parse::<InputFormat>().is_err());
    }

    #[test]
    fn k_core_keeps_satisfying_input_unchanged() {
        // 3 users x 3 items complete bipartite graph: all degrees 3.
        let mut pairs = Vec::new();
        for u in 0..3u64 {
            for i in 0..3u64 {
                pairs.push((u, i));
            }
        }
        assert_eq!(k_core_filter(&pairs, 3), pairs);
    }

    #[test]
    fn k_core_removes_everything_below_threshold() {
        assert!(k_core_filter(&[(0, 0)], 10).is_empty());
    }

    #[test]
    fn k_core_matches_naive_repeated_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut raw = Vec::new();
        for _ in 0..600 {
            raw.push((rng.random_range(0..50u64), rng.random_range(0..60u64)));
        }

        let mut expected: Vec<(u64, u64)> = raw.clone();
        expected.sort_unstable();
        expected.dedup();
        loop {
            let count = |side: fn(&(u64, u64)) -> u64, list: &[(u64, u64)]| {
                let mut m = std::collections::HashMap::new();
                for p in list {
                    *m.entry(side(p)).or_insert(0usize) += 1;
                }
                m
            };
            let users = count(|p| p.0, &expected);
            let items = count(|p| p.1, &expected);
            let next: Vec<(u64, u64)> = expected
                .iter()
                .copied()
                .filter(|&(u, i)| users[&u] >= 3 && items[&i] >= 3)
                .collect();
            if next.len() == expected.len() {
                break;
            }
            expected = next;
        }

        assert_eq!(k_core_filter(&raw, 3), expected);
    }

    #[test]
    fn k_core_output_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let mut raw = Vec::new();
        for _ in 0..400 {
            raw.push((rng.random_range(0..40u64), rng.random_range(0..40u64)));
        }
        let once = k_core_filter(&raw, 4);
        assert_eq!(k_core_filter(&once, 4), once);
    }

    #[test]
    fn split_takes_floor_of_fraction() {
        let pairs: Vec<(u64, u64)> = (0..10).map(|i| (i / 5, i % 5)).collect();
        let ds = train_test_split(&pairs, 0.2, 1).unwrap();
        assert_eq!(ds.n_test(), 2);
        assert_eq!(ds.n_train(), 8);
    }

    #[test]
    fn split_is_deterministic() {
        let pairs: Vec<(u64, u64)> = (0..40).map(|i| (i % 8, i / 2)).collect();
        let a = train_test_split(&pairs, 0.25, 9).unwrap();
        let b = train_test_split(&pairs, 0.25, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_preserves_the_interaction_set_and_stays_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut pairs = Vec::new();
        for _ in 0..300 {
            pairs.push((rng.random_range(0..20u64), rng.random_range(0..25u64)));
        }
        let mut expected = pairs.clone();
        expected.sort_unstable();
        expected.dedup();

        let ds = train_test_split(&pairs, 0.2, 3).unwrap();
        let mut reunited = Vec::new();
        for user in 0..ds.n_users {
            for &item in &ds.train_positives[user] {
                reunited.push((ds.user_ids[user], ds.item_ids[item]));
            }
            for &item in &ds.test_positives[user] {
                reunited.push((ds.user_ids[user], ds.item_ids[item]));
                assert!(!ds.is_train_positive(user, item));
            }
        }
        reunited.sort_unstable();
        assert_eq!(reunited, expected);
    }

    #[test]
    fn split_never_orphans_a_user() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = Vec::new();
            for u in 0..15u64 {
                // Some users get a single interaction and must stay in train.
                let n = rng.random_range(1..6);
                for _ in 0..n {
                    pairs.push((u, rng.random_range(0..12u64)));
                }
            }
            let ds = train_test_split(&pairs, 0.3, seed).unwrap();
            for user in 0..ds.n_users {
                assert!(
                    !ds.train_positives[user].is_empty(),
                    "seed {seed}: user {user} lost all training interactions"
                );
            }
        }
    }

    #[test]
    fn id_maps_round_trip() {
        let pairs = vec![(100, 7), (3, 7), (100, 900), (3, 12), (50, 900), (50, 12)];
        let ds = train_test_split(&pairs, 0.2, 5).unwrap();
        assert_eq!(ds.user_ids, vec![3, 50, 100]);
        assert_eq!(ds.item_ids, vec![7, 12, 900]);
        for (idx, &id) in ds.user_ids.iter().enumerate() {
            assert_eq!(ds.user_index(id), Some(idx));
        }
        for (idx, &id) in ds.item_ids.iter().enumerate() {
            assert_eq!(ds.item_index(id), Some(idx));
        }
        assert_eq!(ds.user_index(4), None);
    }

    #[test]
    fn stats_density_is_relations_over_grid() {
        let pairs = vec![(0, 0), (0, 1), (1, 0), (1, 1), (0, 0)];
        let ds = train_test_split(&pairs, 0.25, 2).unwrap();
        let stats = ds.stats();
        assert_eq!(stats.n_users, 2);
        assert_eq!(stats.n_items, 2);
        assert_eq!(stats.n_relations, 4);
        assert!((stats.density - 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_dataset_keeps_interactions_inside_blocks() {
        let ds = generate_block_dataset(40, 60, 2, 10, 0.2, 7).unwrap();
        assert_eq!(ds.n_users, 40);
        assert_eq!(ds.n_train() + ds.n_test(), 400);
        for user in 0..ds.n_users {
            let block = ds.user_ids[user] as usize / 20;
            for &item in ds.train_positives[user].iter().chain(&ds.test_positives[user]) {
                let external = ds.item_ids[item] as usize;
                assert_eq!(external / 30, block);
            }
        }
    }

    #[test]
    fn block_dataset_validates_divisibility() {
        assert!(generate_block_dataset(41, 60, 2, 10, 0.2, 7).is_err());
        assert!(generate_block_dataset(40, 60, 2, 31, 0.2, 7).is_err());
    }
}
