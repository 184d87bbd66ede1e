//! Random small problem instances for oracle comparisons.

use rand::Rng;
use wigcn::{
    build_interaction_matrix, init_params, BprTriple, GraphInputs, InteractionDataset,
    ModelParams, PropagationVariant, TrainConfig,
};

/// A complete tiny training setup: interaction pairs, the dataset and graph
/// views built from them, initialized parameters, a hand-rolled batch, and a
/// config tying the hyperparameters together.
pub struct TinyInstance {
    pub pairs: Vec<(usize, usize)>,
    pub n_users: usize,
    pub n_items: usize,
    pub dataset: InteractionDataset,
    pub inputs: GraphInputs,
    pub params: ModelParams,
    pub batch: Vec<BprTriple>,
    pub config: TrainConfig,
}

/// Bernoulli edge set over an n_users x n_items grid. Isolated vertices are
/// allowed; callers that cannot handle an empty set should resample.
pub fn random_pairs(
    rng: &mut impl Rng,
    n_users: usize,
    n_items: usize,
    density: f64,
) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for u in 0..n_users {
        for i in 0..n_items {
            if rng.random::<f64>() < density {
                pairs.push((u, i));
            }
        }
    }
    pairs
}

/// Draw a tiny instance: 2..=5 users, 2..=6 items, width 1..=4, 1 or 2
/// layers. Every user gets at least one training positive and at least one
/// item is left negative, so BPR triples always exist.
pub fn random_tiny_instance(rng: &mut impl Rng, variant: PropagationVariant) -> TinyInstance {
    let n_users = rng.random_range(2..=5);
    let n_items = rng.random_range(2..=6);
    let d = rng.random_range(1..=4);
    let n_layers = rng.random_range(1..=2);

    let mut pairs = Vec::new();
    let mut train_positives: Vec<Vec<usize>> = vec![Vec::new(); n_users];
    for user in 0..n_users {
        let n_pos = rng.random_range(1..n_items);
        let mut items: Vec<usize> = (0..n_items).collect();
        for slot in 0..n_pos {
            let pick = rng.random_range(slot..n_items);
            items.swap(slot, pick);
        }
        let mut chosen: Vec<usize> = items[..n_pos].to_vec();
        chosen.sort_unstable();
        for &item in &chosen {
            pairs.push((user, item));
        }
        train_positives[user] = chosen;
    }

    let dataset = InteractionDataset {
        n_users,
        n_items,
        train_positives: train_positives.clone(),
        test_positives: vec![Vec::new(); n_users],
        user_ids: (0..n_users as u64).collect(),
        item_ids: (0..n_items as u64).collect(),
    };
    let r = build_interaction_matrix(&pairs, n_users, n_items).expect("pairs are in range");
    let inputs = GraphInputs::build(&r).expect("graph construction failed");
    let params = init_params(n_users, n_items, d, n_layers, rng.random::<u64>())
        .expect("init failed");

    let batch_size = rng.random_range(1..=4);
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let user = rng.random_range(0..n_users);
        let positives = &train_positives[user];
        let pos_item = positives[rng.random_range(0..positives.len())];
        let neg_item = loop {
            let candidate = rng.random_range(0..n_items);
            if !positives.contains(&candidate) {
                break candidate;
            }
        };
        batch.push(BprTriple {
            user,
            pos_item,
            neg_item,
        });
    }

    let lambda_reg = *[0.0, 1e-5, 1e-2]
        .get(rng.random_range(0..3))
        .expect("index in range");
    let config = TrainConfig {
        d,
        n_layers,
        lambda_reg,
        batch_size,
        variant,
        ..TrainConfig::default()
    };

    TinyInstance {
        pairs,
        n_users,
        n_items,
        dataset,
        inputs,
        params,
        batch,
        config,
    }
}
