//! Bindings for the browser demo page.
//!
//! A [`DemoEngine`] owns one synthetic dataset, the two propagation matrices
//! built from it, and an independent training lane per variant. The page
//! advances every lane in lockstep, so loss curves and ranking metrics
//! compare the propagation rules on identical data and identical initial
//! draws. Everything crosses the boundary as plain objects through
//! `serde_wasm_bindgen`; the page never holds references into wasm memory.
//!
//! The epoch loop is restated here rather than calling [`wigcn::train_with`]
//! because the page needs to stop and resume between clicks, and because the
//! library loop timestamps epochs with `std::time::Instant`, which traps on
//! `wasm32-unknown-unknown`.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use wigcn::{
    adam_step, compute_gradients, evaluate_model, forward, generate_block_dataset, init_params,
    predict_scores, sample_bpr_batch, topk_ranking, AdamState, Error, GraphInputs,
    InteractionDataset, ModelParams, PropagationVariant, SparseMatrix, TrainConfig,
};

/// Demo-scale knobs, deserialized from the page's config object. Every field
/// has a default, so `{}` (or `undefined`) is a complete config.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    n_users: usize,
    n_items: usize,
    n_blocks: usize,
    per_user: usize,
    test_fraction: f64,
    d: usize,
    n_layers: usize,
    learning_rate: f64,
    lambda_reg: f64,
    batch_size: usize,
    leaky_slope: f64,
    seed: u64,
    variants: Vec<String>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_users: 40,
            n_items: 60,
            n_blocks: 4,
            per_user: 8,
            test_fraction: 0.2,
            d: 16,
            n_layers: 2,
            learning_rate: 5e-3,
            lambda_reg: 1e-5,
            batch_size: 64,
            leaky_slope: 0.2,
            seed: 42,
            variants: vec!["wigcn".into(), "ngcf_like".into(), "lightgcn_like".into()],
        }
    }
}

fn parse_variants(names: &[String]) -> wigcn::Result<Vec<PropagationVariant>> {
    if names.is_empty() {
        return Err(Error::InvalidArgument("at least one variant is required".into()));
    }
    let mut variants = Vec::with_capacity(names.len());
    for name in names {
        let variant: PropagationVariant = name.parse()?;
        if variants.contains(&variant) {
            return Err(Error::InvalidArgument(format!("variant {variant} listed twice")));
        }
        variants.push(variant);
    }
    Ok(variants)
}

/// Loss history of one variant; epoch e is `mean_loss[e - 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct VariantHistory {
    pub variant: String,
    pub mean_loss: Vec<f64>,
}

/// Ranking quality of one variant at its current parameters.
#[derive(Debug, Clone, Serialize)]
pub struct VariantMetrics {
    pub variant: String,
    pub epoch: usize,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub ndcg: f64,
}

/// Dense row-major copy of a propagation matrix. Users occupy the first
/// `n_users` rows and columns, items the rest.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixView {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_users: usize,
    pub max_value: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecItem {
    pub item: usize,
    pub score: f64,
    pub held_out: bool,
}

/// Top-k list for one user, with the interactions that shaped it.
#[derive(Debug, Clone, Serialize)]
pub struct Recommendation {
    pub user: usize,
    pub train_items: Vec<usize>,
    pub test_items: Vec<usize>,
    pub items: Vec<RecItem>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoStats {
    pub n_users: usize,
    pub n_items: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub density: f64,
    pub epoch: usize,
    pub variants: Vec<String>,
}

struct Lane {
    config: TrainConfig,
    params: ModelParams,
    adam: AdamState,
    sampler: ChaCha8Rng,
    losses: Vec<f64>,
}

impl Lane {
    fn new(
        dataset: &InteractionDataset,
        demo: &DemoConfig,
        variant: PropagationVariant,
    ) -> wigcn::Result<Self> {
        let config = TrainConfig {
            d: demo.d,
            n_layers: demo.n_layers,
            learning_rate: demo.learning_rate,
            lambda_reg: demo.lambda_reg,
            batch_size: demo.batch_size,
            epochs: 0,
            seed: demo.seed,
            leaky_slope: demo.leaky_slope,
            variant,
        };
        config.validate()?;
        let params = init_params(dataset.n_users, dataset.n_items, demo.d, demo.n_layers, demo.seed)?;
        let adam = AdamState::new(&params);
        // Same stream split as the library loop: initialization draws on
        // stream 0, batch sampling on stream 1.
        let mut sampler = ChaCha8Rng::seed_from_u64(demo.seed);
        sampler.set_stream(1);
        Ok(Self {
            config,
            params,
            adam,
            sampler,
            losses: Vec::new(),
        })
    }

    fn run_epoch(
        &mut self,
        dataset: &InteractionDataset,
        inputs: &GraphInputs,
        batches: usize,
    ) -> wigcn::Result<()> {
        let mut loss_sum = 0.0;
        for _ in 0..batches {
            let batch = sample_bpr_batch(dataset, self.config.batch_size, &mut self.sampler)?;
            let (loss, grads) = match compute_gradients(&self.params, inputs, &batch, &self.config) {
                Ok(pair) => pair,
                Err(Error::NonFinite { .. }) => {
                    return Err(Error::Diverged { epoch: self.losses.len() + 1 })
                }
                Err(other) => return Err(other),
            };
            adam_step(&mut self.params, &grads, &mut self.adam, self.config.learning_rate);
            loss_sum += loss;
        }
        self.losses.push(loss_sum / batches as f64);
        Ok(())
    }

    fn trace(&self, inputs: &GraphInputs) -> wigcn::Result<wigcn::ForwardTrace> {
        forward(&self.params, inputs, self.config.variant, self.config.leaky_slope)
    }
}

struct Engine {
    dataset: InteractionDataset,
    inputs: GraphInputs,
    batches_per_epoch: usize,
    lanes: Vec<Lane>,
}

impl Engine {
    fn new(demo: &DemoConfig) -> wigcn::Result<Self> {
        let variants = parse_variants(&demo.variants)?;
        let dataset = generate_block_dataset(
            demo.n_users,
            demo.n_items,
            demo.n_blocks,
            demo.per_user,
            demo.test_fraction,
            demo.seed,
        )?;
        let inputs = GraphInputs::build(&dataset.interaction_matrix()?)?;
        let batches_per_epoch = dataset.n_train().div_ceil(demo.batch_size).max(1);
        let lanes = variants
            .into_iter()
            .map(|variant| Lane::new(&dataset, demo, variant))
            .collect::<wigcn::Result<Vec<_>>>()?;
        Ok(Self {
            dataset,
            inputs,
            batches_per_epoch,
            lanes,
        })
    }

    fn train_epochs(&mut self, n: usize) -> wigcn::Result<Vec<VariantHistory>> {
        for _ in 0..n {
            for lane in &mut self.lanes {
                lane.run_epoch(&self.dataset, &self.inputs, self.batches_per_epoch)?;
            }
        }
        Ok(self
            .lanes
            .iter()
            .map(|lane| VariantHistory {
                variant: lane.config.variant.to_string(),
                mean_loss: lane.losses.clone(),
            })
            .collect())
    }

    fn metrics(&self, k: usize) -> wigcn::Result<Vec<VariantMetrics>> {
        self.lanes
            .iter()
            .map(|lane| {
                let m = evaluate_model(&lane.trace(&self.inputs)?, &self.dataset, k)?;
                Ok(VariantMetrics {
                    variant: lane.config.variant.to_string(),
                    epoch: lane.losses.len(),
                    k,
                    precision: m.precision,
                    recall: m.recall,
                    ndcg: m.ndcg,
                })
            })
            .collect()
    }

    fn lane(&self, variant: &str) -> wigcn::Result<&Lane> {
        let wanted: PropagationVariant = variant.parse()?;
        self.lanes
            .iter()
            .find(|lane| lane.config.variant == wanted)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("engine was not configured with variant {wanted}"))
            })
    }

    fn recommend(&self, variant: &str, user: usize, k: usize) -> wigcn::Result<Recommendation> {
        let lane = self.lane(variant)?;
        let scores = predict_scores(&lane.trace(&self.inputs)?, user)?;
        let exclude: HashSet<usize> = self.dataset.train_positives[user].iter().copied().collect();
        let held_out: HashSet<usize> = self.dataset.test_positives[user].iter().copied().collect();
        let items = topk_ranking(&scores, &exclude, k)
            .into_iter()
            .map(|item| RecItem {
                item,
                score: scores[item],
                held_out: held_out.contains(&item),
            })
            .collect();
        Ok(Recommendation {
            user,
            train_items: self.dataset.train_positives[user].clone(),
            test_items: self.dataset.test_positives[user].clone(),
            items,
        })
    }

    fn stats(&self) -> DemoStats {
        let s = self.dataset.stats();
        DemoStats {
            n_users: s.n_users,
            n_items: s.n_items,
            n_train: self.dataset.n_train(),
            n_test: self.dataset.n_test(),
            density: s.density,
            epoch: self.lanes.first().map_or(0, |lane| lane.losses.len()),
            variants: self.lanes.iter().map(|lane| lane.config.variant.to_string()).collect(),
        }
    }
}

fn matrix_view(m: &SparseMatrix, n_users: usize) -> MatrixView {
    let values: Vec<f64> = m.to_dense().iter().copied().collect();
    let max_value = values.iter().copied().fold(0.0, f64::max);
    MatrixView {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        n_users,
        max_value,
        values,
    }
}

fn to_js<T: Serialize>(value: &T) -> Result<JsValue, JsValue> {
    serde_wasm_bindgen::to_value(value).map_err(Into::into)
}

fn err_js(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// The object the page constructs and drives. Errors surface as strings.
#[wasm_bindgen]
pub struct DemoEngine {
    engine: Engine,
}

#[wasm_bindgen]
impl DemoEngine {
    /// `config` is a plain object; missing fields take the documented
    /// defaults, unknown fields are rejected.
    #[wasm_bindgen(constructor)]
    pub fn new(config: JsValue) -> Result<DemoEngine, JsValue> {
        let demo: DemoConfig = if config.is_undefined() || config.is_null() {
            DemoConfig::default()
        } else {
            serde_wasm_bindgen::from_value(config).map_err(JsValue::from)?
        };
        Ok(DemoEngine {
            engine: Engine::new(&demo).map_err(err_js)?,
        })
    }

    /// Advance every lane by `n` epochs and return the full loss history per
    /// variant.
    pub fn train_epochs(&mut self, n: u32) -> Result<JsValue, JsValue> {
        to_js(&self.engine.train_epochs(n as usize).map_err(err_js)?)
    }

    /// Precision, recall and NDCG at cutoff `k` for every lane, over the
    /// held-out test interactions.
    pub fn metrics(&self, k: u32) -> Result<JsValue, JsValue> {
        to_js(&self.engine.metrics(k as usize).map_err(err_js)?)
    }

    /// The normalized bipartite adjacency, dense.
    pub fn gamma(&self) -> Result<JsValue, JsValue> {
        to_js(&matrix_view(&self.engine.inputs.gamma, self.engine.dataset.n_users))
    }

    /// The normalized co-interaction weight matrix, dense.
    pub fn delta(&self) -> Result<JsValue, JsValue> {
        to_js(&matrix_view(&self.engine.inputs.delta, self.engine.dataset.n_users))
    }

    /// Top-k items for one user under one variant, excluding the user's
    /// training items and flagging held-out test items.
    pub fn recommend(&self, variant: &str, user: u32, k: u32) -> Result<JsValue, JsValue> {
        to_js(&self.engine.recommend(variant, user as usize, k as usize).map_err(err_js)?)
    }

    /// Dataset shape, current epoch and configured variants.
    pub fn stats(&self) -> Result<JsValue, JsValue> {
        to_js(&self.engine.stats())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DemoConfig {
        DemoConfig {
            n_users: 20,
            n_items: 30,
            n_blocks: 2,
            per_user: 6,
            d: 8,
            batch_size: 32,
            seed: 11,
            ..DemoConfig::default()
        }
    }

    #[test]
    fn lanes_train_in_lockstep_and_rank() {
        let mut engine = Engine::new(&small_config()).unwrap();
        let history = engine.train_epochs(25).unwrap();
        assert_eq!(history.len(), 3);
        for lane in &history {
            assert_eq!(lane.mean_loss.len(), 25);
            assert!(lane.mean_loss.iter().all(|l| l.is_finite()));
            assert!(lane.mean_loss[24] < lane.mean_loss[0]);
        }

        let metrics = engine.metrics(5).unwrap();
        assert_eq!(metrics.len(), 3);
        for m in &metrics {
            assert_eq!(m.epoch, 25);
            assert!((0.0..=1.0).contains(&m.recall));
            assert!((0.0..=1.0).contains(&m.ndcg));
        }

        let rec = engine.recommend("wigcn", 3, 5).unwrap();
        assert_eq!(rec.items.len(), 5);
        for item in &rec.items {
            assert!(!rec.train_items.contains(&item.item));
        }
        for pair in rec.items.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }

    #[test]
    fn histories_are_bit_reproducible() {
        let run = || {
            let mut engine = Engine::new(&small_config()).unwrap();
            engine.train_epochs(5).unwrap()
        };
        for (a, b) in run().iter().zip(&run()) {
            assert_eq!(a.variant, b.variant);
            let bits = |h: &VariantHistory| h.mean_loss.iter().map(|l| l.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn matrix_views_expose_the_expected_structure() {
        let engine = Engine::new(&small_config()).unwrap();
        let n_users = engine.dataset.n_users;
        let gamma = matrix_view(&engine.inputs.gamma, n_users);
        let delta = matrix_view(&engine.inputs.delta, n_users);
        let n = n_users + engine.dataset.n_items;
        for view in [&gamma, &delta] {
            assert_eq!((view.n_rows, view.n_cols), (n, n));
            assert_eq!(view.values.len(), n * n);
            assert!(view.max_value > 0.0);
        }
        // The adjacency is bipartite: its user-user quadrant is empty. The
        // co-interaction matrix is block-diagonal: its user-item quadrant is.
        for u in 0..n_users {
            for v in 0..n_users {
                assert_eq!(gamma.values[u * n + v], 0.0);
            }
            for i in n_users..n {
                assert_eq!(delta.values[u * n + i], 0.0);
            }
        }
        assert!(delta.values[..n_users * n].iter().any(|&v| v > 0.0));
    }

    #[test]
    fn unknown_and_missing_variants_are_rejected() {
        let bad = DemoConfig {
            variants: vec!["wigcn".into(), "frobnicate".into()],
            ..small_config()
        };
        assert!(Engine::new(&bad).is_err());

        let only_wigcn = DemoConfig {
            variants: vec!["wigcn".into()],
            ..small_config()
        };
        let engine = Engine::new(&only_wigcn).unwrap();
        let err = engine.recommend("ngcf_like", 0, 3).unwrap_err();
        assert!(err.to_string().contains("not configured"));
    }

    #[test]
    fn default_config_builds_and_steps() {
        let mut engine = Engine::new(&DemoConfig::default()).unwrap();
        let history = engine.train_epochs(2).unwrap();
        assert!(history.iter().all(|h| h.mean_loss.len() == 2));
        let stats = engine.stats();
        // Skewed draws can leave a block's tail item unobserved, so the item
        // count may land just under the configured 60.
        assert_eq!((stats.n_users, stats.epoch), (40, 2));
        assert!(stats.n_items <= 60 && stats.n_items >= 55);
        assert_eq!(stats.n_train + stats.n_test, 40 * 8);
    }
}
