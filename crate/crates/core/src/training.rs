//! Pairwise ranking loss, its exact gradients, and the Adam training loop.
//!
//! The objective over a batch of (user, positive, negative) triples is
//!
//! ```text
//! ( Σ -ln σ(score(u,i) - score(u,j)) + λ·‖Φ‖² ) / batch_size
//! ```
//!
//! where Φ is every trainable parameter. Gradients are reverse-mode and
//! exact: the backward pass walks the propagation layers in reverse,
//! recomputing the two sparse products of each layer and applying the
//! activation mask recorded in the forward trace. No autodiff framework is
//! involved, which keeps the arithmetic order fixed and runs reproducible.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::graph::GraphInputs;
use crate::model::{
    forward, init_params, leaky_relu_mask, ForwardTrace, ModelParams, PropagationVariant,
};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One ranking constraint: `user` should score `pos_item` above `neg_item`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BprTriple {
    pub user: usize,
    pub pos_item: usize,
    pub neg_item: usize,
}

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub d: usize,
    pub n_layers: usize,
    pub learning_rate: f64,
    pub lambda_reg: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub leaky_slope: f64,
    pub variant: PropagationVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 64,
            n_layers: 3,
            learning_rate: 1e-3,
            lambda_reg: 1e-5,
            batch_size: 1024,
            epochs: 10,
            seed: 42,
            leaky_slope: 0.2,
            variant: PropagationVariant::Wigcn,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_layers == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "embedding width, layer count and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.lambda_reg >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization strength must be non-negative, got {}",
                self.lambda_reg
            )));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::InvalidArgument(format!(
                "activation slope must lie in [0, 1), got {}",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// Gradients of one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients mirroring `ModelParams` shape for shape.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub e0: Array2<f64>,
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            e0: Array2::zeros(params.e0.raw_dim()),
            layers: params
                .layers
                .iter()
                .map(|layer| LayerGrads {
                    w1: Array2::zeros(layer.w1.raw_dim()),
                    w2: Array2::zeros(layer.w2.raw_dim()),
                    bias: Array1::zeros(layer.bias.raw_dim()),
                })
                .collect(),
        }
    }

    fn ensure_finite(&self) -> Result<()> {
        fn check<'a>(mut it: impl Iterator<Item = &'a f64>, context: impl Fn() -> String) -> Result<()> {
            if it.all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFinite { context: context() })
            }
        }
        check(self.e0.iter(), || "embedding gradient".into())?;
        for (k, layer) in self.layers.iter().enumerate() {
            check(layer.w1.iter(), || format!("w1 gradient in layer {}", k + 1))?;
            check(layer.w2.iter(), || format!("w2 gradient in layer {}", k + 1))?;
            check(layer.bias.iter(), || format!("bias gradient in layer {}", k + 1))?;
        }
        Ok(())
    }
}

/// Adam accumulators. β1 = 0.9, β2 = 0.999, ε = 1e-8, with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Gradients,
    v: Gradients,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// Loss and timing of one epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_seconds: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow for large |x|.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Draw a batch of ranking triples: the user marginal is proportional to
/// training degree (a uniform draw over training interactions), the positive
/// is uniform among the user's positives, and the negative is drawn uniformly
/// over items with rejection of the user's positives. Users interacting with
/// every item cannot yield a negative and are skipped.
pub fn sample_bpr_batch(
    dataset: &InteractionDataset,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<BprTriple>> {
    let mut prefix = Vec::with_capacity(dataset.n_users + 1);
    prefix.push(0usize);
    for items in &dataset.train_positives {
        prefix.push(prefix.last().unwrap() + items.len());
    }
    let total = *prefix.last().unwrap();
    if total == 0 {
        return Err(Error::EmptyDataset("no training interactions to sample".into()));
    }
    if dataset
        .train_positives
        .iter()
        .all(|p| p.is_empty() || p.len() >= dataset.n_items)
    {
        return Err(Error::NoNegativeItems);
    }

    let mut triples = Vec::with_capacity(batch_size);
    while triples.len() < batch_size {
        let t = rng.random_range(0..total);
        let user = prefix.partition_point(|&p| p <= t) - 1;
        let positives = &dataset.train_positives[user];
        if positives.len() >= dataset.n_items {
            continue;
        }
        let pos_item = positives[rng.random_range(0..positives.len())];
        let neg_item = loop {
            let candidate = rng.random_range(0..dataset.n_items);
            if positives.binary_search(&candidate).is_err() {
                break candidate;
            }
        };
        triples.push(BprTriple {
            user,
            pos_item,
            neg_item,
        });
    }
    Ok(triples)
}

fn score(trace: &ForwardTrace, user: usize, item: usize) -> f64 {
    trace
        .final_embedding
        .row(user)
        .dot(&trace.final_embedding.row(trace.n_users + item))
}

/// Mean ranking loss over the batch plus the scaled regularization term.
pub fn bpr_loss(
    trace: &ForwardTrace,
    batch: &[BprTriple],
    params: &ModelParams,
    lambda_reg: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for t in batch {
        let margin = score(trace, t.user, t.pos_item) - score(trace, t.user, t.neg_item);
        total += softplus(-margin);
    }
    total += lambda_reg * params.squared_norm();
    let loss = total / batch.len().max(1) as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite {
            context: "ranking loss".into(),
        })
    }
}

/// Forward pass plus exact reverse-mode gradients of `bpr_loss` with respect
/// to every parameter entry.
pub fn compute_gradients(
    params: &ModelParams,
    inputs: &GraphInputs,
    batch: &[BprTriple],
    config: &TrainConfig,
) -> Result<(f64, Gradients)> {
    let trace = forward(params, inputs, config.variant, config.leaky_slope)?;
    let loss = bpr_loss(&trace, batch, params, config.lambda_reg)?;

    let n_users = trace.n_users;
    let e_star = &trace.final_embedding;
    let width = e_star.ncols();

    // Gradient of the (unscaled) ranking sum with respect to E*.
    let mut d_star = Array2::<f64>::zeros(e_star.raw_dim());
    for t in batch {
        let pos_row = n_users + t.pos_item;
        let neg_row = n_users + t.neg_item;
        let margin = score(&trace, t.user, t.pos_item) - score(&trace, t.user, t.neg_item);
        // d/dm of softplus(-m).
        let c = -sigmoid(-margin);
        for j in 0..width {
            let u = e_star[[t.user, j]];
            let p = e_star[[pos_row, j]];
            let n = e_star[[neg_row, j]];
            d_star[[t.user, j]] += c * (p - n);
            d_star[[pos_row, j]] += c * u;
            d_star[[neg_row, j]] -= c * u;
        }
    }

    let n_layers = params.n_layers();
    let d = params.d();
    // Per-layer slices of dE*: the concatenation splits by block, the
    // averaging variant spreads dE*/(L+1) onto every layer.
    let block = |k: usize| -> Array2<f64> {
        match config.variant {
            PropagationVariant::LightgcnLike => &d_star / (n_layers + 1) as f64,
            _ => d_star.slice(ndarray::s![.., k * d..(k + 1) * d]).to_owned(),
        }
    };

    let mut grads = Gradients::zeros_like(params);
    let gamma_t = inputs.gamma.transpose();
    let delta_t = inputs.delta.transpose();

    // d_current holds the loss gradient with respect to the output of layer
    // k+1 while iterating k = L-1 .. 0.
    let mut d_current = block(n_layers);
    for k in (0..n_layers).rev() {
        let d_input = match config.variant {
            PropagationVariant::LightgcnLike => gamma_t.spmm(&d_current)?,
            _ => {
                let mask = leaky_relu_mask(&trace.pre_activations[k], config.leaky_slope);
                let dz = &d_current * &mask;
                let propagated = inputs.gamma.spmm(&trace.layer_inputs[k])?;
                grads.layers[k].w1 = propagated.t().dot(&dz);
                grads.layers[k].bias = dz.sum_axis(Axis(0));
                let mut dp = dz.dot(&params.layers[k].w1.t());
                if config.variant == PropagationVariant::Wigcn {
                    let weighted = inputs.delta.spmm(&propagated)?;
                    grads.layers[k].w2 = weighted.t().dot(&dz);
                    dp += &delta_t.spmm(&dz.dot(&params.layers[k].w2.t()))?;
                }
                gamma_t.spmm(&dp)?
            }
        };
        d_current = block(k) + d_input;
    }
    grads.e0 = d_current;

    // Fold in the regularization term and the mean reduction.
    let scale = 1.0 / batch.len().max(1) as f64;
    let reg = 2.0 * config.lambda_reg;
    grads
        .e0
        .zip_mut_with(&params.e0, |g, &p| *g = (*g + reg * p) * scale);
    for (lg, lp) in grads.layers.iter_mut().zip(&params.layers) {
        lg.w1.zip_mut_with(&lp.w1, |g, &p| *g = (*g + reg * p) * scale);
        lg.w2.zip_mut_with(&lp.w2, |g, &p| *g = (*g + reg * p) * scale);
        lg.bias.zip_mut_with(&lp.bias, |g, &p| *g = (*g + reg * p) * scale);
    }
    grads.ensure_finite()?;
    Ok((loss, grads))
}

fn adam_update<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr: f64,
    c1: f64,
    c2: f64,
) {
    ndarray::Zip::from(param.view_mut())
        .and(grad.view())
        .and(m.view_mut())
        .and(v.view_mut())
        .for_each(|p, &g, m, v| {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        });
}

/// One Adam update over every parameter block.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let c1 = 1.0 - BETA1.powi(state.step as i32);
    let c2 = 1.0 - BETA2.powi(state.step as i32);
    adam_update(&mut params.e0, &grads.e0, &mut state.m.e0, &mut state.v.e0, lr, c1, c2);
    for ((lp, lg), (lm, lv)) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        adam_update(&mut lp.w1, &lg.w1, &mut lm.w1, &mut lv.w1, lr, c1, c2);
        adam_update(&mut lp.w2, &lg.w2, &mut lm.w2, &mut lv.w2, lr, c1, c2);
        adam_update(&mut lp.bias, &lg.bias, &mut lm.bias, &mut lv.bias, lr, c1, c2);
    }
}

/// Full training loop: He initialization, `ceil(|train| / batch_size)`
/// freshly sampled batches per epoch, Adam updates, per-epoch mean loss.
/// Bit-reproducible for a fixed seed on one machine.
pub fn train(
    dataset: &InteractionDataset,
    inputs: &GraphInputs,
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<EpochStats>)> {
    train_with(dataset, inputs, config, |_, _| Ok(()))
}

/// `train` with an observer called after every epoch, for streaming history
/// and periodic checkpoints. An observer error aborts the run.
pub fn train_with<F>(
    dataset: &InteractionDataset,
    inputs: &GraphInputs,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<(ModelParams, Vec<EpochStats>)>
where
    F: FnMut(&ModelParams, &EpochStats) -> Result<()>,
{
    config.validate()?;
    let n_train = dataset.n_train();
    if n_train == 0 {
        return Err(Error::EmptyDataset("no training interactions".into()));
    }
    let mut params = init_params(
        dataset.n_users,
        dataset.n_items,
        config.d,
        config.n_layers,
        config.seed,
    )?;
    let mut adam = AdamState::new(&params);
    // Stream 1 keeps batch sampling decoupled from the stream-0 draws used
    // by parameter initialization.
    let mut sampler = ChaCha8Rng::seed_from_u64(config.seed);
    sampler.set_stream(1);

    let batches_per_epoch = n_train.div_ceil(config.batch_size).max(1);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut loss_sum = 0.0;
        for _ in 0..batches_per_epoch {
            let batch = sample_bpr_batch(dataset, config.batch_size, &mut sampler)?;
            let (loss, grads) = match compute_gradients(&params, inputs, &batch, config) {
                Ok(pair) => pair,
                Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                Err(other) => return Err(other),
            };
            adam_step(&mut params, &grads, &mut adam, config.learning_rate);
            loss_sum += loss;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / batches_per_epoch as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&params, &stats)?;
        history.push(stats);
    }
    Ok((params, history))
}
