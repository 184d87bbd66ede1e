//! Trainable parameters and the layered propagation forward pass.
//!
//! Each layer transforms the stacked user/item embedding matrix E by
//!
//! ```text
//! E_k = LeakyReLU(Γ·E_{k-1}·W1 + Δ·Γ·E_{k-1}·W2 + b)
//! ```
//!
//! and the final representation E* concatenates every layer's output along
//! the feature axis. Two ablations are built in: `NgcfLike` drops the Δ term,
//! `LightgcnLike` drops the weights, bias and nonlinearity entirely and
//! averages layers instead of concatenating.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphInputs;

/// Which propagation rule the forward pass applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationVariant {
    /// Both the adjacency term and the weighted co-interaction term.
    #[default]
    Wigcn,
    /// Adjacency term only; the co-interaction term is removed.
    NgcfLike,
    /// Plain averaging propagation: no weights, no bias, no activation.
    LightgcnLike,
}

impl FromStr for PropagationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wigcn" => Ok(Self::Wigcn),
            "ngcf_like" => Ok(Self::NgcfLike),
            "lightgcn_like" => Ok(Self::LightgcnLike),
            other => Err(Error::InvalidArgument(format!(
                "unknown variant {other:?}; expected wigcn, ngcf_like or lightgcn_like"
            ))),
        }
    }
}

impl fmt::Display for PropagationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Wigcn => "wigcn",
            Self::NgcfLike => "ngcf_like",
            Self::LightgcnLike => "lightgcn_like",
        })
    }
}

/// Per-layer trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All trainable parameters: the embedding table (users stacked above items)
/// and one `LayerParams` per propagation layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub e0: Array2<f64>,
    pub layers: Vec<LayerParams>,
}

impl ModelParams {
    pub fn n_vertices(&self) -> usize {
        self.e0.nrows()
    }

    pub fn d(&self) -> usize {
        self.e0.ncols()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Width of E* under the given variant.
    pub fn embedding_width(&self, variant: PropagationVariant) -> usize {
        match variant {
            PropagationVariant::LightgcnLike => self.d(),
            _ => self.d() * (self.n_layers() + 1),
        }
    }

    /// Squared L2 norm over every trainable entry.
    pub fn squared_norm(&self) -> f64 {
        let mut total: f64 = self.e0.iter().map(|v| v * v).sum();
        for layer in &self.layers {
            total += layer.w1.iter().map(|v| v * v).sum::<f64>();
            total += layer.w2.iter().map(|v| v * v).sum::<f64>();
            total += layer.bias.iter().map(|v| v * v).sum::<f64>();
        }
        total
    }
}

/// Everything the forward pass computed, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// E_0 .. E_{L-1}: the input to each layer.
    pub layer_inputs: Vec<Array2<f64>>,
    /// The activation argument of each layer, in layer order. Empty for
    /// `LightgcnLike`, which applies no activation.
    pub pre_activations: Vec<Array2<f64>>,
    /// E*: the per-vertex final representation.
    pub final_embedding: Array2<f64>,
    pub n_users: usize,
}

/// He-normal initialization: each weight matrix with fan-in f is drawn from
/// N(0, 2/f); the embedding table uses fan-in d; biases start at zero.
/// Sampling order is fixed (e0, then per layer w1 then w2) so a seed pins
/// every entry.
pub fn init_params(
    n_users: usize,
    n_items: usize,
    d: usize,
    n_layers: usize,
    seed: u64,
) -> Result<ModelParams> {
    if n_users == 0 || n_items == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot initialize a model over {n_users} users and {n_items} items"
        )));
    }
    if d == 0 || n_layers == 0 {
        return Err(Error::InvalidArgument(format!(
            "embedding width {d} and layer count {n_layers} must both be at least 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let he = |fan_in: usize| Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();

    let e0_dist = he(d);
    let e0 = Array2::from_shape_fn((n_users + n_items, d), |_| e0_dist.sample(&mut rng));
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let w_dist = he(d);
        let w1 = Array2::from_shape_fn((d, d), |_| w_dist.sample(&mut rng));
        let w2 = Array2::from_shape_fn((d, d), |_| w_dist.sample(&mut rng));
        layers.push(LayerParams {
            w1,
            w2,
            bias: Array1::zeros(d),
        });
    }
    Ok(ModelParams { e0, layers })
}

/// Elementwise LeakyReLU.
pub fn leaky_relu(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v >= 0.0 { v } else { slope * v })
}

/// Derivative of LeakyReLU: 1 for x >= 0 (the kink at 0 is assigned slope 1),
/// `slope` for x < 0.
pub fn leaky_relu_mask(x: &Array2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v >= 0.0 { 1.0 } else { slope })
}

fn ensure_finite(m: &Array2<f64>, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

/// Run the propagation stack and keep every intermediate.
pub fn forward(
    params: &ModelParams,
    inputs: &GraphInputs,
    variant: PropagationVariant,
    leaky_slope: f64,
) -> Result<ForwardTrace> {
    let size = inputs.n_vertices();
    if params.n_vertices() != size {
        return Err(Error::DimensionMismatch {
            context: "forward".into(),
            expected: format!("{size} embedding rows"),
            actual: format!("{}", params.n_vertices()),
        });
    }
    let n_layers = params.n_layers();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut pre_activations = Vec::with_capacity(n_layers);
    let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
    let mut current = params.e0.clone();

    for (k, layer) in params.layers.iter().enumerate() {
        let next = match variant {
            PropagationVariant::LightgcnLike => inputs.gamma.spmm(&current)?,
            PropagationVariant::NgcfLike | PropagationVariant::Wigcn => {
                let propagated = inputs.gamma.spmm(&current)?;
                let mut z = propagated.dot(&layer.w1);
                if variant == PropagationVariant::Wigcn {
                    let weighted = inputs.delta.spmm(&propagated)?;
                    z += &weighted.dot(&layer.w2);
                }
                z += &layer.bias;
                pre_activations.push(z.clone());
                leaky_relu(&z, leaky_slope)
            }
        };
        ensure_finite(&next, &format!("forward layer {}", k + 1))?;
        layer_inputs.push(current);
        outputs.push(next.clone());
        current = next;
    }

    let final_embedding = match variant {
        PropagationVariant::LightgcnLike => {
            let mut mean = layer_inputs[0].clone();
            for out in &outputs {
                mean += out;
            }
            mean / (n_layers + 1) as f64
        }
        _ => {
            let mut pieces: Vec<ndarray::ArrayView2<f64>> = vec![layer_inputs[0].view()];
            pieces.extend(outputs.iter().map(|o| o.view()));
            ndarray::concatenate(Axis(1), &pieces).expect("layer outputs share row count")
        }
    };

    Ok(ForwardTrace {
        layer_inputs,
        pre_activations,
        final_embedding,
        n_users: inputs.n_users,
    })
}

/// Scores of one user against every item: the inner products of the user's
/// E* row with each item row.
pub fn predict_scores(trace: &ForwardTrace, user_index: usize) -> Result<Vec<f64>> {
    let n_users = trace.n_users;
    if user_index >= n_users {
        return Err(Error::UnknownUser(user_index as u64));
    }
    let n_items = trace.final_embedding.nrows() - n_users;
    let user_row = trace.final_embedding.row(user_index);
    let mut scores = Vec::with_capacity(n_items);
    for item in 0..n_items {
        let item_row = trace.final_embedding.row(n_users + item);
        scores.push(user_row.dot(&item_row));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_interaction_matrix, GraphInputs};
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn toy_inputs() -> GraphInputs {
        let r = build_interaction_matrix(&[(0, 0), (0, 1), (1, 1), (2, 2), (2, 3), (1, 3)], 3, 4)
            .unwrap();
        GraphInputs::build(&r).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            PropagationVariant::Wigcn,
            PropagationVariant::NgcfLike,
            PropagationVariant::LightgcnLike,
        ] {
            assert_eq!(v.to_string().parse::<PropagationVariant>().unwrap(), v);
        }
        assert!("gcn".parse::<PropagationVariant>().is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(3, 4, 8, 2, 99).unwrap();
        let b = init_params(3, 4, 8, 2, 99).unwrap();
        assert_eq!(a, b);
        let c = init_params(3, 4, 8, 2, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_degenerate_shapes() {
        assert!(init_params(0, 4, 8, 2, 0).is_err());
        assert!(init_params(3, 0, 8, 2, 0).is_err());
        assert!(init_params(3, 4, 0, 2, 0).is_err());
        assert!(init_params(3, 4, 8, 0, 0).is_err());
    }

    #[test]
    fn init_matches_he_standard_deviation() {
        let params = init_params(40, 40, 64, 1, 7).unwrap();
        let w1 = &params.layers[0].w1;
        assert_eq!(w1.len(), 4096);
        let mean = w1.iter().sum::<f64>() / w1.len() as f64;
        let var = w1.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w1.len() - 1) as f64;
        let expected = (2.0 / 64.0f64).sqrt();
        assert!((var.sqrt() - expected).abs() / expected < 0.1);
        assert!(params.layers[0].bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn leaky_relu_values_and_mask() {
        let x = array![[2.0, -1.0, 0.0]];
        let y = leaky_relu(&x, 0.2);
        assert_eq!(y, array![[2.0, -0.2, 0.0]]);
        let mask = leaky_relu_mask(&x, 0.2);
        assert_eq!(mask, array![[1.0, 0.2, 1.0]]);
    }

    // Single user-item pair, d=1, L=1, unit weights, zero bias. With
    // e0 = [1, -0.5]: ΓE = [-0.5, 1], Δ(ΓE) = ΓE, so the activation argument
    // is [-1, 2] and E_1 = [-0.2, 2]. The user/item score is then
    // 1·(-0.5) + (-0.2)·2 = -0.9.
    #[test]
    fn forward_matches_hand_computation_on_single_pair() {
        let r = build_interaction_matrix(&[(0, 0)], 1, 1).unwrap();
        let inputs = GraphInputs::build(&r).unwrap();
        let params = ModelParams {
            e0: array![[1.0], [-0.5]],
            layers: vec![LayerParams {
                w1: array![[1.0]],
                w2: array![[1.0]],
                bias: array![0.0],
            }],
        };
        let trace = forward(&params, &inputs, PropagationVariant::Wigcn, 0.2).unwrap();
        assert_eq!(trace.pre_activations[0], array![[-1.0], [2.0]]);
        assert_eq!(trace.final_embedding, array![[1.0, -0.2], [-0.5, 2.0]]);
        let scores = predict_scores(&trace, 0).unwrap();
        assert!((scores[0] - (-0.9)).abs() < 1e-15);
    }

    #[test]
    fn zero_delta_makes_wigcn_equal_ngcf_like() {
        let inputs = toy_inputs();
        let zeroed = GraphInputs {
            delta: crate::sparse::SparseMatrix::zeros(inputs.n_vertices(), inputs.n_vertices()),
            ..inputs.clone()
        };
        let params = init_params(3, 4, 4, 2, 5).unwrap();
        let a = forward(&params, &zeroed, PropagationVariant::Wigcn, 0.2).unwrap();
        let b = forward(&params, &zeroed, PropagationVariant::NgcfLike, 0.2).unwrap();
        assert_eq!(a.final_embedding, b.final_embedding);
    }

    #[test]
    fn final_embedding_width_is_layer_sum() {
        let inputs = toy_inputs();
        let params = init_params(3, 4, 64, 3, 1).unwrap();
        let trace = forward(&params, &inputs, PropagationVariant::Wigcn, 0.2).unwrap();
        assert_eq!(trace.final_embedding.ncols(), 256);
        assert_eq!(params.embedding_width(PropagationVariant::Wigcn), 256);
    }

    #[test]
    fn trace_outputs_are_activated_pre_activations() {
        let inputs = toy_inputs();
        let params = init_params(3, 4, 4, 2, 3).unwrap();
        let trace = forward(&params, &inputs, PropagationVariant::Wigcn, 0.2).unwrap();
        let recomputed = leaky_relu(&trace.pre_activations[0], 0.2);
        assert_eq!(trace.layer_inputs[1], recomputed);
    }

    #[test]
    fn lightgcn_like_ignores_weights_entirely() {
        let inputs = toy_inputs();
        let mut params = init_params(3, 4, 4, 2, 11).unwrap();
        for layer in &mut params.layers {
            layer.w1.fill(f64::NAN);
            layer.w2.fill(f64::NAN);
            layer.bias.fill(f64::NAN);
        }
        let trace = forward(&params, &inputs, PropagationVariant::LightgcnLike, 0.2).unwrap();
        assert!(trace.final_embedding.iter().all(|v| v.is_finite()));
        assert_eq!(trace.final_embedding.ncols(), 4);
    }

    #[test]
    fn lightgcn_like_averages_layers() {
        let inputs = toy_inputs();
        let params = init_params(3, 4, 4, 2, 13).unwrap();
        let trace = forward(&params, &inputs, PropagationVariant::LightgcnLike, 0.2).unwrap();
        let e1 = inputs.gamma.spmm(&params.e0).unwrap();
        let e2 = inputs.gamma.spmm(&e1).unwrap();
        let mean = (&params.e0 + &e1 + &e2) / 3.0;
        for (a, b) in trace.final_embedding.iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    // With slope 1 the activation is the identity and the whole stack is
    // linear in e0 for fixed weights.
    #[test]
    fn forward_is_linear_in_e0_when_slope_is_one() {
        let inputs = toy_inputs();
        let base = init_params(3, 4, 4, 2, 21).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let ea = Array2::from_shape_fn((7, 4), |_| rng.random_range(-1.0..1.0));
        let eb = Array2::from_shape_fn((7, 4), |_| rng.random_range(-1.0..1.0));

        let with_e0 = |e0: Array2<f64>| {
            let params = ModelParams {
                e0,
                layers: base.layers.clone(),
            };
            forward(&params, &inputs, PropagationVariant::Wigcn, 1.0)
                .unwrap()
                .final_embedding
        };
        let sum = with_e0(&ea + &eb);
        let parts = with_e0(ea) + &with_e0(eb);
        for (a, b) in sum.iter().zip(parts.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_reports_non_finite_layer() {
        let inputs = toy_inputs();
        let mut params = init_params(3, 4, 4, 2, 31).unwrap();
        params.layers[1].w1.fill(f64::INFINITY);
        let err = forward(&params, &inputs, PropagationVariant::Wigcn, 0.2).unwrap_err();
        match err {
            Error::NonFinite { context } => assert!(context.contains("layer 2")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn predict_scores_is_row_inner_product() {
        let trace = ForwardTrace {
            layer_inputs: Vec::new(),
            pre_activations: Vec::new(),
            final_embedding: array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]],
            n_users: 1,
        };
        let scores = predict_scores(&trace, 0).unwrap();
        assert_eq!(scores, vec![0.0, 1.0]);
        assert!(predict_scores(&trace, 1).is_err());
    }

    #[test]
    fn predict_scores_matches_dense_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let e = Array2::from_shape_fn((9, 5), |_| rng.random_range(-1.0..1.0));
        let trace = ForwardTrace {
            layer_inputs: Vec::new(),
            pre_activations: Vec::new(),
            final_embedding: e.clone(),
            n_users: 4,
        };
        for u in 0..4 {
            let scores = predict_scores(&trace, u).unwrap();
            for i in 0..5 {
                let want: f64 = (0..5).map(|j| e[[u, j]] * e[[4 + i, j]]).sum();
                assert!((scores[i] - want).abs() < 1e-12);
            }
        }
    }
}
