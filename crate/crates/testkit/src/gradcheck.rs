//! Finite-difference gradient checking against the training objective.
//!
//! Parameters are viewed as one flat vector (embedding table row-major, then
//! per layer w1, w2, bias) so analytic and numeric gradients can be compared
//! entry by entry.

use wigcn::{
    bpr_loss, forward, BprTriple, Gradients, GraphInputs, ModelParams, PropagationVariant,
};

/// Every parameter entry in the fixed flattening order.
pub fn flatten_params(params: &ModelParams) -> Vec<f64> {
    let mut flat: Vec<f64> = params.e0.iter().copied().collect();
    for layer in &params.layers {
        flat.extend(layer.w1.iter());
        flat.extend(layer.w2.iter());
        flat.extend(layer.bias.iter());
    }
    flat
}

/// Gradient entries in the same order as `flatten_params`.
pub fn flatten_grads(grads: &Gradients) -> Vec<f64> {
    let mut flat: Vec<f64> = grads.e0.iter().copied().collect();
    for layer in &grads.layers {
        flat.extend(layer.w1.iter());
        flat.extend(layer.w2.iter());
        flat.extend(layer.bias.iter());
    }
    flat
}

/// Write a flat vector back into the parameter struct. Panics when lengths
/// disagree; the flattening order is the contract.
pub fn assign_params(params: &mut ModelParams, flat: &[f64]) {
    let mut it = flat.iter();
    let mut next = || *it.next().expect("flat vector shorter than the parameter count");
    for v in params.e0.iter_mut() {
        *v = next();
    }
    for layer in &mut params.layers {
        for v in layer.w1.iter_mut() {
            *v = next();
        }
        for v in layer.w2.iter_mut() {
            *v = next();
        }
        for v in layer.bias.iter_mut() {
            *v = next();
        }
    }
    assert!(
        it.next().is_none(),
        "flat vector longer than the parameter count"
    );
}

/// The training objective as a plain function of the parameters.
pub fn loss_at(
    params: &ModelParams,
    inputs: &GraphInputs,
    batch: &[BprTriple],
    variant: PropagationVariant,
    leaky_slope: f64,
    lambda_reg: f64,
) -> f64 {
    let trace = forward(params, inputs, variant, leaky_slope).expect("forward pass failed");
    bpr_loss(&trace, batch, params, lambda_reg).expect("loss is not finite")
}

/// Central differences of `loss_at` for every parameter entry, step `h`.
pub fn fd_gradients(
    params: &ModelParams,
    inputs: &GraphInputs,
    batch: &[BprTriple],
    variant: PropagationVariant,
    leaky_slope: f64,
    lambda_reg: f64,
    h: f64,
) -> Vec<f64> {
    let base = flatten_params(params);
    let mut scratch = params.clone();
    let mut bumped = base.clone();
    let mut out = Vec::with_capacity(base.len());
    for idx in 0..base.len() {
        bumped[idx] = base[idx] + h;
        assign_params(&mut scratch, &bumped);
        let up = loss_at(&scratch, inputs, batch, variant, leaky_slope, lambda_reg);
        bumped[idx] = base[idx] - h;
        assign_params(&mut scratch, &bumped);
        let down = loss_at(&scratch, inputs, batch, variant, leaky_slope, lambda_reg);
        bumped[idx] = base[idx];
        out.push((up - down) / (2.0 * h));
    }
    out
}

/// Smallest |z| over all pre-activation entries, or +inf when the variant
/// applies no activation. Instances where this is tiny sit near a kink of the
/// activation and are useless for finite differences.
pub fn min_abs_preactivation(
    params: &ModelParams,
    inputs: &GraphInputs,
    variant: PropagationVariant,
    leaky_slope: f64,
) -> f64 {
    let trace = forward(params, inputs, variant, leaky_slope).expect("forward pass failed");
    trace
        .pre_activations
        .iter()
        .flat_map(|z| z.iter())
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
}
