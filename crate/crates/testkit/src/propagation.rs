//! Per-node message-passing oracle for the propagation forward pass.
//!
//! Instead of sparse matrix products, each layer is expanded vertex by
//! vertex: the neighbor term sums e_s / sqrt(|N_t||N_s|) over the bipartite
//! neighbors s of t (factors recomputed from degree counts, never read from
//! the implementation's normalized matrices), and the co-interaction term
//! applies the dense Δ row of t to the per-node neighbor sums.

use ndarray::Array2;
use wigcn::{ModelParams, PropagationVariant};

use crate::dense::dense_delta;

/// Forward pass by scalar loops; returns the final per-vertex embedding.
pub fn node_wise_forward(
    pairs: &[(usize, usize)],
    n_users: usize,
    n_items: usize,
    params: &ModelParams,
    variant: PropagationVariant,
    slope: f64,
) -> Array2<f64> {
    let mut edges: Vec<(usize, usize)> = pairs.to_vec();
    edges.sort_unstable();
    edges.dedup();

    let size = n_users + n_items;
    let d = params.d();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); size];
    for &(u, i) in &edges {
        neighbors[u].push(n_users + i);
        neighbors[n_users + i].push(u);
    }
    let delta = dense_delta(&edges, n_users, n_items);

    let mut layer_outputs = vec![params.e0.clone()];
    let mut e = params.e0.clone();
    for layer in &params.layers {
        // neighbor_sum[t] = sum over s in N(t) of e_s / sqrt(|N_t||N_s|)
        let mut neighbor_sum = Array2::<f64>::zeros((size, d));
        for t in 0..size {
            for &s in &neighbors[t] {
                let factor =
                    1.0 / ((neighbors[t].len() as f64) * (neighbors[s].len() as f64)).sqrt();
                for j in 0..d {
                    neighbor_sum[[t, j]] += factor * e[[s, j]];
                }
            }
        }
        let next = match variant {
            PropagationVariant::LightgcnLike => neighbor_sum,
            _ => {
                let mut z = Array2::<f64>::zeros((size, d));
                for t in 0..size {
                    for o in 0..d {
                        let mut acc = layer.bias[o];
                        for j in 0..d {
                            acc += neighbor_sum[[t, j]] * layer.w1[[j, o]];
                        }
                        z[[t, o]] = acc;
                    }
                }
                if variant == PropagationVariant::Wigcn {
                    for t in 0..size {
                        let mut weighted = vec![0.0; d];
                        for v in 0..size {
                            let coeff = delta[[t, v]];
                            if coeff != 0.0 {
                                for j in 0..d {
                                    weighted[j] += coeff * neighbor_sum[[v, j]];
                                }
                            }
                        }
                        for o in 0..d {
                            let mut acc = 0.0;
                            for j in 0..d {
                                acc += weighted[j] * layer.w2[[j, o]];
                            }
                            z[[t, o]] += acc;
                        }
                    }
                }
                z.mapv(|v| if v >= 0.0 { v } else { slope * v })
            }
        };
        layer_outputs.push(next.clone());
        e = next;
    }

    match variant {
        PropagationVariant::LightgcnLike => {
            let mut mean = Array2::<f64>::zeros((size, d));
            for out in &layer_outputs {
                mean += out;
            }
            mean / layer_outputs.len() as f64
        }
        _ => {
            let views: Vec<_> = layer_outputs.iter().map(|o| o.view()).collect();
            ndarray::concatenate(ndarray::Axis(1), &views).expect("equal row counts")
        }
    }
}
