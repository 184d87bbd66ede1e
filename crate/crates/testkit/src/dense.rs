//! Dense brute-force versions of the graph constructions, computed with
//! scalar triple loops straight from the interaction pairs.

use ndarray::Array2;
use wigcn::Side;

fn dense_r(pairs: &[(usize, usize)], n_users: usize, n_items: usize) -> Array2<f64> {
    let mut r = Array2::zeros((n_users, n_items));
    for &(u, i) in pairs {
        r[[u, i]] = 1.0;
    }
    r
}

/// Pairwise common-neighbor counts by double loop.
pub fn dense_co_interaction(
    pairs: &[(usize, usize)],
    n_users: usize,
    n_items: usize,
    side: Side,
) -> Array2<f64> {
    let r = dense_r(pairs, n_users, n_items);
    match side {
        Side::User => {
            let mut w = Array2::zeros((n_users, n_users));
            for a in 0..n_users {
                for b in 0..n_users {
                    let mut common = 0.0;
                    for i in 0..n_items {
                        common += r[[a, i]] * r[[b, i]];
                    }
                    w[[a, b]] = common;
                }
            }
            w
        }
        Side::Item => {
            let mut w = Array2::zeros((n_items, n_items));
            for a in 0..n_items {
                for b in 0..n_items {
                    let mut common = 0.0;
                    for u in 0..n_users {
                        common += r[[u, a]] * r[[u, b]];
                    }
                    w[[a, b]] = common;
                }
            }
            w
        }
    }
}

/// Row-stochastic scaling: divide each row by its sum of absolute values.
pub fn dense_l1_normalize(w: &Array2<f64>) -> Array2<f64> {
    let mut out = w.clone();
    for mut row in out.rows_mut() {
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    out
}

/// Normalized bipartite adjacency over the joint (users then items) index
/// space, entries 1/sqrt(deg_u * deg_i).
pub fn dense_gamma(pairs: &[(usize, usize)], n_users: usize, n_items: usize) -> Array2<f64> {
    let r = dense_r(pairs, n_users, n_items);
    let size = n_users + n_items;
    let mut a = Array2::zeros((size, size));
    for u in 0..n_users {
        for i in 0..n_items {
            a[[u, n_users + i]] = r[[u, i]];
            a[[n_users + i, u]] = r[[u, i]];
        }
    }
    symmetric_scale_by_row_sums(&a)
}

/// Normalized block diagonal of the two co-interaction matrices, using the
/// block matrix's own row sums.
pub fn dense_delta(pairs: &[(usize, usize)], n_users: usize, n_items: usize) -> Array2<f64> {
    let w_u = dense_co_interaction(pairs, n_users, n_items, Side::User);
    let w_i = dense_co_interaction(pairs, n_users, n_items, Side::Item);
    let size = n_users + n_items;
    let mut b = Array2::zeros((size, size));
    for a in 0..n_users {
        for c in 0..n_users {
            b[[a, c]] = w_u[[a, c]];
        }
    }
    for a in 0..n_items {
        for c in 0..n_items {
            b[[n_users + a, n_users + c]] = w_i[[a, c]];
        }
    }
    symmetric_scale_by_row_sums(&b)
}

fn symmetric_scale_by_row_sums(m: &Array2<f64>) -> Array2<f64> {
    let size = m.nrows();
    let mut inv_sqrt = vec![0.0; size];
    for i in 0..size {
        let sum: f64 = (0..size).map(|j| m[[i, j]]).sum();
        if sum > 0.0 {
            inv_sqrt[i] = 1.0 / sum.sqrt();
        }
    }
    let mut out = Array2::zeros((size, size));
    for i in 0..size {
        for j in 0..size {
            out[[i, j]] = m[[i, j]] * (inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    out
}
