//! Construction of the two propagation inputs.
//!
//! From a binary user-item matrix R we build:
//!
//! * Γ: the symmetrically normalized bipartite adjacency, from
//!   A = [[0, R], [Rᵀ, 0]] with D taken from A's row sums.
//! * Δ: the symmetrically normalized block diagonal of the two co-interaction
//!   matrices W_U = R·Rᵀ and W_I = Rᵀ·R, with D taken from the block matrix's
//!   own row sums. Since the blocks are non-negative, those row sums are the
//!   rows' L1 norms, so this is the L1-scaled form of the co-interaction
//!   weights that still keeps Δ symmetric. (A plain row-stochastic scaling
//!   would not: it is available separately as [`normalize_l1`].)
//!
//! Both are (n+m)×(n+m) over the joint vertex ordering: users 0..n, then
//! items n..n+m. Zero-degree vertices normalize to zero rows and columns
//! rather than infinities.

use crate::error::{Error, Result};
use crate::sparse::{symmetric_normalize, SparseMatrix};

/// Which side of the bipartite graph a co-interaction matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

/// The two normalized matrices the propagation layers consume.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub gamma: SparseMatrix,
    pub delta: SparseMatrix,
    pub n_users: usize,
    pub n_items: usize,
}

impl GraphInputs {
    /// Full pipeline from a binary interaction matrix.
    pub fn build(r: &SparseMatrix) -> Result<GraphInputs> {
        let w_u = co_interaction(r, Side::User)?;
        let w_i = co_interaction(r, Side::Item)?;
        let gamma = build_gamma(r);
        let delta = build_delta(&w_u, &w_i)?;
        Ok(GraphInputs {
            gamma,
            delta,
            n_users: r.n_rows(),
            n_items: r.n_cols(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_users + self.n_items
    }
}

/// Binary interaction matrix from (user, item) pairs. Duplicates collapse to
/// a single 1.
pub fn build_interaction_matrix(
    interactions: &[(usize, usize)],
    n_users: usize,
    n_items: usize,
) -> Result<SparseMatrix> {
    for &(user, item) in interactions {
        if user >= n_users || item >= n_items {
            return Err(Error::InteractionOutOfRange {
                user,
                item,
                n_users,
                n_items,
            });
        }
    }
    let mut pairs: Vec<(usize, usize)> = interactions.to_vec();
    pairs.sort_unstable();
    pairs.dedup();
    SparseMatrix::from_triplets(n_users, n_items, pairs.into_iter().map(|(u, i)| (u, i, 1.0)))
}

/// Pairwise common-neighbor counts: W_U = R·Rᵀ for the user side, W_I = Rᵀ·R
/// for the item side. Diagonal entries equal vertex degrees.
pub fn co_interaction(r: &SparseMatrix, side: Side) -> Result<SparseMatrix> {
    let rt = r.transpose();
    match side {
        Side::User => r.matmul(&rt),
        Side::Item => rt.matmul(r),
    }
}

/// Divide each row by its L1 norm; zero rows stay zero. Input must be
/// non-negative.
pub fn normalize_l1(w: &SparseMatrix) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(w.nnz());
    for i in 0..w.n_rows() {
        let (cols, vals) = w.row(i);
        let norm: f64 = vals.iter().sum();
        for (&j, &v) in cols.iter().zip(vals) {
            if v < 0.0 {
                return Err(Error::NegativeValue {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            triplets.push((i, j, v / norm));
        }
    }
    SparseMatrix::from_triplets(w.n_rows(), w.n_cols(), triplets)
}

/// Symmetrically normalized bipartite adjacency over users then items.
pub fn build_gamma(r: &SparseMatrix) -> SparseMatrix {
    let n = r.n_rows();
    let m = r.n_cols();
    let mut triplets = Vec::with_capacity(2 * r.nnz());
    for u in 0..n {
        let (items, vals) = r.row(u);
        for (&i, &v) in items.iter().zip(vals) {
            triplets.push((u, n + i, v));
            triplets.push((n + i, u, v));
        }
    }
    let a = SparseMatrix::from_triplets(n + m, n + m, triplets)
        .expect("adjacency indices are in range by construction");
    symmetric_normalize(&a)
}

/// Block diagonal of the two co-interaction matrices, normalized by the
/// inverse square roots of its own row sums (the rows' L1 norms). Symmetric
/// inputs give a symmetric result.
pub fn build_delta(w_u: &SparseMatrix, w_i: &SparseMatrix) -> Result<SparseMatrix> {
    if w_u.n_rows() != w_u.n_cols() {
        return Err(Error::DimensionMismatch {
            context: "user co-interaction block".into(),
            expected: "square matrix".into(),
            actual: format!("{}x{}", w_u.n_rows(), w_u.n_cols()),
        });
    }
    if w_i.n_rows() != w_i.n_cols() {
        return Err(Error::DimensionMismatch {
            context: "item co-interaction block".into(),
            expected: "square matrix".into(),
            actual: format!("{}x{}", w_i.n_rows(), w_i.n_cols()),
        });
    }
    let n = w_u.n_rows();
    let m = w_i.n_rows();
    let mut triplets = Vec::with_capacity(w_u.nnz() + w_i.nnz());
    for i in 0..n {
        let (cols, vals) = w_u.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((i, j, v));
        }
    }
    for i in 0..m {
        let (cols, vals) = w_i.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            triplets.push((n + i, n + j, v));
        }
    }
    let b = SparseMatrix::from_triplets(n + m, n + m, triplets)?;
    Ok(symmetric_normalize(&b))
}
