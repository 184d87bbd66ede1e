//! Independent reference implementations used to check the main crate.
//!
//! Everything here recomputes results from first principles with dense
//! scalar loops: no CSR storage, no shared kernels, no reuse of the code
//! paths under test. Oracles take raw interaction pairs or plain arrays, so
//! agreement with the optimized implementation is meaningful evidence.

pub mod dense;
pub mod gradcheck;
pub mod instances;
pub mod propagation;
pub mod ranking;

pub use dense::{dense_co_interaction, dense_delta, dense_gamma, dense_l1_normalize};
pub use gradcheck::{assign_params, fd_gradients, flatten_grads, flatten_params, loss_at, min_abs_preactivation};
pub use instances::{random_pairs, random_tiny_instance, TinyInstance};
pub use propagation::node_wise_forward;
pub use ranking::{brute_force_evaluate, BruteMetrics};
