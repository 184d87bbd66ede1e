//! Graph-convolutional collaborative filtering over implicit feedback.
//!
//! The model propagates user and item embeddings over two normalized graph
//! matrices built from the interaction data: the bipartite adjacency, and a
//! block-diagonal co-interaction matrix that weights neighbors by how many
//! interactions they share. Training minimizes a pairwise ranking loss with
//! hand-derived exact gradients and Adam; evaluation ranks all items per
//! user against held-out test interactions.
//!
//! Pipeline: [`data`] loads and splits interaction files, [`graph`] builds
//! the propagation inputs, [`model`] runs the forward pass, [`training`]
//! fits parameters, [`eval`] scores the result, and [`checkpoint`] persists
//! it. Everything is deterministic for a fixed seed.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod sparse;
pub mod training;

pub use checkpoint::{
    export_embeddings, import_embeddings, load_checkpoint, save_checkpoint, Checkpoint,
    EmbeddingExport,
};
pub use data::{
    generate_block_dataset, k_core_filter, load_interactions, train_test_split, DatasetStats,
    InputFormat, InteractionDataset,
};
pub use error::{Error, Result};
pub use eval::{evaluate_model, mae_rmse, ndcg_at_k, precision_recall_f1, topk_ranking, RankingMetrics};
pub use graph::{
    build_delta, build_gamma, build_interaction_matrix, co_interaction, normalize_l1, GraphInputs,
    Side,
};
pub use model::{
    forward, init_params, leaky_relu, leaky_relu_mask, predict_scores, ForwardTrace, LayerParams,
    ModelParams, PropagationVariant,
};
pub use sparse::{symmetric_normalize, SparseMatrix};
pub use training::{
    adam_step, bpr_loss, compute_gradients, sample_bpr_batch, train, train_with, AdamState,
    BprTriple, EpochStats, Gradients, LayerGrads, TrainConfig,
};
