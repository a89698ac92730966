//! Graph siamese network over dense matrices: forward pass, analytic
//! gradients, Adam training with early stopping, metrics and checkpoints.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod metrics;
pub mod model;
pub mod params;
mod train;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint};
pub use metrics::{Metrics, DEFAULT_THRESHOLD};
pub use model::{
    backward, backward_scaled, batch_gradient, bce_loss, branch_forward, gcn_forward, masked_mean_pool,
    normalize_adjacency, normalize_dense, pair_probabilities, prepare_all, siamese_forward, AdjacencyMode,
    BatchGradient, Combine, ModelOptions, PairGradient, PreparedGraph,
};
pub use params::{Architecture, Dense, ModelParams, LAYER_NAMES};
pub use train::{
    evaluate, save_history, train, train_from, write_history, EpochRecord, PreparedDataset, TrainConfig,
    TrainOutcome, HISTORY_HEADER,
};
