//! Max-pooling MLP text classifier with hand-written backpropagation.

mod checkpoint;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use model::{
    init_model, prepare_ids, DropoutRates, ForwardCache, GradientBuffer, MlpMaxPool, Mode,
    EMBEDDING_INIT_RANGE,
};
pub use optim::{clip_global_norm, optimizer_step, AdamConfig, AdamState};
pub use train::{
    accuracy, eval_rng, train, train_with_observer, write_metrics, EpochMetrics, Regularizer, StepEvent,
    TrainConfig, TrainOutcome,
};
