//! Dense-network trainer: model, optimizer, metric recording.

mod curve;
mod model;
mod optim;
mod train;

pub use curve::{MetricCurve, Recording};
pub use model::{
    init_model, row_losses_and_predictions, softmax_cross_entropy, Dense, ForwardCache, MlpGrad, MlpModel, Network,
    ParamTensors,
};
pub use optim::{optimizer_step, AdamState};
pub use train::{evaluate, train, train_model, TrainConfig, TrainError};
