//! Run configuration, optimizer, checkpoints, the training loop, evaluation,
//! prediction and curve plotting.

mod checkpoint;
mod config;
mod eval;
mod log;
mod optim;
mod plot;
mod predict;
mod trainer;

pub use checkpoint::{save_checkpoint, Checkpoint, RunState, FORMAT, VERSION};
pub use config::{
    lr_schedule, AdamConfig, DataConfig, RunConfig, Schedule, ENV_OUTPUT_DIR, ENV_SEED,
};
pub use eval::{evaluate, predict_maps, EvalReport, ImageResult};
pub use log::{EpochRecord, TrainingLog, ValRecord};
pub use optim::Adam;
pub use plot::{curves, render, Curves};
pub use predict::{predict, write_prediction, Prediction};
pub use trainer::{train, TrainSummary, Trainer};
