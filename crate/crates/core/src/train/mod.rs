//! Loss, optimizer, initialization and the epoch loop.

mod adam;
mod config;
mod fit;
mod init;
mod loss;

pub use adam::{adam_step, AdamState};
pub use config::TrainConfig;
pub use fit::{evaluate, fit, fit_with, predict, stack, train_epoch, EpochLog, EpochOutcome, FitOutcome, EVAL_BATCH};
pub use init::{glorot_limit, init_params};
pub use loss::{categorical_cross_entropy, sample_loss, PROB_FLOOR};
