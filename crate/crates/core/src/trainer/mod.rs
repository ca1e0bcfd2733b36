//! Training loop for the full objective: mini-batch scheduling,
//! pseudo-labelling, delayed clustering, centre maintenance and evaluation.

mod config;
mod run;
mod step;

pub use config::{LossVariant, TrainConfig};
pub use run::{
    evaluate, run_experiment, run_experiment_with, BatchCycler, Evaluation, ExperimentOutcome,
    TrainMetrics,
};
pub use step::{pseudo_label, step_indices, train_step, StepOutcome, TrainState};
