//! A small tanh MLP with hand-written reverse-mode gradients for the full
//! adaptation objective, an Adam optimizer and a finite-difference checker.

pub mod checkpoint;
mod gradcheck;
mod mlp;
mod objective;
mod optim;

pub use gradcheck::{
    central_differences, finite_diff_check, relative_error, GradCheckReport, ParamCheck,
    RELATIVE_ERROR_FLOOR,
};
pub use mlp::{
    cross_entropy, cross_entropy_logit_grad, Dense, Forward, Gradients, MlpNetwork, Trace,
    PROB_FLOOR,
};
pub(crate) use mlp::argmax;
pub use objective::{backward, objective, ClusteringTerm, LossBreakdown, LossConfig, StepBatch};
pub use optim::Adam;
