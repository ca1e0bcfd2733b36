//! Higher-order moment matching for unsupervised domain adaptation.
//!
//! The crate provides exact, grouped, sampled and kernelized moment
//! discrepancies with analytic gradients, a small tanh classifier trained on
//! the full adaptation objective, synthetic shifted domain pairs and a
//! command-line front end.

pub mod checks;
pub mod cli;
pub mod data;
pub mod discrepancy;
pub mod error;
pub mod moments;
pub mod network;
pub mod rng;
pub mod trainer;
