//! Torontonian functions and threshold-detection boson-sampling
//! probabilities computed in wide fixed-point arithmetic, with
//! load-balanced subset enumeration and adaptive precision, plus an
//! instruction scheduler for a dual-pipeline machine model.

pub mod cli;
pub mod fixedpt;
pub mod linalg;
pub mod matrixio;
pub mod precision;
pub mod scheduler;
pub mod subsets;
pub mod torontonian;
