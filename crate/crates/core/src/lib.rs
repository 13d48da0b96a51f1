//! Prediction with missing predictors.
//!
//! The crate separates two prediction targets: the missingness-unconditional
//! law `Pr(Y | X_o)` and the missingness-conditional law `Pr(Y | X_o, M_X)`.
//! It provides executable checks for the mechanism assumptions that relate
//! them, training procedures for incomplete predictors, Bayes-optimal
//! reference forecasters for a Gaussian simulation model, and the evaluation
//! pipelines built on top of them.

pub mod datagen;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod exec;
pub mod io;
pub mod mechanisms;
pub mod oracle;
pub mod procedures;
pub mod quadrature;
pub mod runner;
pub mod seed;

pub use domain::{
    enumerate_patterns, partition, Forecaster, MaskedDataset, MaskedMatrix, Pattern,
    PredictiveDistribution, Query, Target,
};
pub use error::{Error, Result};
