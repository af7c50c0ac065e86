//! Noise-induced stabilization and destabilization of equilibria of scalar
//! maps `x_{n+1} = x_n f(x_n)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod control;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod figures;
pub mod maps;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod verify;

pub use control::{ControlScheme, NoiseWindow, SigmaProfile, ThresholdReport};
pub use distributions::{NoiseFamily, NoiseSpec, StabilizingChoice};
pub use engine::{Classifier, EnsembleSummary, Experiment, Status, Trajectory, Trap};
pub use error::{Error, Result};
pub use maps::MapSpec;
pub use config::ExperimentConfig;
