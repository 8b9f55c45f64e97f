//! Distributed, rate-adaptive feature quantization for a pretrained linear
//! regression model.
//!
//! Each sensor observes a disjoint slice of the regressor and sends the index
//! of a codeword to a fusion center, which adds up the codewords' projected
//! values to approximate the model response. Sensors cluster the projection
//! of their calibration data onto their slice of the model coefficients
//! ([`scheme::train_distributed`]); when link rates drop, both ends shrink
//! the stored full-rate codebooks deterministically ([`adaptive::adapt`]).

pub mod adaptive;
pub mod cli;
pub mod clustering;
pub mod codebook;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod io;
pub mod model;
pub mod scheme;
pub mod simnet;

pub use codebook::{quantize, DistributedQuantizer, SensorCodebook, MAX_BITS};
pub use error::{Error, Result};
pub use eval::{assumption1_diagnostic, evaluate_mse, MseReport};
pub use model::{project, CalibrationSet, Dataset, FeaturePartition, LinearModel};
