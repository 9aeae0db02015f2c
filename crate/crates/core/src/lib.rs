//! Deterministic lane-detection toolkit.
//!
//! - [`preprocess`]: exposure analysis, adaptive gamma, CLAHE and guided filtering
//! - [`wavelet`]: Haar DWT, wavelet non-local block and weighted branch fusion
//! - [`lanegeom`]: lane priors and attention-guided row sampling
//! - [`assignloss`]: assignment cost, dynamic top-k assignment and training loss
//! - [`inference`]: score filtering and Line-IoU NMS
//! - [`eval`]: CULane F1/mF1 and TuSimple accuracy
//! - [`tensorio`]: PGM/PPM, tensor and lane-file formats
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignloss;
pub mod cli;
pub mod error;
pub mod eval;
pub mod inference;
pub mod lanegeom;
pub mod preprocess;
pub mod scalar;
pub mod tensorio;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Feature tensor in the on-disk precision.
pub type FeatureMapF32 = tensorio::FeatureMap<f32>;
pub type FeatureMapF64 = tensorio::FeatureMap<f64>;
pub type SubbandsF32 = wavelet::Subbands<f32>;
pub type SubbandsF64 = wavelet::Subbands<f64>;
pub type BlockWeightsF32 = wavelet::BlockWeights<f32>;
pub type BlockWeightsF64 = wavelet::BlockWeights<f64>;
pub type LanePriorF64 = lanegeom::LanePrior<f64>;
pub type GtLaneF64 = lanegeom::GtLane<f64>;
pub type LaneFileF64 = tensorio::LaneFile<f64>;
pub type CostMatrixF64 = assignloss::CostMatrix<f64>;
