//! Federated post-hoc calibration of multiclass classifiers.
//!
//! Clients hold logits from a shared base model. The crate fits calibrators
//! across them without pooling data: histogram binning and BBQ from summed
//! per-class histograms, and temperature, vector, matrix or order-preserving
//! scaling by parameter averaging. Optional user-level differential privacy
//! clips each client's contribution and noises the aggregate under a zCDP
//! budget.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

// `!(x > 0)` style checks are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrators;
pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod privacy;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PredictionSet64 = metrics::PredictionSet<f64>;
pub type PredictionSet32 = metrics::PredictionSet<f32>;
pub type LogitRecord64 = data::LogitRecord<f64>;
pub type LogitRecord32 = data::LogitRecord<f32>;
pub type ClientDataset64 = data::ClientDataset<f64>;
pub type ClientDataset32 = data::ClientDataset<f32>;
pub type BinningModel64 = calibrators::BinningModel<f64>;
pub type BinningModel32 = calibrators::BinningModel<f32>;
pub type BbqModel64 = calibrators::BbqModel<f64>;
pub type BbqModel32 = calibrators::BbqModel<f32>;
pub type ScalerParams64 = calibrators::ScalerParams<f64>;
pub type ScalerParams32 = calibrators::ScalerParams<f32>;
pub type WeightSpec64 = calibrators::WeightSpec<f64>;
pub type WeightSpec32 = calibrators::WeightSpec<f32>;
pub type Calibrator64 = calibrators::Calibrator<f64>;
pub type Calibrator32 = calibrators::Calibrator<f32>;
pub type CalibratorDocument64 = calibrators::CalibratorDocument<f64>;
pub type CalibratorDocument32 = calibrators::CalibratorDocument<f32>;
