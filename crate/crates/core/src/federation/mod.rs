//! Multi-round federated calibration with client sampling, simulated secure
//! aggregation and optional user-level differential privacy.

pub mod binning;
pub mod report;
pub mod sampling;
pub mod scaling;
pub mod secagg;

pub use binning::{build_binning_calibrator, run_fed_binning, AggregateState, BinningVariant, FedBinningOptions, FedBinningOutcome};
pub use report::{write_round_reports, AlphaSummary, EvalSet, RoundConfig, RoundReport};
pub use sampling::sample_participants;
pub use scaling::{fedavg_update, run_fed_scaling, FedScalingOptions, FedScalingOutcome};
pub use secagg::{secure_agg_sum, SecureAggregator};
