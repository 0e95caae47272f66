//! User-level differential privacy: clipping, the Gaussian mechanism and
//! zCDP accounting for multi-round federated calibration.

pub mod accountant;
pub mod mechanism;

pub use accountant::{
    delta_from_rho_epsilon, noise_multiplier, noise_sigma, rho_from_epsilon_delta, total_rho, ClipSpec,
    PrivacyBudget, PrivacyPlan, ZcdpBudget, DEFAULT_CLIP_NEG, DEFAULT_CLIP_POS, DEFAULT_CLIP_SCALING,
};
pub use mechanism::{clip_histogram_pair, clip_l2, gaussian_mechanism};
