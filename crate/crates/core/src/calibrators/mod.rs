//! Calibrators mapping logits or probabilities to calibrated distributions.

pub mod bbq;
pub mod binning;
pub mod order_preserving;
pub mod scaling;
pub mod weighting;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::scalar::{softmax, Scalar};

pub use bbq::{bbq_log_score, bbq_predict, BbqLevel, BbqModel};
pub use binning::{
    binning_fit_local, binning_predict, merge_bins, BinningModel, ClassHistogramPair, MAX_BIN_EXPONENT,
};
pub use order_preserving::{
    descending_order, order_preserving_fit_local, order_preserving_nll, order_preserving_predict,
};
pub use scaling::{
    scaler_fit_local, scaler_nll, scaler_predict, FitOptions, LocalFit, ScalerParams, ScalingStructure,
    TEMPERATURE_MAX, TEMPERATURE_MIN,
};
pub use weighting::{alpha_nonprivate, alpha_private, WeightMode, WeightSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Calibrator<T> {
    Binning {
        model: BinningModel<T>,
    },
    Bbq {
        model: BbqModel<T>,
    },
    Weighted {
        inner: Box<Calibrator<T>>,
        weights: WeightSpec<T>,
    },
    Scaling {
        params: ScalerParams<T>,
    },
    OrderPreserving {
        params: ScalerParams<T>,
    },
}

impl<T: Scalar> Calibrator<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Binning { .. } => "binning",
            Self::Bbq { .. } => "bbq",
            Self::Weighted { .. } => "weighted",
            Self::Scaling { .. } => "scaling",
            Self::OrderPreserving { .. } => "order_preserving",
        }
    }

    /// Calibrated distribution for one row of logits.
    pub fn calibrate(&self, logits: &[T]) -> Vec<T> {
        match self {
            Self::Scaling { params } => scaler_predict(params, logits),
            _ => self.calibrate_probs(&softmax(logits)),
        }
    }

    /// Calibrated distribution for a probability vector. Scaling receives
    /// log-probabilities, which differ from the logits by a constant shift.
    pub fn calibrate_probs(&self, probs: &[T]) -> Vec<T> {
        match self {
            Self::Binning { model } => binning_predict(model, probs),
            Self::Bbq { model } => bbq_predict(model, probs),
            Self::Weighted { inner, weights } => weights.apply(probs, inner.scores(probs)),
            Self::Scaling { params } => {
                let logs: Vec<T> = probs.iter().map(|&p| p.max(T::min_positive_value()).ln()).collect();
                scaler_predict(params, &logs)
            }
            Self::OrderPreserving { params } => order_preserving_predict(params, probs),
        }
    }

    /// Per-class scores before cross-class normalization. Binning-type
    /// calibrators expose their one-vs-all rates; others their output.
    pub fn scores(&self, probs: &[T]) -> Vec<T> {
        match self {
            Self::Binning { model } => model.class_scores(probs),
            Self::Bbq { model } => model.class_scores(probs),
            _ => self.calibrate_probs(probs),
        }
    }

    /// Calibrates every row of logits into a prediction set.
    pub fn calibrate_all(&self, logits: &[Vec<T>], labels: &[usize]) -> Result<PredictionSet<T>> {
        let c = logits.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        let probs = logits.iter().flat_map(|z| self.calibrate(z)).collect();
        PredictionSet::from_flat(c, probs, labels.to_vec())
    }
}

pub const CALIBRATOR_FORMAT: &str = "fedcal-calibrator";
pub const CALIBRATOR_VERSION: u32 = 1;

/// Versioned on-disk form of a calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratorDocument<T> {
    pub format: String,
    pub version: u32,
    pub calibrator: Calibrator<T>,
}

impl<T: Scalar> CalibratorDocument<T> {
    pub fn new(calibrator: Calibrator<T>) -> Self {
        Self {
            format: CALIBRATOR_FORMAT.to_string(),
            version: CALIBRATOR_VERSION,
            calibrator,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        if doc.format != CALIBRATOR_FORMAT {
            return Err(Error::invalid(format!("unknown document format '{}'", doc.format)));
        }
        if doc.version != CALIBRATOR_VERSION {
            return Err(Error::invalid(format!("unsupported calibrator version {}", doc.version)));
        }
        Ok(doc)
    }
}
