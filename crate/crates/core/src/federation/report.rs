//! Round configuration and per-round reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibrators::Calibrator;
use crate::data::{pooled_split, ClientDataset, Split};
use crate::error::{Error, Result};
use crate::metrics::{BinPartition, MetricSummary};
use crate::privacy::PrivacyPlan;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub rounds: usize,
    pub participation: f64,
    pub seed: u64,
    pub server_lr: f64,
    pub eval_bins: usize,
    pub privacy: Option<PrivacyPlan>,
}

impl RoundConfig {
    pub fn new(rounds: usize, participation: f64, seed: u64) -> Self {
        Self {
            rounds,
            participation,
            seed,
            server_lr: 1.0,
            eval_bins: crate::metrics::DEFAULT_EVAL_BINS,
            privacy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("at least one round is required"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::invalid(format!(
                "participation must lie in (0, 1], got {}",
                self.participation
            )));
        }
        if !(self.server_lr >= 0.0 && self.server_lr.is_finite()) {
            return Err(Error::invalid("server learning rate must be nonnegative"));
        }
        if let Some(plan) = &self.privacy {
            if plan.rounds != self.rounds {
                return Err(Error::InconsistentPlan(format!(
                    "plan covers {} rounds, run has {}",
                    plan.rounds, self.rounds
                )));
            }
        }
        BinPartition::new(self.eval_bins)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl AlphaSummary {
    pub fn of<T: Scalar>(alphas: &[T]) -> Option<Self> {
        if alphas.is_empty() {
            return None;
        }
        let vals: Vec<f64> = alphas.iter().map(|a| a.as_f64()).collect();
        Some(Self {
            min: vals.iter().copied().fold(f64::INFINITY, f64::min),
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based round index.
    pub round: usize,
    pub participants: Vec<usize>,
    pub cwece: f64,
    pub ece: f64,
    pub accuracy: f64,
    pub alpha_summary: Option<AlphaSummary>,
    /// Absolute noise standard deviation, `None` without privacy.
    pub noise_sigma: Option<f64>,
    /// Largest L2 norm among the contributions aggregated this round.
    pub max_contribution_norm: f64,
}

pub fn write_round_reports<W: Write>(reports: &[RoundReport], mut out: W) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Pooled test split of all clients, evaluated after every round.
#[derive(Debug, Clone)]
pub struct EvalSet<T> {
    pub logits: Vec<Vec<T>>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> EvalSet<T> {
    pub fn from_clients(clients: &[ClientDataset<T>], split: Split) -> Self {
        let (logits, labels) = pooled_split(clients, split);
        Self { logits, labels }
    }

    /// Metrics of `calibrator` on the set; NaN when the set is empty.
    pub fn evaluate(&self, calibrator: &Calibrator<T>, bins: usize) -> Result<MetricSummary> {
        if self.logits.is_empty() {
            return Ok(MetricSummary {
                cwece: f64::NAN,
                ece: f64::NAN,
                accuracy: f64::NAN,
            });
        }
        let preds = calibrator.calibrate_all(&self.logits, &self.labels)?;
        MetricSummary::evaluate(&preds, BinPartition::new(bins)?)
    }
}
