//! One experiment per value of a single configuration axis.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};

use super::config::{ExperimentConfig, PrivacyConfig};
use super::experiment::{run_experiment, ExperimentRun};
use super::output::format_sig6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Number of federated rounds.
    Rounds,
    /// Dirichlet concentration of the label-skew partition.
    Beta,
    /// Privacy budget; an infinite value disables privacy.
    Epsilon,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rounds => "rounds",
            Self::Beta => "beta",
            Self::Epsilon => "epsilon",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" | "rounds" => Ok(Self::Rounds),
            "beta" => Ok(Self::Beta),
            "epsilon" | "eps" => Ok(Self::Epsilon),
            other => Err(Error::invalid(format!("unknown sweep axis '{other}'"))),
        }
    }
}

/// Copy of `cfg` with `axis` set to `value`.
pub fn apply_axis(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    match axis {
        SweepAxis::Rounds => {
            if !(value >= 1.0 && value.fract() == 0.0 && value.is_finite()) {
                return Err(Error::invalid(format!("round count must be a positive integer, got {value}")));
            }
            out.rounds.rounds = value as usize;
        }
        SweepAxis::Beta => out.partition.beta = value,
        SweepAxis::Epsilon => {
            if value.is_infinite() && value > 0.0 {
                out.privacy = None;
            } else {
                let mut p = cfg.privacy.unwrap_or_else(|| PrivacyConfig::with_epsilon(value));
                p.epsilon = value;
                out.privacy = Some(p);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

pub struct SweepPoint {
    pub value: f64,
    pub run: ExperimentRun,
}

pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&value| {
            let ctx = format!("{} = {value}", axis.as_str());
            let point_cfg = apply_axis(cfg, axis, value).context(ctx.clone())?;
            let run = run_experiment(&point_cfg).context(ctx)?;
            Ok(SweepPoint { value, run })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: [&str; 6] = ["axis_value", "method", "cwece_mean", "cwece_std", "acc_mean", "acc_std"];

/// One row per (value, method), floats at 6 significant digits.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for p in points {
        for s in &p.run.report.summary {
            w.write_record([
                format_sig6(p.value),
                s.method.clone(),
                format_sig6(s.cwece.mean),
                format_sig6(s.cwece.std),
                format_sig6(s.accuracy.mean),
                format_sig6(s.accuracy.std),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
