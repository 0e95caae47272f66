//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrators::{FitOptions, ScalingStructure, WeightMode, MAX_BIN_EXPONENT};
use crate::data::{SplitFractions, SyntheticSpec};
use crate::error::{Error, Result, ResultExt};
use crate::federation::{BinningVariant, FedBinningOptions, FedScalingOptions};
use crate::metrics::{BinPartition, DEFAULT_EVAL_BINS};
use crate::privacy::{ClipSpec, PrivacyBudget, DEFAULT_CLIP_NEG, DEFAULT_CLIP_POS, DEFAULT_CLIP_SCALING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// Logits CSV. Client and split columns, when present, are used as is.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub beta: f64,
    pub clients: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    FedTemp,
    FedVector,
    FedMatrix,
    FedOpTemp,
    FedOpVector,
    FedOpMatrix,
    FedBin,
    FedBbq,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FedTemp => "fed_temp",
            Self::FedVector => "fed_vector",
            Self::FedMatrix => "fed_matrix",
            Self::FedOpTemp => "fed_op_temp",
            Self::FedOpVector => "fed_op_vector",
            Self::FedOpMatrix => "fed_op_matrix",
            Self::FedBin => "fed_bin",
            Self::FedBbq => "fed_bbq",
        }
    }

    pub fn is_binning(self) -> bool {
        matches!(self, Self::FedBin | Self::FedBbq)
    }
}

fn default_bin_exponent() -> u32 {
    7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    #[serde(default)]
    pub weighting: WeightMode,
    #[serde(default = "default_bin_exponent")]
    pub bin_exponent: u32,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self {
            kind,
            weighting: WeightMode::None,
            bin_exponent: default_bin_exponent(),
        }
    }

    pub fn weighted(kind: MethodKind, weighting: WeightMode) -> Self {
        Self {
            weighting,
            ..Self::new(kind)
        }
    }

    /// Label used in reports, e.g. `fed_bbq_all_weight`.
    pub fn name(&self) -> String {
        match self.weighting {
            WeightMode::None => self.kind.as_str().to_string(),
            WeightMode::AllWeight => format!("{}_all_weight", self.kind.as_str()),
            WeightMode::ChangedWeight => format!("{}_changed_weight", self.kind.as_str()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kind.is_binning() && self.weighting != WeightMode::None {
            return Err(Error::invalid(format!(
                "weighting applies to binning methods only, not {}",
                self.kind.as_str()
            )));
        }
        if self.kind.is_binning() && !(1..=MAX_BIN_EXPONENT).contains(&self.bin_exponent) {
            return Err(Error::invalid(format!(
                "bin_exponent must lie in 1..={MAX_BIN_EXPONENT}"
            )));
        }
        Ok(())
    }

    pub fn binning_options(&self) -> Option<FedBinningOptions> {
        let variant = match self.kind {
            MethodKind::FedBin => BinningVariant::Histogram,
            MethodKind::FedBbq => BinningVariant::Bbq,
            _ => return None,
        };
        Some(FedBinningOptions {
            bin_exponent: self.bin_exponent,
            variant,
            weighting: self.weighting,
        })
    }

    pub fn scaling_options(&self, fit: FitOptions) -> Option<FedScalingOptions> {
        let (structure, op) = match self.kind {
            MethodKind::FedTemp => (ScalingStructure::Temperature, false),
            MethodKind::FedVector => (ScalingStructure::Vector, false),
            MethodKind::FedMatrix => (ScalingStructure::Matrix, false),
            MethodKind::FedOpTemp => (ScalingStructure::Temperature, true),
            MethodKind::FedOpVector => (ScalingStructure::Vector, true),
            MethodKind::FedOpMatrix => (ScalingStructure::Matrix, true),
            _ => return None,
        };
        Some(FedScalingOptions {
            structure,
            order_preserving: op,
            fit,
        })
    }
}

fn default_server_lr() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundsConfig {
    pub rounds: usize,
    pub participation: f64,
    #[serde(default = "default_server_lr")]
    pub server_lr: f64,
}

fn default_delta() -> f64 {
    1e-5
}
fn default_clip_scaling() -> f64 {
    DEFAULT_CLIP_SCALING
}
fn default_clip_pos() -> f64 {
    DEFAULT_CLIP_POS
}
fn default_clip_neg() -> f64 {
    DEFAULT_CLIP_NEG
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_clip_scaling")]
    pub clip_scaling: f64,
    #[serde(default = "default_clip_pos")]
    pub clip_pos: f64,
    #[serde(default = "default_clip_neg")]
    pub clip_neg: f64,
}

impl PrivacyConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: default_delta(),
            clip_scaling: DEFAULT_CLIP_SCALING,
            clip_pos: DEFAULT_CLIP_POS,
            clip_neg: DEFAULT_CLIP_NEG,
        }
    }

    pub fn budget(&self) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon, self.delta)
    }

    pub fn clip_for(&self, kind: MethodKind) -> ClipSpec {
        if kind.is_binning() {
            ClipSpec::Binning {
                c_plus: self.clip_pos,
                c_minus: self.clip_neg,
            }
        } else {
            ClipSpec::Scaling { c: self.clip_scaling }
        }
    }
}

fn default_repeats() -> usize {
    5
}
fn default_eval_bins() -> usize {
    DEFAULT_EVAL_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_eval_bins")]
    pub eval_bins: usize,
    #[serde(default)]
    pub per_client_metrics: bool,
    pub data: DataSource,
    pub partition: PartitionConfig,
    #[serde(default)]
    pub splits: SplitFractions,
    pub rounds: RoundsConfig,
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub privacy: Option<PrivacyConfig>,
    #[serde(default)]
    pub fit: FitOptions,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative data path is resolved against the
    /// directory holding the config.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).context(format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text).context(format!("parsing {}", path.display()))?;
        if let DataSource::File { path: data } = &mut cfg.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1").context("repeats"));
        }
        BinPartition::new(self.eval_bins).context("eval_bins")?;
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate().context("data")?;
        }
        crate::data::PartitionSpec {
            beta: self.partition.beta,
            clients: self.partition.clients,
            seed: self.seed,
        }
        .validate()
        .context("partition")?;
        self.splits.validate().context("splits")?;
        if self.rounds.rounds == 0 {
            return Err(Error::invalid("at least one round is required").context("rounds.rounds"));
        }
        if !(self.rounds.participation > 0.0 && self.rounds.participation <= 1.0) {
            return Err(Error::invalid("participation must lie in (0, 1]").context("rounds.participation"));
        }
        if !(self.rounds.server_lr >= 0.0 && self.rounds.server_lr.is_finite()) {
            return Err(Error::invalid("server_lr must be nonnegative").context("rounds.server_lr"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods configured").context("methods"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            m.validate().context(format!("methods[{i}]"))?;
        }
        if let Some(p) = &self.privacy {
            p.budget().context("privacy")?;
            for kind in [MethodKind::FedTemp, MethodKind::FedBin] {
                p.clip_for(kind).validate().context("privacy")?;
            }
        }
        Ok(())
    }
}
