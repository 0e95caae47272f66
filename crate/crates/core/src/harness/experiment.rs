//! Seeded multi-repeat experiments.

use serde::{Deserialize, Serialize};

use crate::calibrators::{Calibrator, CalibratorDocument, ScalerParams};
use crate::data::{
    common_class_count, dirichlet_label_skew_partition, ingest_logits_file, pooled_split, split_local,
    synthetic_miscalibrated_generate, ClientDataset, PartitionSpec, Split,
};
use crate::error::{Error, Result, ResultExt};
use crate::federation::{run_fed_binning, run_fed_scaling, EvalSet, RoundConfig, RoundReport};
use crate::metrics::{BinPartition, MetricSummary, PredictionSet};
use crate::privacy::PrivacyPlan;

use super::config::{DataSource, ExperimentConfig, MethodSpec};

/// Absolute accuracy loss above which a calibrator is flagged.
pub const ACCURACY_DROP_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMetrics {
    pub client_id: usize,
    pub n_test: usize,
    pub base: MetricSummary,
    pub calibrated: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub metrics: MetricSummary,
    /// `base accuracy - calibrated accuracy`.
    pub accuracy_drop: f64,
    pub accuracy_drop_flag: bool,
    /// Final temperature for temperature-scaling methods.
    pub temperature: Option<f64>,
    pub privacy: Option<PrivacyPlan>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_client: Option<Vec<ClientMetrics>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    pub n_test: usize,
    pub base: MetricSummary,
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub cwece: MeanStd,
    pub ece: MeanStd,
    pub accuracy: MeanStd,
    pub base_cwece: MeanStd,
    pub base_accuracy: MeanStd,
    /// Repeats in which the accuracy-drop flag fired.
    pub accuracy_drop_flags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatResult>,
    pub summary: Vec<MethodSummary>,
    /// File name of the per-round JSON-lines log written next to the report.
    pub rounds_file: String,
}

impl ExperimentReport {
    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    /// Recomputes the summary from the per-repeat values.
    pub fn summarize(config: &ExperimentConfig, repeats: &[RepeatResult]) -> Vec<MethodSummary> {
        config
            .methods
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let pick = |f: &dyn Fn(&RepeatResult) -> f64| -> MeanStd {
                    MeanStd::of(&repeats.iter().map(f).collect::<Vec<_>>())
                };
                MethodSummary {
                    method: m.name(),
                    cwece: pick(&|r| r.methods[i].metrics.cwece),
                    ece: pick(&|r| r.methods[i].metrics.ece),
                    accuracy: pick(&|r| r.methods[i].metrics.accuracy),
                    base_cwece: pick(&|r| r.base.cwece),
                    base_accuracy: pick(&|r| r.base.accuracy),
                    accuracy_drop_flags: repeats.iter().filter(|r| r.methods[i].accuracy_drop_flag).count(),
                }
            })
            .collect()
    }
}

/// One per-round log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub repeat: usize,
    pub method: String,
    #[serde(flatten)]
    pub report: RoundReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub rounds: Vec<RoundRecord>,
    /// Calibrators fitted in the first repeat, by method name.
    pub calibrators: Vec<(String, CalibratorDocument<f64>)>,
}

/// Client datasets for one repeat: generated or loaded, partitioned and
/// split as configured.
pub fn prepare_clients(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ClientDataset<f64>>> {
    let partition = PartitionSpec {
        beta: cfg.partition.beta,
        clients: cfg.partition.clients,
        seed,
    };
    let (clients, has_splits) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let spec = crate::data::SyntheticSpec {
                seed,
                ..spec.clone()
            };
            let records = synthetic_miscalibrated_generate::<f64>(&spec).context("data")?;
            (dirichlet_label_skew_partition(&records, &partition).context("partition")?, false)
        }
        DataSource::File { path } => {
            let table = ingest_logits_file::<f64>(path).context(format!("data file {}", path.display()))?;
            let clients = if table.has_client_ids {
                table.clients
            } else {
                dirichlet_label_skew_partition(&table.records(), &partition).context("partition")?
            };
            (clients, table.has_splits)
        }
    };
    if has_splits {
        return Ok(clients);
    }
    clients
        .iter()
        .map(|c| split_local(c, &cfg.splits, seed))
        .collect::<Result<_>>()
        .context("splits")
}

fn metrics_of(logits: &[Vec<f64>], labels: &[usize], cal: Option<&Calibrator<f64>>, bins: usize) -> Result<MetricSummary> {
    let preds = match cal {
        Some(c) => c.calibrate_all(logits, labels)?,
        None => PredictionSet::from_logits(logits, labels.to_vec())?,
    };
    MetricSummary::evaluate(&preds, BinPartition::new(bins)?)
}

fn per_client_metrics(
    clients: &[ClientDataset<f64>],
    cal: &Calibrator<f64>,
    bins: usize,
) -> Result<Vec<ClientMetrics>> {
    let mut out = Vec::new();
    for c in clients {
        let (logits, labels) = c.split_arrays(Split::Test);
        if logits.is_empty() {
            continue;
        }
        out.push(ClientMetrics {
            client_id: c.client_id,
            n_test: logits.len(),
            base: metrics_of(&logits, &labels, None, bins)?,
            calibrated: metrics_of(&logits, &labels, Some(cal), bins)?,
        });
    }
    Ok(out)
}

/// Fitted calibrator and round log of one method on one repeat.
pub struct MethodRun {
    pub calibrator: Calibrator<f64>,
    pub rounds: Vec<RoundReport>,
    pub privacy: Option<PrivacyPlan>,
}

pub fn run_method(
    cfg: &ExperimentConfig,
    method: &MethodSpec,
    clients: &[ClientDataset<f64>],
    seed: u64,
) -> Result<MethodRun> {
    let n_classes = common_class_count(clients.iter().flat_map(|c| c.records.iter()))?.ok_or(Error::EmptyInput)?;
    let privacy = match &cfg.privacy {
        Some(p) => Some(PrivacyPlan::new(p.budget()?, p.clip_for(method.kind), cfg.rounds.rounds, n_classes)?),
        None => None,
    };
    let round_cfg = RoundConfig {
        rounds: cfg.rounds.rounds,
        participation: cfg.rounds.participation,
        seed,
        server_lr: cfg.rounds.server_lr,
        eval_bins: cfg.eval_bins,
        privacy: privacy.clone(),
    };
    if let Some(opts) = method.binning_options() {
        let out = run_fed_binning(clients, &opts, &round_cfg)?;
        return Ok(MethodRun {
            calibrator: out.calibrator,
            rounds: out.reports,
            privacy,
        });
    }
    let opts = method
        .scaling_options(cfg.fit)
        .ok_or_else(|| Error::invalid(format!("unsupported method {}", method.name())))?;
    let out = run_fed_scaling(clients, &opts, &round_cfg)?;
    Ok(MethodRun {
        calibrator: out.calibrator,
        rounds: out.reports,
        privacy,
    })
}

fn temperature_of(cal: &Calibrator<f64>) -> Option<f64> {
    match cal {
        Calibrator::Scaling {
            params: ScalerParams::Temperature { temperature },
        }
        | Calibrator::OrderPreserving {
            params: ScalerParams::Temperature { temperature },
        } => Some(*temperature),
        _ => None,
    }
}

/// Runs every configured method on every repeat. Repeat `r` uses seed
/// `cfg.seed + r` for data generation, partitioning, splitting, client
/// sampling and noise.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    cfg.validate()?;
    let mut repeats = Vec::with_capacity(cfg.repeats);
    let mut rounds = Vec::new();
    let mut calibrators = Vec::new();
    for r in 0..cfg.repeats {
        let seed = cfg.seed.wrapping_add(r as u64);
        let clients = prepare_clients(cfg, seed).context(format!("repeat {r}"))?;
        let eval = EvalSet::from_clients(&clients, Split::Test);
        if eval.logits.is_empty() {
            return Err(Error::invalid("no test samples").context(format!("repeat {r}")));
        }
        let base = metrics_of(&eval.logits, &eval.labels, None, cfg.eval_bins)?;
        let mut methods = Vec::with_capacity(cfg.methods.len());
        for (i, method) in cfg.methods.iter().enumerate() {
            let name = method.name();
            let ctx = format!("methods[{i}] ({name}), repeat {r}");
            let run = run_method(cfg, method, &clients, seed).context(ctx.clone())?;
            let metrics = metrics_of(&eval.logits, &eval.labels, Some(&run.calibrator), cfg.eval_bins).context(ctx)?;
            let drop = base.accuracy - metrics.accuracy;
            let per_client = if cfg.per_client_metrics {
                Some(per_client_metrics(&clients, &run.calibrator, cfg.eval_bins)?)
            } else {
                None
            };
            methods.push(MethodResult {
                method: name.clone(),
                metrics,
                accuracy_drop: drop,
                accuracy_drop_flag: drop > ACCURACY_DROP_THRESHOLD,
                temperature: temperature_of(&run.calibrator),
                privacy: run.privacy,
                per_client,
            });
            rounds.extend(run.rounds.into_iter().map(|report| RoundRecord {
                repeat: r,
                method: name.clone(),
                report,
            }));
            if r == 0 {
                calibrators.push((name, CalibratorDocument::new(run.calibrator)));
            }
        }
        repeats.push(RepeatResult {
            repeat: r,
            seed,
            n_test: eval.labels.len(),
            base,
            methods,
        });
    }
    let summary = ExperimentReport::summarize(cfg, &repeats);
    Ok(ExperimentRun {
        report: ExperimentReport {
            config: cfg.clone(),
            repeats,
            summary,
            rounds_file: "rounds.jsonl".to_string(),
        },
        rounds,
        calibrators,
    })
}

/// Pooled calibration split of the clients; handy for central baselines.
pub fn pooled_calibration(clients: &[ClientDataset<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    pooled_split(clients, Split::Calibration)
}
