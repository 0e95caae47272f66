use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fedcal::calibrators::CalibratorDocument;
use fedcal::data::{
    dirichlet_label_skew_partition, export_logits_file, export_records, ingest_logits_file, split_local,
    synthetic_miscalibrated_generate, PartitionSpec, Split, SplitFractions, SyntheticSpec,
};
use fedcal::harness::{emit_run, run_experiment, sweep, write_sweep_csv, ExperimentConfig, SweepAxis};
use fedcal::metrics::{reliability_table, write_reliability_csv, BinPartition, MetricSummary, PredictionSet};
use fedcal::privacy::{total_rho, ClipSpec, PrivacyBudget, PrivacyPlan};

#[derive(Parser)]
#[command(name = "fedcal", version, about = "Federated calibration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate miscalibrated synthetic logits.
    Generate(GenerateArgs),
    /// Assign records to clients with Dirichlet label skew and split them.
    Partition(PartitionArgs),
    /// Run one experiment from a config file.
    Calibrate(CalibrateArgs),
    /// Run one experiment per value of a config axis.
    Sweep(SweepArgs),
    /// Print the noise calibration for a privacy budget.
    DpPlan(DpPlanArgs),
    /// Compute calibration metrics for a logits or probabilities file.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Config whose `[data]` section supplies the generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    true_temp: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (`.gz` for gzip).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    clients: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train, calibration and test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    splits: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.json, rounds.jsonl and summary.csv.
    #[arg(long)]
    out: PathBuf,
    /// Override the number of repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Axis to vary: T (rounds), beta or epsilon.
    #[arg(long)]
    axis: String,
    /// Comma-separated values; `inf` disables privacy on the epsilon axis.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanMode {
    Scaling,
    Binning,
}

#[derive(Args)]
struct DpPlanArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    #[arg(long)]
    rounds: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, value_enum, default_value_t = PlanMode::Scaling)]
    mode: PlanMode,
    /// Clipping norm for scaling updates.
    #[arg(long, default_value_t = fedcal::privacy::DEFAULT_CLIP_SCALING)]
    clip: f64,
    #[arg(long, default_value_t = fedcal::privacy::DEFAULT_CLIP_POS)]
    clip_pos: f64,
    #[arg(long, default_value_t = fedcal::privacy::DEFAULT_CLIP_NEG)]
    clip_neg: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// CSV with `label,logit_0,...` columns, optionally preceded by
    /// `client_id` and `split`.
    #[arg(long)]
    input: PathBuf,
    /// Treat the value columns as probabilities rather than logits.
    #[arg(long)]
    probs: bool,
    /// Only evaluate records of this split.
    #[arg(long)]
    split: Option<String>,
    /// Calibrator document to apply before evaluating.
    #[arg(long)]
    calibrator: Option<PathBuf>,
    #[arg(long, default_value_t = fedcal::metrics::DEFAULT_EVAL_BINS)]
    bins: usize,
    /// Write the per-class reliability table to this CSV.
    #[arg(long)]
    reliability: Option<PathBuf>,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => match ExperimentConfig::from_file(path)?.data {
            fedcal::harness::DataSource::Synthetic(spec) => spec,
            fedcal::harness::DataSource::File { .. } => bail!("config data source is a file, not synthetic"),
        },
        None => SyntheticSpec::default(),
    };
    if let Some(v) = args.classes {
        spec.n_classes = v;
    }
    if let Some(v) = args.samples {
        spec.n_samples = v;
    }
    if let Some(v) = args.true_temp {
        spec.true_temp = v;
    }
    if let Some(v) = args.separation {
        spec.separation = v;
    }
    if let Some(v) = args.noise_std {
        spec.noise_std = v;
    }
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    let records = synthetic_miscalibrated_generate::<f64>(&spec)?;
    export_records(&records, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    log::info!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

fn partition(args: PartitionArgs) -> Result<()> {
    let table = ingest_logits_file::<f64>(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let spec = PartitionSpec {
        beta: args.beta,
        clients: args.clients,
        seed: args.seed,
    };
    let fractions = SplitFractions {
        train: args.splits[0],
        calibration: args.splits[1],
        test: args.splits[2],
    };
    let clients = dirichlet_label_skew_partition(&table.records(), &spec)?
        .iter()
        .map(|c| split_local(c, &fractions, args.seed))
        .collect::<fedcal::Result<Vec<_>>>()?;
    export_logits_file(&clients, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let empty = clients.iter().filter(|c| c.is_empty()).count();
    log::info!("{} clients written, {empty} empty", clients.len());
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let started = unix_now();
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let run = run_experiment(&cfg)?;
    emit_run(&run, &args.out, Some(started))?;
    let mut summary = Vec::new();
    fedcal::harness::write_summary_csv(&run.report, &mut summary)?;
    io::stdout().write_all(&summary)?;
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let started = unix_now();
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    let axis: SweepAxis = args.axis.parse()?;
    let points = sweep(&cfg, axis, &args.values)?;
    fs::create_dir_all(&args.out)?;
    for p in &points {
        let dir = args.out.join(format!("{}={}", axis.as_str(), p.value));
        emit_run(&p.run, dir, Some(started))?;
    }
    let path = args.out.join("sweep.csv");
    let mut buf = Vec::new();
    write_sweep_csv(&points, &mut buf)?;
    fs::write(&path, &buf).with_context(|| format!("writing {}", path.display()))?;
    io::stdout().write_all(&buf)?;
    Ok(())
}

fn dp_plan(args: DpPlanArgs) -> Result<()> {
    let clip = match args.mode {
        PlanMode::Scaling => ClipSpec::Scaling { c: args.clip },
        PlanMode::Binning => ClipSpec::Binning {
            c_plus: args.clip_pos,
            c_minus: args.clip_neg,
        },
    };
    let plan = PrivacyPlan::new(PrivacyBudget::new(args.epsilon, args.delta)?, clip, args.rounds, args.classes)?;
    total_rho(&plan)?;
    println!("{}", serde_json::to_string_pretty(&plan)?);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let table = ingest_logits_file::<f64>(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let wanted = match &args.split {
        Some(s) => Some(Split::parse(s).with_context(|| format!("unknown split '{s}'"))?),
        None => None,
    };
    let records: Vec<_> = table
        .records()
        .into_iter()
        .filter(|r| wanted.is_none_or(|w| r.split == w))
        .collect();
    if records.is_empty() {
        bail!("no records to evaluate");
    }
    let c = records[0].logits.len();
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let calibrator = match &args.calibrator {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(CalibratorDocument::<f64>::from_json(&text)?.calibrator)
        }
        None => None,
    };
    let rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| match (&calibrator, args.probs) {
            (Some(cal), true) => cal.calibrate_probs(&r.logits),
            (Some(cal), false) => cal.calibrate(&r.logits),
            (None, true) => r.logits.clone(),
            (None, false) => fedcal::scalar::softmax(&r.logits),
        })
        .collect();
    let preds = PredictionSet::new(c, rows, labels)?;
    let bins = BinPartition::new(args.bins)?;
    if let Some(path) = &args.reliability {
        let table = reliability_table(&preds, bins)?;
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_reliability_csv(&table, file)?;
    }
    let summary = MetricSummary::evaluate(&preds, bins)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Partition(a) => partition(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::DpPlan(a) => dp_plan(a),
        Command::Eval(a) => eval(a),
    }
}
