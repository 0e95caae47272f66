//! Report files: JSON report, JSON-lines round log, CSV summary,
//! calibrator documents and a metadata sidecar.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{Result, ResultExt};

use super::experiment::{ExperimentReport, ExperimentRun, RoundRecord};

/// `x` rounded to 6 significant digits, printed in shortest form.
pub fn format_sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

pub const SUMMARY_CSV_HEADER: [&str; 10] = [
    "method",
    "cwece_mean",
    "cwece_std",
    "ece_mean",
    "ece_std",
    "acc_mean",
    "acc_std",
    "base_cwece_mean",
    "base_acc_mean",
    "accuracy_drop_flags",
];

pub fn write_summary_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_CSV_HEADER)?;
    for s in &report.summary {
        w.write_record([
            s.method.clone(),
            format_sig6(s.cwece.mean),
            format_sig6(s.cwece.std),
            format_sig6(s.ece.mean),
            format_sig6(s.ece.std),
            format_sig6(s.accuracy.mean),
            format_sig6(s.accuracy.std),
            format_sig6(s.base_cwece.mean),
            format_sig6(s.base_accuracy.mean),
            s.accuracy_drop_flags.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_rounds_jsonl<W: Write>(rounds: &[RoundRecord], mut out: W) -> Result<()> {
    for r in rounds {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    tool: &'a str,
    version: &'a str,
    started_unix: f64,
    finished_unix: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes `report.json`, `rounds.jsonl`, `summary.csv` and one
/// `calibrator-<method>.json` per method into `dir`, plus `run_meta.json`
/// with wall-clock timestamps. Everything except the sidecar is a pure
/// function of the configuration.
pub fn emit_run(run: &ExperimentRun, dir: impl AsRef<Path>, started_unix: Option<f64>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).context(format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, bytes).context(format!("writing {}", path.display()))?;
        written.push(path);
        Ok(())
    };
    put("report.json", report_to_json(&run.report)?.into_bytes())?;
    let mut rounds = Vec::new();
    write_rounds_jsonl(&run.rounds, &mut rounds)?;
    put(&run.report.rounds_file, rounds)?;
    let mut summary = Vec::new();
    write_summary_csv(&run.report, &mut summary)?;
    put("summary.csv", summary)?;
    for (method, doc) in &run.calibrators {
        put(&format!("calibrator-{method}.json"), (doc.to_json()? + "\n").into_bytes())?;
    }
    let now = unix_now();
    let meta = RunMeta {
        tool: "fedcal",
        version: env!("CARGO_PKG_VERSION"),
        started_unix: started_unix.unwrap_or(now),
        finished_unix: now,
    };
    put("run_meta.json", serde_json::to_vec_pretty(&meta)?)?;
    Ok(written)
}
