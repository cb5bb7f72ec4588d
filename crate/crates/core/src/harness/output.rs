//! Output files. Every table starts with a `# config_hash=<sha256>` line
//! identifying the resolved experiment.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::experiments::{MonteCarloStats, RatePoint, ReluOutput};
use super::presets::ExperimentSpec;
use super::resource::ResourceReport;
use crate::engine::SimResult;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// SHA-256 of the canonical JSON form of the resolved spec.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn stamped_json<T: Serialize>(hash: &str, body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Stamped {
        config_hash: hash,
        body,
    })
    .expect("serializes");
    s.push('\n');
    s
}

fn stamped_csv(hash: &str, table: &str) -> String {
    format!("# config_hash={hash}\n{table}")
}

/// Rendered files, as `(file name, contents)`.
pub type Files = Vec<(String, String)>;

pub fn trace_files(spec: &ExperimentSpec, res: &SimResult, format: Format) -> Files {
    let hash = config_hash(spec);
    match format {
        Format::Csv => vec![
            ("trace.csv".into(), stamped_csv(&hash, &res.traces_csv())),
            ("spikes.csv".into(), stamped_csv(&hash, &res.spikes_csv())),
            ("summary.json".into(), stamped_summary(&hash, res)),
        ],
        Format::Json => vec![("trace.json".into(), stamped_json(&hash, res))],
    }
}

fn stamped_summary(hash: &str, res: &SimResult) -> String {
    let summary: serde_json::Value = serde_json::from_str(&res.summary_json()).expect("valid json");
    stamped_json(hash, &summary)
}

fn rate_table(points: &[RatePoint], prefix: Option<f64>, out: &mut String) {
    for p in points {
        if let Some(g) = prefix {
            let _ = write!(out, "{g},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.input_hz, p.output_hz, p.spikes, p.warmup_s, p.window_s
        );
    }
}

#[derive(Serialize)]
struct Points<'a> {
    points: &'a [RatePoint],
}

pub fn ff_files(spec: &ExperimentSpec, points: &[RatePoint], format: Format) -> Files {
    let hash = config_hash(spec);
    match format {
        Format::Csv => {
            let mut t = String::from("input_hz,output_hz,spikes,warmup_s,window_s\n");
            rate_table(points, None, &mut t);
            vec![("ff_curve.csv".into(), stamped_csv(&hash, &t))]
        }
        Format::Json => vec![(
            "ff_curve.json".into(),
            stamped_json(&hash, &Points { points }),
        )],
    }
}

pub fn relu_files(spec: &ExperimentSpec, out: &ReluOutput, format: Format) -> Files {
    let hash = config_hash(spec);
    match format {
        Format::Csv => {
            let mut t = String::from("gain_factor,input_hz,output_hz,spikes,warmup_s,window_s\n");
            for c in &out.curves {
                rate_table(&c.points, Some(c.gain_factor), &mut t);
            }
            vec![
                ("relu.csv".into(), stamped_csv(&hash, &t)),
                ("relu_fit.json".into(), stamped_json(&hash, out)),
            ]
        }
        Format::Json => vec![("relu.json".into(), stamped_json(&hash, out))],
    }
}

pub fn montecarlo_files(spec: &ExperimentSpec, stats: &MonteCarloStats, format: Format) -> Files {
    let hash = config_hash(spec);
    let mut files = vec![("montecarlo.json".into(), stamped_json(&hash, stats))];
    if format == Format::Csv {
        let mut t = String::from("instance,residual,onset_hz\n");
        for (i, (r, o)) in stats.residuals.iter().zip(&stats.onsets_hz).enumerate() {
            let _ = writeln!(t, "{i},{r},{o}");
        }
        files.push(("montecarlo.csv".into(), stamped_csv(&hash, &t)));
    }
    files
}

pub fn report_files(spec: &ExperimentSpec, report: &ResourceReport, format: Format) -> Files {
    let hash = config_hash(spec);
    match format {
        Format::Csv => {
            let t = format!(
                "n_neurons,n_blocks,total_area_um2,total_area_mm2,total_capacitance_pf\n{},{},{},{},{}\n",
                report.n_neurons,
                report.n_synapse_blocks_per_neuron,
                report.total_area_um2,
                report.total_area_mm2,
                report.total_capacitance_pf
            );
            vec![("report.csv".into(), stamped_csv(&hash, &t))]
        }
        Format::Json => vec![("report.json".into(), stamped_json(&hash, report))],
    }
}

pub fn write_files(dir: &Path, files: &Files) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body)?;
            Ok(path)
        })
        .collect()
}
