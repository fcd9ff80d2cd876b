//! Resolved run descriptions and their execution.
//!
//! Every subcommand is normalized into a `RunSpec` with all defaults
//! materialized before anything runs. That resolved form is what the
//! manifest records, so replaying a manifest reproduces the run exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use driftkl::baselines::BaselineConfig;
use driftkl::detector::{detect_online, DetectorConfig, DriftReport};
use driftkl::error::Error;
use driftkl::evaluation::{alpha_sweep, match_events, MatchingResult, SweepRow};
use driftkl::generator::{generate, GeneratorConfig};
use driftkl::report::{write_distances_csv, write_series_csv, write_sweep_csv};
use driftkl::stream::{write_stream, StreamMeta, StreamReader};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunSpec {
    Generate(GenerateSpec),
    Detect(DetectSpec),
    Evaluate(EvaluateSpec),
    Sweep(SweepSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub config: GeneratorConfig,
    pub out: PathBuf,
}

/// Metadata supplied on the command line for headerless CSV input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetaOverride {
    pub features: usize,
    pub classes: u32,
    pub chunk_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectSpec {
    pub input: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<usize>>,
    pub detector: DetectorConfig,
    pub report: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distances: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateSpec {
    pub report: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<usize>>,
    pub tolerance: usize,
    pub baselines: Vec<BaselineConfig>,
    pub out: PathBuf,
    pub json: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub input: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<usize>>,
    pub detector: DetectorConfig,
    pub alphas: Vec<f64>,
    pub tolerance: usize,
    pub out: PathBuf,
    pub json: PathBuf,
}

/// What a run touched, for the manifest, plus a human summary.
pub struct Execution {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

fn map_error(e: Error) -> CliError {
    match e {
        Error::InvalidParameter { .. } => CliError::usage(e.to_string()),
        Error::MalformedRecord { .. }
        | Error::Meta(_)
        | Error::Io(_)
        | Error::Empty(_)
        | Error::NonFinite(_)
        | Error::InvalidChunk(_) => CliError::data(e.to_string()),
        other => CliError::internal(other.to_string()),
    }
}

pub fn execute(spec: &RunSpec) -> Result<Execution, CliError> {
    match spec {
        RunSpec::Generate(g) => run_generate(g),
        RunSpec::Detect(d) => run_detect(d),
        RunSpec::Evaluate(e) => run_evaluate(e),
        RunSpec::Sweep(s) => run_sweep(s),
    }
}

fn run_generate(spec: &GenerateSpec) -> Result<Execution, CliError> {
    let (meta, stream) = generate(spec.config.clone()).map_err(map_error)?;
    write_stream(&spec.out, &meta, stream).map_err(map_error)?;
    Ok(Execution {
        inputs: Vec::new(),
        outputs: vec![spec.out.clone()],
        summary: format!(
            "generated {} chunks x {} points (p={}, L={}, {} drifts) -> {}",
            spec.config.n_chunks,
            spec.config.chunk_size,
            spec.config.dims,
            spec.config.classes,
            spec.config.n_drifts,
            spec.out.display()
        ),
    })
}

fn open_reader(
    input: &Path,
    meta: &Option<MetaOverride>,
) -> Result<StreamReader<std::io::BufReader<std::fs::File>>, CliError> {
    match meta {
        Some(m) => {
            let meta = StreamMeta::new(m.features, m.classes, m.chunk_size);
            StreamReader::from_headerless_path(input, meta).map_err(map_error)
        }
        None => StreamReader::from_path(input).map_err(map_error),
    }
}

fn run_detect_inner(
    input: &Path,
    meta_override: &Option<MetaOverride>,
    truth: &Option<Vec<usize>>,
    detector: &DetectorConfig,
) -> Result<DriftReport, CliError> {
    let mut reader = open_reader(input, meta_override)?;
    let mut meta = reader.meta().clone();
    if let Some(t) = truth {
        meta.ground_truth = Some(t.clone());
    }
    let dropped = reader.dropped_handle();
    let mut report = detect_online(&mut reader, meta, detector.clone()).map_err(map_error)?;
    report.diagnostics.dropped_records = dropped.get();
    if report.diagnostics.dropped_records > 0 {
        eprintln!(
            "warning: dropped {} trailing records that did not fill a chunk",
            report.diagnostics.dropped_records
        );
    }
    Ok(report)
}

fn run_detect(spec: &DetectSpec) -> Result<Execution, CliError> {
    let report = run_detect_inner(&spec.input, &spec.meta, &spec.truth, &spec.detector)?;
    std::fs::write(&spec.report, report.to_json())
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", spec.report.display())))?;
    let mut outputs = vec![spec.report.clone()];
    if let Some(series) = &spec.series {
        write_series_csv(&report, series).map_err(map_error)?;
        outputs.push(series.clone());
    }
    if let Some(distances) = &spec.distances {
        write_distances_csv(&report, distances).map_err(map_error)?;
        outputs.push(distances.clone());
    }
    Ok(Execution {
        inputs: vec![spec.input.clone()],
        outputs,
        summary: format!(
            "{} chunk pairs, {} critical points at alpha {}: {:?}",
            report.series.len(),
            report.critical_points.len(),
            report.config.alpha,
            report.critical_points
        ),
    })
}

/// One scored row of an evaluation: the detector itself or a baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub detector: String,
    pub detections: Vec<usize>,
    pub matching: MatchingResult,
}

fn baseline_label(cfg: &BaselineConfig) -> String {
    match cfg {
        BaselineConfig::Cusum(c) => format!("cusum:{},{}", c.allowance, c.threshold),
        BaselineConfig::Ewma(e) => format!("ewma:{},{}", e.lambda, e.limit),
    }
}

fn run_evaluate(spec: &EvaluateSpec) -> Result<Execution, CliError> {
    let text = std::fs::read_to_string(&spec.report)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", spec.report.display())))?;
    let report = DriftReport::from_json(&text).map_err(map_error)?;
    let truth = spec
        .truth
        .clone()
        .or_else(|| report.meta.ground_truth.clone())
        .ok_or_else(|| {
            CliError::usage(
                "no ground truth in the report; pass --truth with the drift chunk indices"
                    .to_string(),
            )
        })?;

    let mut rows = vec![EvaluationRow {
        detector: "detector".to_string(),
        detections: report.critical_points.clone(),
        matching: match_events(&truth, &report.critical_points, spec.tolerance)
            .map_err(map_error)?,
    }];
    let raw = report.raw_series();
    for baseline in &spec.baselines {
        // Alarm index k refers to the pair (k, k+1); report it as the chunk
        // that completed the pair.
        let mut chunks: Vec<usize> = baseline
            .alarms(&raw)
            .map_err(map_error)?
            .iter()
            .map(|&a| a + 1)
            .collect();
        chunks.sort_unstable();
        chunks.dedup();
        rows.push(EvaluationRow {
            detector: baseline_label(baseline),
            matching: match_events(&truth, &chunks, spec.tolerance).map_err(map_error)?,
            detections: chunks,
        });
    }

    let mut csv = String::from("detector,detections,tp,fp,fn,mean_delay\n");
    for row in &rows {
        let m = &row.matching;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.detector,
            row.detections.len(),
            m.true_positives,
            m.false_positives,
            m.false_negatives,
            m.mean_delay.map(|d| d.to_string()).unwrap_or_default()
        ));
    }
    std::fs::write(&spec.out, csv)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", spec.out.display())))?;
    let json = serde_json::to_string_pretty(&rows)
        .map_err(|e| CliError::internal(format!("evaluation serialization: {e}")))?;
    std::fs::write(&spec.json, json)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", spec.json.display())))?;

    let main = &rows[0].matching;
    Ok(Execution {
        inputs: vec![spec.report.clone()],
        outputs: vec![spec.out.clone(), spec.json.clone()],
        summary: format!(
            "tolerance {}: tp {} fp {} fn {} mean_delay {:?} ({} rows)",
            spec.tolerance,
            main.true_positives,
            main.false_positives,
            main.false_negatives,
            main.mean_delay,
            rows.len()
        ),
    })
}

/// Sweep report: the shared detection configuration plus per-alpha rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: DetectorConfig,
    pub tolerance: usize,
    pub rows: Vec<SweepRow>,
}

fn run_sweep(spec: &SweepSpec) -> Result<Execution, CliError> {
    let report = run_detect_inner(&spec.input, &spec.meta, &spec.truth, &spec.detector)?;
    let truth = report.meta.ground_truth.clone();
    let rows =
        alpha_sweep(&report, &spec.alphas, truth.as_deref(), spec.tolerance).map_err(map_error)?;
    write_sweep_csv(&rows, &spec.out).map_err(map_error)?;
    let sweep_report = SweepReport {
        config: report.config.clone(),
        tolerance: spec.tolerance,
        rows,
    };
    let json = serde_json::to_string_pretty(&sweep_report)
        .map_err(|e| CliError::internal(format!("sweep serialization: {e}")))?;
    std::fs::write(&spec.json, json)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", spec.json.display())))?;
    let counts: Vec<usize> = sweep_report.rows.iter().map(|r| r.detections).collect();
    Ok(Execution {
        inputs: vec![spec.input.clone()],
        outputs: vec![spec.out.clone(), spec.json.clone()],
        summary: format!("alphas {:?} -> detections {counts:?}", spec.alphas),
    })
}
