//! Command-line pipeline: generate synthetic drifting streams, run the
//! divergence-based drift detector, score detections against ground truth,
//! and sweep the decision threshold. Every command materializes its full
//! configuration into a run manifest whose replay reproduces the outputs
//! byte for byte.

mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftkl::baselines::{BaselineConfig, CusumConfig, EwmaConfig};
use driftkl::detector::{DetectorConfig, GridScope};
use driftkl::generator::GeneratorConfig;
use driftkl::grid::GridMode;
use driftkl::smoothing::Smoother;

use manifest::{digest_all, RunManifest};
use run::{execute, DetectSpec, EvaluateSpec, GenerateSpec, MetaOverride, RunSpec, SweepSpec};

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        Self { code: 1, message }
    }
    pub fn data(message: String) -> Self {
        Self { code: 2, message }
    }
    pub fn internal(message: String) -> Self {
        Self { code: 3, message }
    }
}

#[derive(Parser)]
#[command(
    name = "driftkl",
    version,
    about = "Concept drift detection over chunked labeled streams via class-conditional KL divergence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic drifting stream file.
    Generate(GenerateArgs),
    /// Run the drift detector over a stream file.
    Detect(DetectArgs),
    /// Score a detection report against ground truth.
    Evaluate(EvaluateArgs),
    /// Run the detector once and sweep the alpha threshold.
    Sweep(SweepArgs),
    /// Replay a recorded manifest and verify the outputs.
    FromManifest(FromManifestArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON file with generator settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Feature count p.
    #[arg(long)]
    features: Option<usize>,
    /// Class count L.
    #[arg(long)]
    classes: Option<u32>,
    #[arg(long)]
    chunks: Option<usize>,
    #[arg(long)]
    chunk_size: Option<usize>,
    #[arg(long)]
    drifts: Option<usize>,
    /// Concept sigmoid spacing; 999 is effectively sudden.
    #[arg(long)]
    sigmoid: Option<f64>,
    /// Label flip probability.
    #[arg(long)]
    flip: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    covariance: Option<f64>,
    #[arg(long)]
    concept_shift: Option<f64>,
    /// Output stream file.
    #[arg(long, default_value = "stream.csv")]
    out: PathBuf,
    /// Manifest path; defaults to <out>.manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct DetectorArgs {
    /// JSON file with detector settings; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Threshold multiplier of the decision rule.
    #[arg(long)]
    alpha: Option<f64>,
    /// Smoothing constant for zero pmf entries.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    bins_per_dim: Option<usize>,
    /// Grid layout: slab or product.
    #[arg(long, value_name = "MODE")]
    bins_mode: Option<String>,
    /// Grid scope: per-pair or global.
    #[arg(long, value_name = "SCOPE")]
    grid: Option<String>,
    /// Smoother: `ma:<window>` or `lowess:<frac>,<iters>`.
    #[arg(long)]
    smoother: Option<String>,
    /// Trailing window for the band statistics (default: full series).
    #[arg(long)]
    stats_window: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    /// Use the pure occupancy-weighted mean, without the extra division by
    /// the compared-bin count.
    #[arg(long)]
    no_jay_factor: bool,
}

#[derive(Args)]
struct StreamInputArgs {
    /// Input stream file (headered, or headerless CSV with the meta flags).
    #[arg(long)]
    input: PathBuf,
    /// Feature count for headerless CSV input.
    #[arg(long)]
    features: Option<usize>,
    /// Class count for headerless CSV input.
    #[arg(long)]
    classes: Option<u32>,
    /// Chunk size for headerless CSV input.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Ground-truth drift chunk indices, comma separated.
    #[arg(long)]
    truth: Option<String>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    stream: StreamInputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Report JSON path.
    #[arg(long, default_value = "detect_report.json")]
    report: PathBuf,
    /// Series CSV path.
    #[arg(long)]
    series: Option<PathBuf>,
    /// Write the plot-ready series CSV next to the report.
    #[arg(long)]
    emit_plot_data: bool,
    /// Per-pair divergence CSV path.
    #[arg(long)]
    distances: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Detection report JSON produced by `detect`.
    #[arg(long)]
    report: PathBuf,
    /// Ground-truth drift chunk indices, comma separated (defaults to the
    /// report's recorded ground truth).
    #[arg(long)]
    truth: Option<String>,
    #[arg(long, default_value_t = 30)]
    tolerance: usize,
    /// Baseline detectors to score alongside: `cusum[:k,h]` or
    /// `ewma[:lambda,c]`. Repeatable. Baselines consume the raw divergence
    /// series, not its gradient.
    #[arg(long)]
    baseline: Vec<String>,
    /// Metrics CSV path.
    #[arg(long, default_value = "evaluate.csv")]
    out: PathBuf,
    /// Metrics JSON path; defaults to <out> with a .json extension.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    stream: StreamInputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Alphas: `start:end:step` or a comma-separated list.
    #[arg(long, default_value = "1.0:3.0:0.25")]
    alphas: String,
    #[arg(long, default_value_t = 30)]
    tolerance: usize,
    /// Sweep CSV path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Sweep JSON path; defaults to <out> with a .json extension.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct FromManifestArgs {
    /// Manifest file recorded by a previous run.
    manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let manifest_path = args
                .manifest
                .clone()
                .unwrap_or_else(|| manifest_path_for(&args.out));
            let spec = RunSpec::Generate(resolve_generate(args)?);
            run_with_manifest(spec, manifest_path)
        }
        Command::Detect(args) => {
            let manifest_path = args
                .manifest
                .clone()
                .unwrap_or_else(|| manifest_path_for(&args.report));
            let spec = RunSpec::Detect(resolve_detect(args)?);
            run_with_manifest(spec, manifest_path)
        }
        Command::Evaluate(args) => {
            let manifest_path = args
                .manifest
                .clone()
                .unwrap_or_else(|| manifest_path_for(&args.out));
            let spec = RunSpec::Evaluate(resolve_evaluate(args)?);
            run_with_manifest(spec, manifest_path)
        }
        Command::Sweep(args) => {
            let manifest_path = args
                .manifest
                .clone()
                .unwrap_or_else(|| manifest_path_for(&args.out));
            let spec = RunSpec::Sweep(resolve_sweep(args)?);
            run_with_manifest(spec, manifest_path)
        }
        Command::FromManifest(args) => replay_manifest(&args.manifest),
    }
}

fn manifest_path_for(output: &std::path::Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn run_with_manifest(spec: RunSpec, manifest_path: PathBuf) -> Result<(), CliError> {
    let execution = execute(&spec)?;
    let inputs = digest_all(&execution.inputs)?;
    let outputs = digest_all(&execution.outputs)?;
    let manifest = RunManifest::new(spec, inputs, outputs);
    manifest.write(&manifest_path)?;
    println!("{}", execution.summary);
    println!("manifest: {}", manifest_path.display());
    Ok(())
}

fn replay_manifest(path: &std::path::Path) -> Result<(), CliError> {
    let manifest = RunManifest::read(path)?;
    for input in &manifest.inputs {
        let digest = manifest::sha256_file(&input.path)?;
        if digest != input.sha256 {
            return Err(CliError::data(format!(
                "input {} changed since the manifest was recorded",
                input.path.display()
            )));
        }
    }
    let execution = execute(&manifest.run)?;
    for recorded in &manifest.outputs {
        let digest = manifest::sha256_file(&recorded.path)?;
        if digest != recorded.sha256 {
            return Err(CliError::internal(format!(
                "replay produced a different {} (digest {} vs recorded {})",
                recorded.path.display(),
                digest,
                recorded.sha256
            )));
        }
    }
    println!("{}", execution.summary);
    println!(
        "replayed {} outputs, all digests match",
        manifest.outputs.len()
    );
    Ok(())
}

// ---- flag resolution -------------------------------------------------

fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("malformed config {}: {e}", p.display())))
        }
    }
}

fn resolve_generate(args: GenerateArgs) -> Result<GenerateSpec, CliError> {
    let mut config: GeneratorConfig = load_config(&args.config)?;
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.features {
        config.dims = v;
    }
    if let Some(v) = args.classes {
        config.classes = v;
    }
    if let Some(v) = args.chunks {
        config.n_chunks = v;
    }
    if let Some(v) = args.chunk_size {
        config.chunk_size = v;
    }
    if let Some(v) = args.drifts {
        config.n_drifts = v;
    }
    if let Some(v) = args.sigmoid {
        config.sigmoid_spacing = v;
    }
    if let Some(v) = args.flip {
        config.class_flip = v;
    }
    if let Some(v) = args.clusters {
        config.clusters_per_class = v;
    }
    if let Some(v) = args.separation {
        config.separation = v;
    }
    if let Some(v) = args.covariance {
        config.covariance_scale = v;
    }
    if let Some(v) = args.concept_shift {
        config.concept_shift = v;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(GenerateSpec {
        config,
        out: args.out,
    })
}

fn resolve_detector(args: &DetectorArgs) -> Result<DetectorConfig, CliError> {
    let mut config: DetectorConfig = load_config(&args.config)?;
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.bins_per_dim {
        config.bins_per_dim = v;
    }
    if let Some(mode) = &args.bins_mode {
        config.grid_mode = match mode.as_str() {
            "slab" => GridMode::Slab,
            "product" => GridMode::Product,
            other => {
                return Err(CliError::usage(format!(
                    "unknown bins mode `{other}` (expected slab or product)"
                )))
            }
        };
    }
    if let Some(scope) = &args.grid {
        config.grid_scope = match scope.as_str() {
            "per-pair" => GridScope::PerPair,
            "global" => GridScope::Global,
            other => {
                return Err(CliError::usage(format!(
                    "unknown grid scope `{other}` (expected per-pair or global)"
                )))
            }
        };
    }
    if let Some(spec) = &args.smoother {
        config.smoother = parse_smoother(spec)?;
    }
    if args.stats_window.is_some() {
        config.stats_window = args.stats_window;
    }
    if let Some(v) = args.warmup {
        config.warmup = v;
    }
    if args.no_jay_factor {
        config.jay_factor = false;
    }
    config
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

fn parse_smoother(spec: &str) -> Result<Smoother, CliError> {
    let err = || {
        CliError::usage(format!(
            "malformed smoother `{spec}` (expected ma[:<window>] or lowess[:<frac>,<iters>])"
        ))
    };
    let (kind, params) = match spec.split_once(':') {
        Some((kind, params)) => (kind, Some(params)),
        None => (spec, None),
    };
    match (kind, params) {
        ("ma", None) => Ok(Smoother::MovingAverage { window: 5 }),
        ("ma", Some(params)) => Ok(Smoother::MovingAverage {
            window: params.parse().map_err(|_| err())?,
        }),
        ("lowess", None) => Ok(Smoother::Lowess {
            frac: 0.05,
            iters: 1,
        }),
        ("lowess", Some(params)) => {
            let (frac, iters) = params.split_once(',').ok_or_else(err)?;
            Ok(Smoother::Lowess {
                frac: frac.parse().map_err(|_| err())?,
                iters: iters.parse().map_err(|_| err())?,
            })
        }
        _ => Err(err()),
    }
}

fn parse_truth(truth: &Option<String>) -> Result<Option<Vec<usize>>, CliError> {
    match truth {
        None => Ok(None),
        Some(list) => {
            let mut out = Vec::new();
            for part in list.split(',').filter(|p| !p.is_empty()) {
                out.push(
                    part.trim()
                        .parse()
                        .map_err(|_| CliError::usage(format!("malformed truth index `{part}`")))?,
                );
            }
            Ok(Some(out))
        }
    }
}

fn resolve_stream_meta(args: &StreamInputArgs) -> Result<Option<MetaOverride>, CliError> {
    match (args.features, args.classes, args.chunk_size) {
        (None, None, None) => Ok(None),
        (Some(features), Some(classes), Some(chunk_size)) => Ok(Some(MetaOverride {
            features,
            classes,
            chunk_size,
        })),
        _ => Err(CliError::usage(
            "headerless input needs all of --features, --classes and --chunk-size".to_string(),
        )),
    }
}

fn resolve_detect(args: DetectArgs) -> Result<DetectSpec, CliError> {
    let series = match (args.series, args.emit_plot_data) {
        (Some(path), _) => Some(path),
        (None, true) => Some(args.report.with_extension("series.csv")),
        (None, false) => None,
    };
    Ok(DetectSpec {
        meta: resolve_stream_meta(&args.stream)?,
        truth: parse_truth(&args.stream.truth)?,
        input: args.stream.input,
        detector: resolve_detector(&args.detector)?,
        report: args.report,
        series,
        distances: args.distances,
    })
}

fn parse_baseline(spec: &str) -> Result<BaselineConfig, CliError> {
    let err = || {
        CliError::usage(format!(
            "malformed baseline `{spec}` (expected cusum[:k,h] or ewma[:lambda,c])"
        ))
    };
    let (kind, params) = match spec.split_once(':') {
        Some((kind, params)) => (kind, Some(params)),
        None => (spec, None),
    };
    let two = |params: &str| -> Result<(f64, f64), CliError> {
        let (a, b) = params.split_once(',').ok_or_else(err)?;
        Ok((
            a.trim().parse().map_err(|_| err())?,
            b.trim().parse().map_err(|_| err())?,
        ))
    };
    match kind {
        "cusum" => {
            let mut cfg = CusumConfig::default();
            if let Some(p) = params {
                let (allowance, threshold) = two(p)?;
                cfg.allowance = allowance;
                cfg.threshold = threshold;
            }
            Ok(BaselineConfig::Cusum(cfg))
        }
        "ewma" => {
            let mut cfg = EwmaConfig::default();
            if let Some(p) = params {
                let (lambda, limit) = two(p)?;
                cfg.lambda = lambda;
                cfg.limit = limit;
            }
            Ok(BaselineConfig::Ewma(cfg))
        }
        _ => Err(err()),
    }
}

fn resolve_evaluate(args: EvaluateArgs) -> Result<EvaluateSpec, CliError> {
    let baselines = args
        .baseline
        .iter()
        .map(|b| parse_baseline(b))
        .collect::<Result<Vec<_>, _>>()?;
    let json = args.json.unwrap_or_else(|| args.out.with_extension("json"));
    Ok(EvaluateSpec {
        report: args.report,
        truth: parse_truth(&args.truth)?,
        tolerance: args.tolerance,
        baselines,
        out: args.out,
        json,
    })
}

fn parse_alphas(spec: &str) -> Result<Vec<f64>, CliError> {
    let err = || {
        CliError::usage(format!(
            "malformed alphas `{spec}` (expected start:end:step or a comma-separated list)"
        ))
    };
    let alphas: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(err());
        }
        let start: f64 = parts[0].parse().map_err(|_| err())?;
        let end: f64 = parts[1].parse().map_err(|_| err())?;
        let step: f64 = parts[2].parse().map_err(|_| err())?;
        if !(step > 0.0) || end < start {
            return Err(err());
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let alpha = start + f64::from(k) * step;
            if alpha > end + 1e-9 {
                break;
            }
            out.push(alpha);
            k += 1;
        }
        out
    } else {
        spec.split(',')
            .map(|p| p.trim().parse().map_err(|_| err()))
            .collect::<Result<Vec<f64>, _>>()?
    };
    if alphas.is_empty() {
        return Err(err());
    }
    Ok(alphas)
}

fn resolve_sweep(args: SweepArgs) -> Result<SweepSpec, CliError> {
    let json = args.json.unwrap_or_else(|| args.out.with_extension("json"));
    Ok(SweepSpec {
        meta: resolve_stream_meta(&args.stream)?,
        truth: parse_truth(&args.stream.truth)?,
        input: args.stream.input,
        detector: resolve_detector(&args.detector)?,
        alphas: parse_alphas(&args.alphas)?,
        tolerance: args.tolerance,
        out: args.out,
        json,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoother_specs_parse() {
        assert_eq!(
            parse_smoother("ma:5").unwrap(),
            Smoother::MovingAverage { window: 5 }
        );
        assert_eq!(
            parse_smoother("lowess:0.1,2").unwrap(),
            Smoother::Lowess {
                frac: 0.1,
                iters: 2
            }
        );
        // Bare names fall back to the documented defaults.
        assert_eq!(
            parse_smoother("ma").unwrap(),
            Smoother::MovingAverage { window: 5 }
        );
        assert_eq!(
            parse_smoother("lowess").unwrap(),
            Smoother::Lowess {
                frac: 0.05,
                iters: 1
            }
        );
        assert!(parse_smoother("median:3").is_err());
        assert!(parse_smoother("ma:x").is_err());
    }

    #[test]
    fn alpha_ranges_parse() {
        let ladder = parse_alphas("1.0:3.0:0.25").unwrap();
        assert_eq!(ladder.len(), 9);
        assert_eq!(ladder[0], 1.0);
        assert_eq!(*ladder.last().unwrap(), 3.0);

        assert_eq!(parse_alphas("1.5,1.75").unwrap(), vec![1.5, 1.75]);
        assert!(parse_alphas("3:1:0.5").is_err());
        assert!(parse_alphas("").is_err());
    }

    #[test]
    fn baseline_specs_parse() {
        match parse_baseline("cusum:0.1,2.0").unwrap() {
            BaselineConfig::Cusum(c) => {
                assert_eq!(c.allowance, 0.1);
                assert_eq!(c.threshold, 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_baseline("ewma").unwrap(),
            BaselineConfig::Ewma(_)
        ));
        assert!(parse_baseline("adwin:1").is_err());
    }
}
