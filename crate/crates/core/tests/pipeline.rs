//! Cross-module behavior of the detection pipeline.

use driftkl::detector::{
    critical_segments, detect_online, Detector, DetectorConfig, DetectorEvent, GridScope,
};
use driftkl::divergence::chunk_distance;
use driftkl::generator::{generate, GeneratorConfig};
use driftkl::grid::Grid;
use driftkl::pmf::estimate;
use driftkl::smoothing::{first_derivative, min_max_normalize, Smoother};
use driftkl::stream::{chunk_bounds, Chunk, LabeledPoint, StreamMeta};

fn drifting_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        dims: 2,
        classes: 2,
        n_chunks: 100,
        chunk_size: 120,
        n_drifts: 1,
        sigmoid_spacing: 999.0,
        ..GeneratorConfig::default()
    }
}

/// Independent batch computation: drives the per-pair estimation and the
/// decision rule directly, without the incremental detector state machine.
fn batch_segments(
    chunks: &[Chunk],
    classes: u32,
    config: &DetectorConfig,
) -> Vec<driftkl::CriticalSegment> {
    let mut raw = Vec::new();
    for pair in chunks.windows(2) {
        let bounds = chunk_bounds([&pair[0], &pair[1]]).unwrap();
        let grid = Grid::uniform(&bounds, config.bins_per_dim, config.grid_mode).unwrap();
        let pa = estimate(&pair[0], &grid, classes).unwrap();
        let pb = estimate(&pair[1], &grid, classes).unwrap();
        let cd = chunk_distance(
            &pa,
            &pb,
            (pair[0].index, pair[1].index),
            config.epsilon,
            config.jay_factor,
        )
        .unwrap();
        raw.push(cd.value_weighted);
    }
    let normalized = min_max_normalize(&raw);
    let smoothed = config.smoother.apply(&normalized).unwrap();
    let gradient = first_derivative(&smoothed).unwrap();
    critical_segments(&gradient, config.alpha, config.stats_window, config.warmup)
}

#[test]
fn online_equals_batch_on_random_small_streams() {
    for seed in 1..=10u64 {
        let cfg = GeneratorConfig {
            seed,
            dims: 2,
            classes: 2,
            n_chunks: 50,
            chunk_size: 60,
            n_drifts: 1,
            ..GeneratorConfig::default()
        };
        let (meta, stream) = generate(cfg).unwrap();
        let chunks: Vec<Chunk> = stream.collect();
        let det_cfg = DetectorConfig {
            warmup: 5,
            ..DetectorConfig::default()
        };
        let report = detect_online(
            chunks.iter().cloned().map(Ok),
            meta.clone(),
            det_cfg.clone(),
        )
        .unwrap();
        let batch = batch_segments(&chunks, meta.classes, &det_cfg);
        assert_eq!(report.segments, batch, "seed {seed}");
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let run = || {
        let (meta, stream) = generate(drifting_config(40)).unwrap();
        detect_online(stream.map(Ok), meta, DetectorConfig::default())
            .unwrap()
            .to_json()
    };
    assert_eq!(run(), run());
}

#[test]
fn abrupt_switch_yields_one_segment_near_the_center() {
    // One sudden concept switch at chunk 50 of 100.
    let (meta, stream) = generate(drifting_config(7)).unwrap();
    assert_eq!(meta.ground_truth.as_deref().unwrap(), &[50]);
    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
    assert_eq!(report.segments.len(), 1, "segments {:?}", report.segments);
    let enter = report.segments[0].enter;
    assert!((50..=55).contains(&enter), "enter {enter} outside [50, 55]");
}

#[test]
fn flagged_indices_nest_as_alpha_grows() {
    let (meta, stream) = generate(drifting_config(11)).unwrap();
    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
    let gradient = report.gradient();
    let n = gradient.len() as f64;
    let mean = gradient.iter().sum::<f64>() / n;
    let sigma = (gradient
        .iter()
        .map(|&g| (g - mean) * (g - mean))
        .sum::<f64>()
        / n)
        .sqrt();
    let flagged = |alpha: f64| -> Vec<usize> {
        gradient
            .iter()
            .enumerate()
            .filter(|&(k, &g)| k >= 10 && g - mean > (alpha * sigma).max(1e-12))
            .map(|(k, _)| k)
            .collect()
    };
    let mut previous = flagged(0.5);
    for alpha in [0.8, 1.0, 1.5, 2.0, 3.0] {
        let current = flagged(alpha);
        assert!(
            current.iter().all(|k| previous.contains(k)),
            "alpha {alpha}"
        );
        previous = current;
    }
}

#[test]
fn provisional_events_open_and_close_segments() {
    let (meta, stream) = generate(drifting_config(3)).unwrap();
    let mut detector = Detector::new(meta, DetectorConfig::default()).unwrap();
    let mut opened = 0;
    let mut closed = 0;
    let mut open_depth = 0i32;
    for chunk in stream {
        for event in detector.push(chunk).unwrap() {
            match event {
                DetectorEvent::SegmentOpened { .. } => {
                    opened += 1;
                    open_depth += 1;
                }
                DetectorEvent::SegmentClosed { enter, exit } => {
                    closed += 1;
                    open_depth -= 1;
                    assert!(exit > enter);
                }
            }
            assert!((0..=1).contains(&open_depth), "events must alternate");
        }
    }
    assert!(
        opened >= 1,
        "a drifting stream must raise at least one event"
    );
    assert!(opened == closed || opened == closed + 1);
    assert!(detector.last_normalized().is_some());
    let report = detector.finish().unwrap();
    assert!(!report.series.is_empty());
}

#[test]
fn global_grid_scope_runs_and_is_reported() {
    let (meta, stream) = generate(drifting_config(5)).unwrap();
    let config = DetectorConfig {
        grid_scope: GridScope::Global,
        ..DetectorConfig::default()
    };
    let report = detect_online(stream.map(Ok), meta, config).unwrap();
    let grid = report.global_grid.as_ref().expect("global grid recorded");
    assert_eq!(grid.dims(), 2);
    assert_eq!(report.series.len(), 99);
}

#[test]
fn lowess_smoother_runs_in_batch_without_events() {
    let (meta, stream) = generate(drifting_config(9)).unwrap();
    let config = DetectorConfig {
        smoother: Smoother::Lowess {
            frac: 0.05,
            iters: 1,
        },
        ..DetectorConfig::default()
    };
    let mut detector = Detector::new(meta, config).unwrap();
    let mut events = 0usize;
    for chunk in stream {
        events += detector.push(chunk).unwrap().len();
    }
    assert_eq!(events, 0, "non-causal smoothing cannot emit live events");
    let report = detector.finish().unwrap();
    assert_eq!(report.series.len(), 99);
    assert!(report.series.iter().all(|r| r.smoothed.is_finite()));
}

#[test]
fn incomparable_pair_is_carried_and_logged() {
    // Two point clouds with disjoint slab occupancy in every dimension.
    let cluster = |center: f64, index: usize| -> Chunk {
        Chunk {
            index,
            points: (0..40)
                .map(|i| LabeledPoint {
                    features: vec![center + (i as f64) * 1e-4, center - (i as f64) * 1e-4],
                    label: (i % 2) as u32,
                })
                .collect(),
        }
    };
    let chunks = vec![
        cluster(0.0, 0),
        cluster(100.0, 1),
        cluster(100.0, 2),
        cluster(100.0, 3),
    ];
    let meta = StreamMeta::new(2, 2, 40);
    let config = DetectorConfig {
        warmup: 2,
        ..DetectorConfig::default()
    };
    let report = detect_online(chunks.into_iter().map(Ok), meta, config).unwrap();
    // Pair (0,1) has no bin occupied on both sides: value carried from
    // nothing, so zero, and the gap recorded.
    assert_eq!(report.diagnostics.gap_pairs, vec![0]);
    assert_eq!(report.series[0].raw, 0.0);
    assert!(report.series[1].raw.is_finite());
}

#[test]
fn singleton_sweep_equals_a_direct_run() {
    let (meta, stream) = generate(drifting_config(13)).unwrap();
    let truth = meta.ground_truth.clone().unwrap();
    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
    let rows = driftkl::evaluation::alpha_sweep(&report, &[report.config.alpha], Some(&truth), 30)
        .unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].segments, report.segments);
    assert_eq!(rows[0].detections, report.critical_points.len());
}

#[test]
fn detector_rejects_out_of_order_chunks() {
    let (meta, stream) = generate(drifting_config(2)).unwrap();
    let mut chunks: Vec<Chunk> = stream.take(3).collect();
    chunks.swap(1, 2);
    let mut detector = Detector::new(meta, DetectorConfig::default()).unwrap();
    detector.push(chunks[0].clone()).unwrap();
    assert!(detector.push(chunks[1].clone()).is_err());
}

#[test]
fn two_chunk_stream_produces_a_report_without_segments() {
    let (meta, stream) = generate(GeneratorConfig {
        seed: 1,
        dims: 2,
        n_chunks: 2,
        chunk_size: 30,
        n_drifts: 0,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
    assert_eq!(report.series.len(), 1);
    assert!(report.segments.is_empty());
    assert!(report.series[0].gradient.is_none());
}

#[test]
fn stream_files_round_trip_exactly() {
    // Detecting over a written-then-reread stream must give the same
    // report as detecting over the in-memory chunks, byte for byte.
    let (meta, stream) = generate(drifting_config(21)).unwrap();
    let chunks: Vec<Chunk> = stream.collect();
    let in_memory = detect_online(
        chunks.iter().cloned().map(Ok),
        meta.clone(),
        DetectorConfig::default(),
    )
    .unwrap();

    let dir = std::env::temp_dir().join(format!("driftkl_roundtrip_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("stream.csv");
    driftkl::stream::write_stream(&path, &meta, chunks).unwrap();
    let mut reader = driftkl::stream::StreamReader::from_path(&path).unwrap();
    let mut file_meta = reader.meta().clone();
    file_meta.n_chunks = meta.n_chunks;
    file_meta.rng = meta.rng.clone();
    let from_file = detect_online(&mut reader, file_meta, DetectorConfig::default()).unwrap();
    std::fs::remove_dir_all(&dir).ok();

    assert_eq!(in_memory.to_json(), from_file.to_json());
}

#[test]
fn six_feature_streams_detect_their_drifts() {
    let cfg = GeneratorConfig {
        seed: 6543,
        dims: 6,
        classes: 2,
        n_chunks: 600,
        chunk_size: 250,
        n_drifts: 3,
        sigmoid_spacing: 99.0,
        ..GeneratorConfig::default()
    };
    let (meta, stream) = generate(cfg).unwrap();
    let truth = meta.ground_truth.clone().unwrap();
    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default()).unwrap();
    let matching = driftkl::evaluation::match_events(&truth, &report.critical_points, 30).unwrap();
    assert_eq!(
        matching.true_positives, 3,
        "detections {:?}",
        report.critical_points
    );
}

#[test]
fn shared_types_can_cross_threads() {
    fn assert_send_sync<T: Send + Sync>() {}
    fn assert_send<T: Send>() {}
    // Immutable data is shareable; a detector instance can move between
    // threads between chunk arrivals.
    assert_send_sync::<Chunk>();
    assert_send_sync::<StreamMeta>();
    assert_send_sync::<Grid>();
    assert_send_sync::<driftkl::DriftReport>();
    assert_send::<Detector>();
}

#[test]
fn fewer_than_two_chunks_is_an_error() {
    let (meta, stream) = generate(GeneratorConfig {
        seed: 1,
        dims: 2,
        n_chunks: 5,
        chunk_size: 30,
        n_drifts: 0,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let one: Vec<Chunk> = stream.take(1).collect();
    assert!(detect_online(one.into_iter().map(Ok), meta, DetectorConfig::default()).is_err());
}
