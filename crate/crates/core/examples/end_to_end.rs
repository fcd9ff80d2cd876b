//! Generate a drifting stream, run the detector, and sweep the threshold.
//!
//! Run with: `cargo run --release --example end_to_end`

use driftkl::detector::{detect_online, DetectorConfig};
use driftkl::evaluation::{alpha_sweep, match_events};
use driftkl::generator::{generate, GeneratorConfig};

fn main() -> driftkl::Result<()> {
    let config = GeneratorConfig {
        seed: 1410,
        dims: 4,
        classes: 2,
        n_chunks: 2000,
        chunk_size: 250,
        n_drifts: 5,
        sigmoid_spacing: 99.0,
        ..GeneratorConfig::default()
    };
    let (meta, stream) = generate(config)?;
    let truth = meta.ground_truth.clone().unwrap();
    println!("induced drifts at {truth:?}");

    let report = detect_online(stream.map(Ok), meta, DetectorConfig::default())?;
    println!("critical points:  {:?}", report.critical_points);
    for segment in &report.segments {
        match segment.exit {
            Some(exit) => println!("  segment enter {} exit {}", segment.enter, exit),
            None => println!("  segment enter {} (still open)", segment.enter),
        }
    }

    let matching = match_events(&truth, &report.critical_points, 30)?;
    println!(
        "tolerance 30: tp {} fp {} fn {} mean delay {:?}",
        matching.true_positives,
        matching.false_positives,
        matching.false_negatives,
        matching.mean_delay
    );

    println!("\nalpha sweep:");
    println!(
        "{:>6} {:>11} {:>4} {:>4} {:>4}",
        "alpha", "detections", "tp", "fp", "fn"
    );
    let alphas = [0.8, 1.0, 1.2, 1.5, 1.75, 2.0, 2.5, 3.0];
    for row in alpha_sweep(&report, &alphas, Some(&truth), 30)? {
        let m = row.matching.unwrap();
        println!(
            "{:>6} {:>11} {:>4} {:>4} {:>4}",
            row.alpha, row.detections, m.true_positives, m.false_positives, m.false_negatives
        );
    }
    Ok(())
}
