//! Plot-ready CSV exports of a detection run.
//!
//! All numbers are written with Rust's shortest-roundtrip float formatting,
//! so identical runs produce byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::detector::DriftReport;
use crate::error::Result;
use crate::evaluation::SweepRow;

/// Writes the series columns `k,raw,normalized,smoothed,gradient`; the last
/// row's gradient field is empty.
pub fn write_series_csv(report: &DriftReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "k,raw,normalized,smoothed,gradient")?;
    for row in &report.series {
        let gradient = row.gradient.map(|g| g.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            row.k, row.raw, row.normalized, row.smoothed, gradient
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the per-pair divergence columns
/// `i,value_unweighted,value_weighted,skipped_bins`.
pub fn write_distances_csv(report: &DriftReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "i,value_unweighted,value_weighted,skipped_bins")?;
    for row in &report.series {
        writeln!(
            out,
            "{},{},{},{}",
            row.k, row.unweighted, row.raw, row.skipped_bins
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Writes sweep metrics `alpha,detections,tp,fp,fn,mean_delay`; the metric
/// columns are empty when no ground truth was supplied.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "alpha,detections,tp,fp,fn,mean_delay")?;
    for row in rows {
        match &row.matching {
            Some(m) => writeln!(
                out,
                "{},{},{},{},{},{}",
                row.alpha,
                row.detections,
                m.true_positives,
                m.false_positives,
                m.false_negatives,
                m.mean_delay.map(|d| d.to_string()).unwrap_or_default()
            )?,
            None => writeln!(out, "{},{},,,,", row.alpha, row.detections)?,
        }
    }
    out.flush()?;
    Ok(())
}
