//! Chunked data-stream model and file ingestion.
//!
//! A stream is an ordered sequence of fixed-size chunks of labeled points.
//! Streams are read from a simple text format: an optional header line
//! `# p=<int> L=<int> K=<int> drifts=<comma-separated ints or empty>`
//! followed by one record per line, comma-separated, with the feature values
//! first and the integer class label last. Headerless files are accepted when
//! metadata is supplied by the caller.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled observation: a feature vector and its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: u32,
}

/// A fixed-size ordered batch of points, the unit of processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    /// Sequence number, starting at 0.
    pub index: usize,
    pub points: Vec<LabeledPoint>,
}

/// Stream-level metadata carried alongside the chunks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    /// Feature count per point.
    pub dims: usize,
    /// Number of classes; labels are dense integers in `0..classes`.
    pub classes: u32,
    /// Points per chunk.
    pub chunk_size: usize,
    /// Total chunk count when known (generated or fully declared streams).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_chunks: Option<usize>,
    /// Ground-truth drift center chunk indices, strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<usize>>,
    /// Pseudo-random source identity for generated streams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng: Option<String>,
}

impl StreamMeta {
    pub fn new(dims: usize, classes: u32, chunk_size: usize) -> Self {
        Self {
            dims,
            classes,
            chunk_size,
            n_chunks: None,
            ground_truth: None,
            rng: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::Meta("feature count must be at least 1".into()));
        }
        if self.classes == 0 {
            return Err(Error::Meta("class count must be at least 1".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::Meta("chunk size must be at least 1".into()));
        }
        if let Some(truth) = &self.ground_truth {
            if !truth.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Meta(
                    "ground-truth drift indices must be strictly increasing".into(),
                ));
            }
            if let Some(n) = self.n_chunks {
                if truth.iter().any(|&t| t >= n) {
                    return Err(Error::Meta(format!(
                        "ground-truth drift index out of range (n_chunks={n})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses the `# p=.. L=.. K=.. drifts=..` header line.
pub fn parse_header(line: &str) -> Result<StreamMeta> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Meta("header must start with '#'".into()))?
        .trim();
    let mut dims = None;
    let mut classes = None;
    let mut chunk_size = None;
    let mut drifts = None;
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Meta(format!("malformed header field `{field}`")))?;
        match key {
            "p" => dims = Some(parse_count(value, "p")?),
            "L" => classes = Some(parse_count(value, "L")? as u32),
            "K" => chunk_size = Some(parse_count(value, "K")?),
            "drifts" => {
                let mut list = Vec::new();
                if !value.is_empty() {
                    for part in value.split(',') {
                        list.push(parse_count(part, "drifts")?);
                    }
                }
                drifts = Some(list);
            }
            other => return Err(Error::Meta(format!("unknown header field `{other}`"))),
        }
    }
    let meta = StreamMeta {
        dims: dims.ok_or_else(|| Error::Meta("header missing field `p`".into()))?,
        classes: classes.ok_or_else(|| Error::Meta("header missing field `L`".into()))?,
        chunk_size: chunk_size.ok_or_else(|| Error::Meta("header missing field `K`".into()))?,
        n_chunks: None,
        ground_truth: drifts,
        rng: None,
    };
    meta.validate()?;
    Ok(meta)
}

fn parse_count(value: &str, key: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        Error::Meta(format!(
            "field `{key}`: `{value}` is not a non-negative integer"
        ))
    })
}

/// Formats the header line for a stream file.
pub fn format_header(meta: &StreamMeta) -> String {
    let drifts = meta
        .ground_truth
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "# p={} L={} K={} drifts={}",
        meta.dims, meta.classes, meta.chunk_size, drifts
    )
}

/// Shared handle onto the count of records dropped from a trailing partial
/// chunk, readable after the reader has been consumed.
#[derive(Debug, Clone, Default)]
pub struct DroppedCounter(Rc<std::cell::Cell<usize>>);

impl DroppedCounter {
    pub fn get(&self) -> usize {
        self.0.get()
    }
}

/// Sequential chunk reader over line-oriented record input.
///
/// Yields chunks of exactly `chunk_size` points in input order. A trailing
/// partial chunk is dropped and counted rather than emitted, since the
/// per-bin estimates assume a constant chunk size. The reader is fused: after
/// the first malformed record no further chunks are emitted.
pub struct StreamReader<R: BufRead> {
    lines: std::io::Lines<R>,
    meta: StreamMeta,
    record: usize,
    next_index: usize,
    dropped: DroppedCounter,
    done: bool,
}

impl StreamReader<BufReader<File>> {
    /// Opens a stream file with a header line.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let meta = parse_header(header.trim_end())?;
        Ok(Self::new(reader, meta))
    }

    /// Opens a headerless CSV file with caller-supplied metadata.
    pub fn from_headerless_path(path: impl AsRef<Path>, meta: StreamMeta) -> Result<Self> {
        meta.validate()?;
        Ok(Self::new(BufReader::new(File::open(path)?), meta))
    }
}

impl<R: BufRead> StreamReader<R> {
    /// Wraps an already-positioned reader (records only, no header).
    pub fn new(reader: R, meta: StreamMeta) -> Self {
        Self {
            lines: reader.lines(),
            meta,
            record: 0,
            next_index: 0,
            dropped: DroppedCounter::default(),
            done: false,
        }
    }

    pub fn meta(&self) -> &StreamMeta {
        &self.meta
    }

    /// Records discarded from a trailing partial chunk, valid once the
    /// iterator is exhausted.
    pub fn dropped_records(&self) -> usize {
        self.dropped.get()
    }

    /// Clonable handle onto the dropped-record count; useful when the reader
    /// itself is consumed by the detection pipeline.
    pub fn dropped_handle(&self) -> DroppedCounter {
        self.dropped.clone()
    }

    fn parse_record(&self, line: &str) -> Result<LabeledPoint> {
        let record = self.record;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != self.meta.dims + 1 {
            return Err(Error::MalformedRecord {
                record,
                reason: format!(
                    "expected {} feature values and a label, found {} fields",
                    self.meta.dims,
                    fields.len()
                ),
            });
        }
        let mut features = Vec::with_capacity(self.meta.dims);
        for (i, field) in fields[..self.meta.dims].iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| Error::MalformedRecord {
                record,
                reason: format!("feature {} `{}` is not a decimal float", i + 1, field),
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedRecord {
                    record,
                    reason: format!("feature {} is not finite", i + 1),
                });
            }
            features.push(value);
        }
        let label_field = fields[self.meta.dims].trim();
        let label: u32 = label_field.parse().map_err(|_| Error::MalformedRecord {
            record,
            reason: format!("label `{label_field}` is not a non-negative integer"),
        })?;
        if label >= self.meta.classes {
            return Err(Error::MalformedRecord {
                record,
                reason: format!("unknown label {label} (L={})", self.meta.classes),
            });
        }
        Ok(LabeledPoint { features, label })
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<Chunk>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut points = Vec::with_capacity(self.meta.chunk_size);
        loop {
            match self.lines.next() {
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Some(Ok(line)) => {
                    let line = line.trim_end_matches('\r');
                    if line.is_empty() {
                        continue;
                    }
                    self.record += 1;
                    match self.parse_record(line) {
                        Ok(point) => points.push(point),
                        Err(e) => {
                            self.done = true;
                            return Some(Err(e));
                        }
                    }
                    if points.len() == self.meta.chunk_size {
                        let chunk = Chunk {
                            index: self.next_index,
                            points,
                        };
                        self.next_index += 1;
                        return Some(Ok(chunk));
                    }
                }
                None => {
                    self.done = true;
                    if !points.is_empty() {
                        self.dropped.0.set(points.len());
                    }
                    return None;
                }
            }
        }
    }
}

/// Writes a stream file: header line, then one record per line.
pub fn write_stream(
    path: impl AsRef<Path>,
    meta: &StreamMeta,
    chunks: impl IntoIterator<Item = Chunk>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    writeln!(out, "{}", format_header(meta))?;
    for chunk in chunks {
        for point in &chunk.points {
            let mut line = String::new();
            for f in &point.features {
                line.push_str(&f.to_string());
                line.push(',');
            }
            line.push_str(&point.label.to_string());
            writeln!(out, "{line}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Componentwise (min, max) over the points of one or more chunks.
pub fn chunk_bounds<'a>(chunks: impl IntoIterator<Item = &'a Chunk>) -> Result<Vec<(f64, f64)>> {
    let mut bounds: Option<Vec<(f64, f64)>> = None;
    for chunk in chunks {
        for point in &chunk.points {
            match &mut bounds {
                None => {
                    bounds = Some(point.features.iter().map(|&x| (x, x)).collect());
                }
                Some(b) => {
                    if point.features.len() != b.len() {
                        return Err(Error::DimensionMismatch {
                            expected: b.len(),
                            found: point.features.len(),
                        });
                    }
                    for (slot, &x) in b.iter_mut().zip(&point.features) {
                        slot.0 = slot.0.min(x);
                        slot.1 = slot.1.max(x);
                    }
                }
            }
        }
    }
    bounds.ok_or(Error::Empty("chunk_bounds needs at least one point"))
}
