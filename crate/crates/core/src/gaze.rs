//! Velocity-threshold fixation identification (I-VT) over raw gaze samples.
//!
//! A run of consecutive valid samples whose sample-to-sample velocities all
//! stay below the threshold is a fixation candidate. Candidates shorter than
//! the minimum duration are dropped. Invalid samples (blinks, tracking loss)
//! are skipped, and the run survives them as long as the time between the
//! surrounding valid samples does not exceed `max_gap`. A sample repeating
//! the previous timestamp is ignored.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped gaze measurement in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

impl GazeSample {
    pub fn new(timestamp: f64, x: f64, y: f64) -> Self {
        GazeSample {
            timestamp,
            x,
            y,
            valid: true,
        }
    }

    pub fn invalid(timestamp: f64) -> Self {
        GazeSample {
            timestamp,
            x: f64::NAN,
            y: f64::NAN,
            valid: false,
        }
    }

    /// Valid and carrying finite coordinates.
    pub fn is_usable(&self) -> bool {
        self.valid && self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IvtParams {
    /// Pixels per millisecond.
    pub velocity_threshold: f64,
    /// Milliseconds.
    pub min_fixation_duration: f64,
    /// Longest gap between two valid samples that a fixation may span, in ms.
    pub max_gap: f64,
}

impl Default for IvtParams {
    fn default() -> Self {
        IvtParams {
            velocity_threshold: 0.7,
            min_fixation_duration: 60.0,
            max_gap: 50.0,
        }
    }
}

impl IvtParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParam {
                    name,
                    reason: format!("must be a positive finite number, got {v}"),
                })
            }
        };
        check("velocity_threshold", self.velocity_threshold)?;
        check("min_fixation_duration", self.min_fixation_duration)?;
        check("max_gap", self.max_gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub start: f64,
    pub end: f64,
    pub duration: f64,
    pub cx: f64,
    pub cy: f64,
    /// Filled in by AOI mapping.
    pub word_index: Option<usize>,
}

/// Euclidean speed between two valid samples in px/ms.
pub fn point_velocity(a: &GazeSample, b: &GazeSample) -> Result<f64> {
    let dt = b.timestamp - a.timestamp;
    if !(dt > 0.0) {
        return Err(Error::NonIncreasingTimestamps {
            previous: a.timestamp,
            next: b.timestamp,
        });
    }
    if !a.is_usable() || !b.is_usable() {
        return Err(Error::InvalidParam {
            name: "sample",
            reason: "velocity requires two valid samples".into(),
        });
    }
    Ok((b.x - a.x).hypot(b.y - a.y) / dt)
}

#[derive(Debug, Clone)]
struct Run {
    start: f64,
    last: GazeSample,
    sum_x: f64,
    sum_y: f64,
    count: usize,
}

impl Run {
    fn begin(s: GazeSample) -> Self {
        Run {
            start: s.timestamp,
            last: s,
            sum_x: s.x,
            sum_y: s.y,
            count: 1,
        }
    }

    fn extend(&mut self, s: GazeSample) {
        self.last = s;
        self.sum_x += s.x;
        self.sum_y += s.y;
        self.count += 1;
    }

    fn into_fixation(self, min_duration: f64) -> Option<Fixation> {
        let duration = self.last.timestamp - self.start;
        (duration >= min_duration).then(|| Fixation {
            start: self.start,
            end: self.last.timestamp,
            duration,
            cx: self.sum_x / self.count as f64,
            cy: self.sum_y / self.count as f64,
            word_index: None,
        })
    }
}

/// Incremental I-VT detector for one sample stream.
///
/// Samples are pushed in timestamp order; a fixation is emitted as soon as
/// the run that forms it is closed by a saccade or an over-long gap.
#[derive(Debug, Clone)]
pub struct FixationDetector {
    params: IvtParams,
    last_timestamp: Option<f64>,
    run: Option<Run>,
}

impl FixationDetector {
    pub fn new(params: IvtParams) -> Result<Self> {
        params.validate()?;
        Ok(FixationDetector {
            params,
            last_timestamp: None,
            run: None,
        })
    }

    pub fn params(&self) -> &IvtParams {
        &self.params
    }

    pub fn push(&mut self, sample: GazeSample) -> Result<Option<Fixation>> {
        if let Some(prev) = self.last_timestamp {
            if !(sample.timestamp >= prev) {
                return Err(Error::NonIncreasingTimestamps {
                    previous: prev,
                    next: sample.timestamp,
                });
            }
        }
        // A repeated timestamp carries no velocity information; the first
        // sample at that instant wins.
        let repeated = self.last_timestamp == Some(sample.timestamp);
        self.last_timestamp = Some(sample.timestamp);
        if repeated || !sample.is_usable() {
            return Ok(None);
        }
        let Some(last) = self.run.as_ref().map(|r| r.last) else {
            self.run = Some(Run::begin(sample));
            return Ok(None);
        };
        if self.joins(&last, &sample) {
            if let Some(run) = self.run.as_mut() {
                run.extend(sample);
            }
            Ok(None)
        } else {
            let closed = self.run.replace(Run::begin(sample));
            Ok(closed.and_then(|r| r.into_fixation(self.params.min_fixation_duration)))
        }
    }

    /// Closes the open run, if any.
    pub fn finish(&mut self) -> Option<Fixation> {
        self.run
            .take()
            .and_then(|r| r.into_fixation(self.params.min_fixation_duration))
    }

    fn joins(&self, prev: &GazeSample, next: &GazeSample) -> bool {
        let dt = next.timestamp - prev.timestamp;
        if dt > self.params.max_gap {
            return false;
        }
        (next.x - prev.x).hypot(next.y - prev.y) / dt < self.params.velocity_threshold
    }
}

/// Runs I-VT over a complete stream.
pub fn detect_fixations(samples: &[GazeSample], params: &IvtParams) -> Result<Vec<Fixation>> {
    let mut detector = FixationDetector::new(*params)?;
    let mut out = Vec::new();
    for s in samples {
        out.extend(detector.push(*s)?);
    }
    out.extend(detector.finish());
    Ok(out)
}

pub fn check_monotone(samples: &[GazeSample]) -> Result<()> {
    for pair in samples.windows(2) {
        if !(pair[1].timestamp >= pair[0].timestamp) {
            return Err(Error::NonIncreasingTimestamps {
                previous: pair[0].timestamp,
                next: pair[1].timestamp,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct GazeRecord {
    timestamp_ms: f64,
    x_px: Option<f64>,
    y_px: Option<f64>,
    valid: String,
}

fn parse_valid(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" => Some(true),
        "0" | "false" => Some(false),
        _ => None,
    }
}

/// Reads a gaze log (`timestamp_ms,x_px,y_px,valid`, header required).
pub fn read_gaze_log<R: Read>(reader: R, source_name: &str) -> Result<Vec<GazeSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["timestamp_ms", "x_px", "y_px", "valid"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::parse(
            source_name,
            format!("expected header {}", expected.join(",")),
        ));
    }
    let mut samples = Vec::new();
    for (line, rec) in rdr.deserialize::<GazeRecord>().enumerate() {
        let rec = rec?;
        let location = || format!("{source_name}:{}", line + 2);
        let valid = parse_valid(&rec.valid)
            .ok_or_else(|| Error::parse(location(), format!("bad valid flag {:?}", rec.valid)))?;
        let sample = match (valid, rec.x_px, rec.y_px) {
            (true, Some(x), Some(y)) if x.is_finite() && y.is_finite() => {
                GazeSample::new(rec.timestamp_ms, x, y)
            }
            (true, _, _) => {
                return Err(Error::parse(location(), "valid sample without finite coordinates"))
            }
            (false, x, y) => GazeSample {
                timestamp: rec.timestamp_ms,
                x: x.unwrap_or(f64::NAN),
                y: y.unwrap_or(f64::NAN),
                valid: false,
            },
        };
        if !sample.timestamp.is_finite() {
            return Err(Error::parse(location(), "non-finite timestamp"));
        }
        samples.push(sample);
    }
    check_monotone(&samples)?;
    Ok(samples)
}

pub fn write_gaze_log<W: Write>(writer: W, samples: &[GazeSample]) -> Result<()> {
    write_rows(writer, samples, true)
}

/// Appends samples to a gaze log file, creating it (with header) if absent.
/// The data is synced to disk before returning.
pub fn append_gaze_log(path: &Path, samples: &[GazeSample]) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    write_rows(&mut file, samples, fresh)?;
    file.sync_data().map_err(|e| Error::io(path, e))
}

fn write_rows<W: Write>(writer: W, samples: &[GazeSample], header: bool) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    if header {
        wtr.write_record(["timestamp_ms", "x_px", "y_px", "valid"])?;
    }
    for s in samples {
        let coord = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        wtr.write_record([
            s.timestamp.to_string(),
            coord(s.x),
            coord(s.y),
            if s.valid { "1" } else { "0" }.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<gaze log>", e))?;
    Ok(())
}

pub fn load_gaze_log(path: &Path) -> Result<Vec<GazeSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_gaze_log(file, &path.display().to_string())
}

pub fn save_gaze_log(path: &Path, samples: &[GazeSample]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_gaze_log(std::io::BufWriter::new(file), samples)
}
