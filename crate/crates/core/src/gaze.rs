//! Multi-user gaze recordings.
//!
//! Frames are 0-based inside the library. Files use 1-based frame numbers
//! (`user,frame,x,y`) or timestamps in seconds (`user,time_s,x,y`), which map
//! to frame `floor(time_s · fps) + 1`.

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size and timing of the source video.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frames: usize,
}

impl FrameGeometry {
    pub fn new(width: u32, height: u32, fps: f64, frames: usize) -> Result<Self> {
        let g = Self { width, height, fps, frames };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("frame width and height must be positive"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frames == 0 {
            return Err(Error::validation("frame count must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..self.width as f64).contains(&x) && (0.0..self.height as f64).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub user: u32,
    /// 0-based frame index.
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

/// Immutable, frame-indexed collection of gaze samples with at most one sample
/// per `(user, frame)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSet {
    geometry: FrameGeometry,
    /// Sorted by `(frame, user)`.
    samples: Vec<GazeSample>,
    /// `samples[frame_start[t]..frame_start[t + 1]]` belong to frame `t`.
    frame_start: Vec<usize>,
    users: Vec<u32>,
}

/// Summary of records dropped or invalidated while loading.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    /// Records discarded (frame outside `1..=N`, duplicate user/frame pair).
    pub rejected: usize,
    /// Samples kept but marked invalid (missing or outside the frame).
    pub invalidated: usize,
    /// First few warning messages, for display.
    pub warnings: Vec<String>,
}

const MAX_WARNING_MESSAGES: usize = 20;

impl LoadReport {
    fn warn(&mut self, msg: String) {
        if self.warnings.len() < MAX_WARNING_MESSAGES {
            self.warnings.push(msg);
        }
    }

    pub fn warning_count(&self) -> usize {
        self.rejected + self.invalidated
    }
}

impl GazeSet {
    /// Builds a set from samples. Samples must be unique per `(user, frame)`
    /// and have frames below `geometry.frames`.
    pub fn from_samples(mut samples: Vec<GazeSample>, geometry: FrameGeometry) -> Result<Self> {
        geometry.validate()?;
        samples.sort_by_key(|s| (s.frame, s.user));
        for pair in samples.windows(2) {
            if pair[0].frame == pair[1].frame && pair[0].user == pair[1].user {
                return Err(Error::validation(format!(
                    "duplicate sample for user {} at frame {}",
                    pair[0].user,
                    pair[0].frame + 1
                )));
            }
        }
        if let Some(s) = samples.iter().find(|s| s.frame >= geometry.frames) {
            return Err(Error::Index { what: "frame", index: s.frame, len: geometry.frames });
        }
        for s in &mut samples {
            s.valid = s.valid && geometry.contains(s.x, s.y);
        }
        if !samples.iter().any(|s| s.valid) {
            return Err(Error::EmptyInput);
        }
        let mut frame_start = vec![0usize; geometry.frames + 1];
        for s in &samples {
            frame_start[s.frame + 1] += 1;
        }
        for t in 0..geometry.frames {
            frame_start[t + 1] += frame_start[t];
        }
        let users: Vec<u32> = samples.iter().map(|s| s.user).collect::<BTreeSet<_>>().into_iter().collect();
        Ok(Self { geometry, samples, frame_start, users })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn n_frames(&self) -> usize {
        self.geometry.frames
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[u32] {
        &self.users
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.valid).count()
    }

    /// All samples of frame `t`, ordered by user.
    pub fn frame_samples(&self, t: usize) -> &[GazeSample] {
        &self.samples[self.frame_start[t]..self.frame_start[t + 1]]
    }

    /// x-positions of the valid samples at frame `t`, ordered by user.
    pub fn column(&self, t: usize) -> Result<Vec<f64>> {
        if t >= self.n_frames() {
            return Err(Error::Index { what: "frame", index: t, len: self.n_frames() });
        }
        Ok(self.frame_samples(t).iter().filter(|s| s.valid).map(|s| s.x).collect())
    }

    /// Valid samples of one user in frame order.
    pub fn user_track(&self, user: u32) -> Vec<GazeSample> {
        self.samples.iter().filter(|s| s.user == user && s.valid).copied().collect()
    }

    /// Serializes as `user,frame,x,y` CSV with 1-based frames. Values are
    /// written in shortest round-trip form, so reloading is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 24);
        out.push_str("user,frame,x,y\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", s.user, s.frame + 1, s.x, s.y));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Stamp {
    Frame(i64),
    Seconds(f64),
}

struct RawRecord {
    line: u64,
    user: u32,
    stamp: Stamp,
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonStamp {
    Frame { frame: i64 },
    Seconds { time_s: f64 },
}

#[derive(Deserialize)]
struct JsonRecord {
    user: u32,
    #[serde(flatten)]
    stamp: JsonStamp,
    x: Option<f64>,
    y: Option<f64>,
}

/// Parses a gaze recording (CSV, or JSON when the first non-blank byte is `[`).
pub fn load_gaze<R: Read>(mut source: R, geometry: FrameGeometry) -> Result<(GazeSet, LoadReport)> {
    geometry.validate()?;
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let is_json = bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'[');
    let raw = if is_json { parse_json(&bytes)? } else { parse_csv(&bytes)? };
    assemble(raw, geometry)
}

fn parse_coord(field: &str) -> std::result::Result<f64, String> {
    if field.is_empty() {
        return Ok(f64::NAN);
    }
    field.parse::<f64>().map_err(|e| format!("bad coordinate {field:?}: {e}"))
}

fn parse_csv(bytes: &[u8]) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let csv_err = |e: csv::Error| Error::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let seconds = match names.as_slice() {
        ["user", "frame", "x", "y"] => false,
        ["user", "time_s", "x", "y"] => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header user,frame,x,y or user,time_s,x,y, got {}", names.join(",")),
            })
        }
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse { line, message };
        let user = rec[0].parse::<u32>().map_err(|e| bad(format!("bad user id {:?}: {e}", &rec[0])))?;
        let stamp = if seconds {
            Stamp::Seconds(rec[1].parse::<f64>().map_err(|e| bad(format!("bad time {:?}: {e}", &rec[1])))?)
        } else {
            Stamp::Frame(rec[1].parse::<i64>().map_err(|e| bad(format!("bad frame {:?}: {e}", &rec[1])))?)
        };
        let x = parse_coord(&rec[2]).map_err(bad)?;
        let y = parse_coord(&rec[3]).map_err(bad)?;
        out.push(RawRecord { line, user, stamp, x, y });
    }
    Ok(out)
}

fn parse_json(bytes: &[u8]) -> Result<Vec<RawRecord>> {
    let recs: Vec<JsonRecord> = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    Ok(recs
        .into_iter()
        .enumerate()
        .map(|(i, r)| RawRecord {
            line: i as u64 + 1,
            user: r.user,
            stamp: match r.stamp {
                JsonStamp::Frame { frame } => Stamp::Frame(frame),
                JsonStamp::Seconds { time_s } => Stamp::Seconds(time_s),
            },
            x: r.x.unwrap_or(f64::NAN),
            y: r.y.unwrap_or(f64::NAN),
        })
        .collect())
}

fn assemble(raw: Vec<RawRecord>, geometry: FrameGeometry) -> Result<(GazeSet, LoadReport)> {
    let mut report = LoadReport { records: raw.len(), ..Default::default() };
    let mut seen = BTreeSet::new();
    let mut samples = Vec::with_capacity(raw.len());
    for r in raw {
        let frame = match r.stamp {
            Stamp::Frame(f) => f,
            Stamp::Seconds(s) if s.is_finite() => (s * geometry.fps).floor() as i64 + 1,
            Stamp::Seconds(_) => 0,
        };
        if frame < 1 || frame as usize > geometry.frames {
            report.rejected += 1;
            report.warn(format!("record {}: frame {frame} outside 1..={}", r.line, geometry.frames));
            continue;
        }
        let frame = frame as usize - 1;
        if !seen.insert((r.user, frame)) {
            report.rejected += 1;
            report.warn(format!("record {}: duplicate sample for user {} at frame {}", r.line, r.user, frame + 1));
            continue;
        }
        let valid = geometry.contains(r.x, r.y);
        if !valid {
            report.invalidated += 1;
            report.warn(format!("record {}: gaze ({}, {}) outside the frame", r.line, r.x, r.y));
        }
        samples.push(GazeSample { user: r.user, frame, x: r.x, y: r.y, valid });
    }
    if report.warning_count() > 0 {
        tracing::warn!(
            rejected = report.rejected,
            invalidated = report.invalidated,
            "gaze input had problem records"
        );
    }
    let set = GazeSet::from_samples(samples, geometry)?;
    Ok((set, report))
}
