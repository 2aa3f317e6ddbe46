//! Dispersion-threshold fixation detection and per-frame fixation spread.
//!
//! Fixations are found per user with a two-threshold clustering: a cluster
//! grows while each new sample stays within `t1` of the running centroid, then
//! members farther than `t2` from the final centroid are discarded and the
//! centroid recomputed. Clusters shorter than the minimum duration are dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, GazeSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationParams {
    /// Cluster growth radius, pixels.
    pub t1: f64,
    /// Member retention radius, pixels.
    pub t2: f64,
    pub min_duration_ms: f64,
}

impl FixationParams {
    /// Thresholds proportional to the frame width (4% and 2%), 200 ms minimum.
    pub fn for_width(width: u32) -> Self {
        Self {
            t1: 0.04 * width as f64,
            t2: 0.02 * width as f64,
            min_duration_ms: 200.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t2 && self.t2 > 0.0) {
            return Err(Error::validation(format!(
                "fixation thresholds need t1 > t2 > 0 (t1 = {}, t2 = {})",
                self.t1, self.t2
            )));
        }
        if !(self.min_duration_ms > 0.0) {
            return Err(Error::validation("fixation minimum duration must be positive"));
        }
        Ok(())
    }

    pub fn min_frames(&self, fps: f64) -> usize {
        ((self.min_duration_ms * fps / 1000.0 - 1e-9).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fixation {
    pub user: u32,
    /// First and last frame, 0-based inclusive.
    pub start_frame: usize,
    pub end_frame: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
}

impl Fixation {
    pub fn contains(&self, t: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&t)
    }

    pub fn duration_frames(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

fn centroid(points: &[GazeSample]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(ax, ay), s| (ax + s.x, ay + s.y));
    (sx / n, sy / n)
}

fn dist(s: &GazeSample, c: (f64, f64)) -> f64 {
    (s.x - c.0).hypot(s.y - c.1)
}

/// Fixations of one user's valid samples, given in frame order.
pub fn detect_user_fixations(track: &[GazeSample], params: &FixationParams, min_frames: usize) -> Vec<Fixation> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < track.len() {
        let mut sum = (track[i].x, track[i].y);
        let mut j = i + 1;
        while j < track.len() {
            let k = (j - i) as f64;
            if dist(&track[j], (sum.0 / k, sum.1 / k)) > params.t1 {
                break;
            }
            sum.0 += track[j].x;
            sum.1 += track[j].y;
            j += 1;
        }
        let members = &track[i..j];
        let c = centroid(members);
        let kept: Vec<GazeSample> = members.iter().filter(|s| dist(s, c) <= params.t2).copied().collect();
        if let (Some(first), Some(last)) = (kept.first(), kept.last()) {
            if last.frame - first.frame + 1 >= min_frames {
                let (cx, cy) = centroid(&kept);
                out.push(Fixation {
                    user: first.user,
                    start_frame: first.frame,
                    end_frame: last.frame,
                    centroid_x: cx,
                    centroid_y: cy,
                });
            }
        }
        i = j;
    }
    out
}

/// Fixations of every user, ordered by user then start frame.
pub fn detect_fixations(gs: &GazeSet, params: &FixationParams) -> Result<Vec<Fixation>> {
    params.validate()?;
    let min_frames = params.min_frames(gs.geometry().fps);
    let per_user: Vec<Vec<Fixation>> = gs
        .users()
        .par_iter()
        .map(|&u| detect_user_fixations(&gs.user_track(u), params, min_frames))
        .collect();
    Ok(per_user.into_iter().flatten().collect())
}

/// Which data produced a [`DispersionSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispersionSource {
    Fixations,
    /// No frame had two concurrent fixations; raw gaze spread was used.
    RawGaze,
    /// Nothing usable; spread is zero everywhere.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispersionSeries {
    /// Per-frame spread, pixels; gaps already filled from neighbours.
    pub sigma: Vec<f64>,
    /// Frames where the spread was measured rather than filled.
    pub defined: Vec<bool>,
    pub source: DispersionSource,
}

pub fn population_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Forward-fills then backward-fills undefined entries; returns false if
/// nothing was defined.
fn fill_nearest(values: &mut [f64], defined: &[bool]) -> bool {
    let Some(first) = defined.iter().position(|&d| d) else {
        return false;
    };
    let mut last = values[first];
    for (v, &d) in values.iter_mut().zip(defined).skip(first) {
        if d {
            last = *v;
        } else {
            *v = last;
        }
    }
    let head = values[first];
    values[..first].iter_mut().for_each(|v| *v = head);
    true
}

/// Per-frame population standard deviation of the x-centroids of the
/// fixations active at each frame (one per user).
pub fn dispersion_series(fixations: &[Fixation], gs: &GazeSet) -> DispersionSeries {
    let n = gs.n_frames();
    let mut active: Vec<Vec<f64>> = vec![Vec::new(); n];
    for f in fixations {
        for slot in &mut active[f.start_frame..=f.end_frame.min(n - 1)] {
            slot.push(f.centroid_x);
        }
    }
    let mut sigma = vec![0.0; n];
    let mut defined = vec![false; n];
    for t in 0..n {
        if active[t].len() >= 2 {
            sigma[t] = population_sd(&active[t]);
            defined[t] = true;
        }
    }
    if fill_nearest(&mut sigma, &defined) {
        return DispersionSeries { sigma, defined, source: DispersionSource::Fixations };
    }

    for t in 0..n {
        let xs: Vec<f64> = gs.frame_samples(t).iter().filter(|s| s.valid).map(|s| s.x).collect();
        if xs.len() >= 2 {
            sigma[t] = population_sd(&xs);
            defined[t] = true;
        }
    }
    if fill_nearest(&mut sigma, &defined) {
        tracing::warn!("no concurrent fixations; zoom uses raw gaze spread");
        return DispersionSeries { sigma, defined, source: DispersionSource::RawGaze };
    }
    tracing::warn!("gaze spread undefined everywhere; zoom targets default to the widest window");
    DispersionSeries { sigma: vec![0.0; n], defined, source: DispersionSource::Zero }
}

/// Debug dump `user,start_frame,end_frame,cx,cy` with 1-based frames.
pub fn fixations_csv(fixations: &[Fixation]) -> String {
    let mut out = String::from("user,start_frame,end_frame,cx,cy\n");
    for f in fixations {
        out.push_str(&format!(
            "{},{},{},{:.3},{:.3}\n",
            f.user,
            f.start_frame + 1,
            f.end_frame + 1,
            f.centroid_x,
            f.centroid_y
        ));
    }
    out
}
