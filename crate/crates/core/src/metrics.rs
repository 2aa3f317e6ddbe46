//! Included-gaze percentage: how much of the recorded attention the crop keeps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaze::GazeSet;
use crate::trajectory::{CropGeometry, CropRect};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GazeInclusionReport {
    pub included_pct: f64,
    /// Fraction of each frame's valid samples inside its window; `None` for
    /// frames without valid samples.
    pub per_frame_included: Vec<Option<f64>>,
    pub n_samples: usize,
}

/// A sample counts when `left ≤ x < left + width` at its frame; y is ignored.
pub fn included_gaze(gs: &GazeSet, rects: &[CropRect]) -> Result<GazeInclusionReport> {
    if rects.len() != gs.n_frames() {
        return Err(Error::validation(format!(
            "{} crop windows for {} frames",
            rects.len(),
            gs.n_frames()
        )));
    }
    let mut inside = 0usize;
    let mut total = 0usize;
    let per_frame_included = rects
        .iter()
        .enumerate()
        .map(|(t, r)| {
            let (mut hit, mut count) = (0usize, 0usize);
            for s in gs.frame_samples(t).iter().filter(|s| s.valid) {
                count += 1;
                if r.left <= s.x && s.x < r.left + r.width {
                    hit += 1;
                }
            }
            inside += hit;
            total += count;
            (count > 0).then(|| hit as f64 / count as f64)
        })
        .collect();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(GazeInclusionReport {
        included_pct: 100.0 * inside as f64 / total as f64,
        per_frame_included,
        n_samples: total,
    })
}

/// Full-zoom window fixed at the frame center.
pub fn centered_rects(geom: &CropGeometry, frames: usize) -> Vec<CropRect> {
    vec![geom.crop_rect(geom.frame_width / 2.0, 1.0); frames]
}
