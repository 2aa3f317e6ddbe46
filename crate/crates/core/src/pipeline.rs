//! End-to-end retargeting of one video.

use std::time::Instant;

use crate::config::ResolvedParams;
use crate::dp::{optimize_path, PathEstimate};
use crate::error::Result;
use crate::fixation::{detect_fixations, dispersion_series, DispersionSeries, Fixation};
use crate::gaze::GazeSet;
use crate::metrics::{centered_rects, included_gaze, GazeInclusionReport};
use crate::saliency::{build_saliency, SaliencyMatrix};
use crate::trajectory::{merge_cuts, optimize_trajectory, CropGeometry, Trajectory};
use crate::zoom::{compute_zoom_targets, ZoomTargets};

#[derive(Debug, Clone)]
pub struct RunResult {
    pub fixations: Vec<Fixation>,
    pub dispersion: DispersionSeries,
    pub saliency: SaliencyMatrix,
    pub path: PathEstimate,
    pub zoom: ZoomTargets,
    /// 0-based frames starting a shot in the source edit.
    pub original_cuts: Vec<usize>,
    pub trajectory: Trajectory,
    pub inclusion: GazeInclusionReport,
    /// Included gaze of a fixed, centered full-height window.
    pub baseline_inclusion: GazeInclusionReport,
}

fn timed<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    tracing::info!(stage, elapsed_ms = start.elapsed().as_secs_f64() * 1e3, "stage finished");
    out
}

/// Runs fixation detection, saliency, path search, zoom targets, trajectory
/// optimization and scoring. `original_cuts` are 0-based shot starts.
pub fn run_pipeline(
    gs: &GazeSet,
    original_cuts: &[usize],
    crop: &CropGeometry,
    rp: &ResolvedParams,
) -> Result<RunResult> {
    let n = gs.n_frames();
    let fixations = timed("fixation", || detect_fixations(gs, &rp.fixation))?;
    let dispersion = dispersion_series(&fixations, gs);
    let saliency = timed("saliency", || build_saliency(gs, rp.sigma))?;
    let path = timed("dp-path", || optimize_path(&saliency, &rp.dp))?;
    tracing::info!(new_cuts = path.cuts.len(), cost = path.total_cost, "rough path found");
    let zoom = compute_zoom_targets(&dispersion, &merge_cuts(original_cuts, &path.cuts));
    let trajectory = timed("trajectory-opt", || {
        optimize_trajectory(&path, original_cuts, &zoom, &rp.opt, crop, &rp.solver)
    })?;
    let (inclusion, baseline_inclusion) = timed("metrics", || {
        Ok((
            included_gaze(gs, &trajectory.crop_rects)?,
            included_gaze(gs, &centered_rects(crop, n))?,
        ))
    })?;
    Ok(RunResult {
        fixations,
        dispersion,
        saliency,
        path,
        zoom,
        original_cuts: original_cuts.to_vec(),
        trajectory,
        inclusion,
        baseline_inclusion,
    })
}
