//! Zoom targets from gaze dispersion.
//!
//! `ρ_t = 1 − 0.3·(1 − σ_t / σ_max)` with `σ_max` taken per shot, so tight
//! attention zooms in (down to 0.7) and spread-out attention keeps the full
//! window.

use serde::Serialize;

use crate::fixation::DispersionSeries;

pub const MIN_TARGET: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoomTargets {
    pub rho: Vec<f64>,
    /// Normalizer of each frame's shot, pixels.
    pub sigma_max: Vec<f64>,
}

/// Eq-level zoom target for one frame.
pub fn zoom_target(sigma: f64, sigma_max: f64) -> f64 {
    if !(sigma_max > 0.0) {
        return 1.0;
    }
    let ratio = (sigma / sigma_max).clamp(0.0, 1.0);
    1.0 - (1.0 - MIN_TARGET) * (1.0 - ratio)
}

/// Splits `0..n` at the given segment starts (0-based, unsorted, duplicates
/// and out-of-range entries ignored).
pub fn segments(n: usize, shot_bounds: &[usize]) -> Vec<(usize, usize)> {
    let mut starts: Vec<usize> = shot_bounds.iter().copied().filter(|&c| c > 0 && c < n).collect();
    starts.sort_unstable();
    starts.dedup();
    let mut out = Vec::with_capacity(starts.len() + 1);
    let mut begin = 0;
    for s in starts {
        out.push((begin, s));
        begin = s;
    }
    if n > 0 {
        out.push((begin, n));
    }
    out
}

/// Per-shot zoom targets. `shot_bounds` are 0-based frames that start a new shot.
pub fn compute_zoom_targets(ds: &DispersionSeries, shot_bounds: &[usize]) -> ZoomTargets {
    let n = ds.sigma.len();
    let mut rho = vec![1.0; n];
    let mut sigma_max = vec![0.0; n];
    for (a, b) in segments(n, shot_bounds) {
        if b - a == 1 && a > 0 {
            rho[a] = rho[a - 1];
            sigma_max[a] = sigma_max[a - 1];
            continue;
        }
        let max = ds.sigma[a..b].iter().copied().fold(0.0, f64::max);
        for t in a..b {
            rho[t] = zoom_target(ds.sigma[t], max);
            sigma_max[t] = max;
        }
    }
    ZoomTargets { rho, sigma_max }
}

/// Debug dump `frame,sigma,rho` with 1-based frames.
pub fn zoom_csv(ds: &DispersionSeries, zt: &ZoomTargets) -> String {
    let mut out = String::from("frame,sigma,rho\n");
    for (t, (s, r)) in ds.sigma.iter().zip(&zt.rho).enumerate() {
        out.push_str(&format!("{},{},{}\n", t + 1, s, r));
    }
    out
}
