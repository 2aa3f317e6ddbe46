//! Gaze saliency matrix.
//!
//! Every valid sample deposits `-1` at its rounded x-position in its frame's
//! column; each column is then convolved with a normalized Gaussian truncated
//! at ±4σ. Kernel mass falling outside the frame is dropped. Low values mark
//! the positions most users look at.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaze::GazeSet;

/// Unit-sum Gaussian kernel sampled on `-radius..=radius`, `radius = ⌈4σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|j| (-(j * j) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// `width × frames` matrix stored frame-contiguous: column `t` is
/// `values[t * width..(t + 1) * width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMatrix {
    width: usize,
    frames: usize,
    values: Vec<f64>,
    sigma_px: f64,
}

impl SaliencyMatrix {
    /// Wraps precomputed frame-contiguous values (used by tests and tools).
    pub fn from_columns(width: usize, frames: usize, values: Vec<f64>, sigma_px: f64) -> Result<Self> {
        if width == 0 || frames == 0 || values.len() != width * frames {
            return Err(Error::validation(format!(
                "saliency matrix {width}x{frames} needs {} values, got {}",
                width * frames,
                values.len()
            )));
        }
        Ok(Self { width, frames, values, sigma_px })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn sigma_px(&self) -> f64 {
        self.sigma_px
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.values[t * self.width..(t + 1) * self.width]
    }

    /// Unary cost of placing the window center at pixel `x` in frame `t`.
    pub fn unary_cost(&self, x: usize, t: usize) -> Result<f64> {
        if x >= self.width {
            return Err(Error::Index { what: "x-position", index: x, len: self.width });
        }
        if t >= self.frames {
            return Err(Error::Index { what: "frame", index: t, len: self.frames });
        }
        Ok(self.values[t * self.width + x])
    }

    #[inline]
    pub fn get(&self, x: usize, t: usize) -> f64 {
        self.values[t * self.width + x]
    }

    /// Binary PGM heat map, time on the horizontal axis and x downwards.
    /// Frames are subsampled to at most `max_columns` columns.
    pub fn to_pgm(&self, max_columns: usize) -> Vec<u8> {
        let step = self.frames.div_ceil(max_columns.max(1)).max(1);
        let cols: Vec<usize> = (0..self.frames).step_by(step).collect();
        let min = self.values.iter().copied().fold(0.0, f64::min);
        let mut out = format!("P5\n{} {}\n255\n", cols.len(), self.width).into_bytes();
        for x in 0..self.width {
            for &t in &cols {
                let v = if min < 0.0 { self.get(x, t) / min } else { 0.0 };
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}

/// Builds the saliency matrix of `gs` with Gaussian standard deviation `sigma_px`.
pub fn build_saliency(gs: &GazeSet, sigma_px: f64) -> Result<SaliencyMatrix> {
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return Err(Error::validation(format!("saliency sigma must be positive, got {sigma_px}")));
    }
    let width = gs.geometry().width as usize;
    let frames = gs.n_frames();
    let kernel = gaussian_kernel(sigma_px);
    let radius = (kernel.len() / 2) as i64;
    let mut values = vec![0.0; width * frames];
    values.par_chunks_mut(width).enumerate().for_each(|(t, col)| {
        let mut impulses: Vec<(usize, f64)> = Vec::new();
        for s in gs.frame_samples(t).iter().filter(|s| s.valid) {
            let x = (s.x.round() as usize).min(width - 1);
            match impulses.iter_mut().find(|(p, _)| *p == x) {
                Some((_, w)) => *w -= 1.0,
                None => impulses.push((x, -1.0)),
            }
        }
        impulses.sort_by_key(|&(p, _)| p);
        for (p, w) in impulses {
            let lo = (p as i64 - radius).max(0) as usize;
            let hi = ((p as i64 + radius) as usize).min(width - 1);
            for (x, v) in col.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *v += w * kernel[(x as i64 - p as i64 + radius) as usize];
            }
        }
    });
    Ok(SaliencyMatrix { width, frames, values, sigma_px })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{FrameGeometry, GazeSample};

    fn set(width: u32, frames: usize, pts: &[(usize, f64)]) -> GazeSet {
        let samples = pts
            .iter()
            .enumerate()
            .map(|(i, &(frame, x))| GazeSample { user: i as u32, frame, x, y: 1.0, valid: true })
            .collect();
        GazeSet::from_samples(samples, FrameGeometry::new(width, 10, 25.0, frames).unwrap()).unwrap()
    }

    fn argmin(col: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in col.iter().enumerate() {
            if v < col[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn single_sample_peak() {
        let sm = build_saliency(&set(300, 2, &[(0, 100.0)]), 15.0).unwrap();
        let col = sm.column(0);
        assert_eq!(argmin(col), 100);
        let kernel = gaussian_kernel(15.0);
        assert_eq!(col[100], -kernel[kernel.len() / 2]);
        // empty frame
        assert!(sm.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(sm.unary_cost(7, 1).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_pair_minimum_between() {
        let sm = build_saliency(&set(300, 1, &[(0, 100.0), (0, 110.0)]), 15.0).unwrap();
        assert_eq!(argmin(sm.column(0)), 105);
    }

    #[test]
    fn three_sigma_ratio() {
        let sm = build_saliency(&set(300, 1, &[(0, 100.0)]), 15.0).unwrap();
        let ratio = sm.unary_cost(145, 0).unwrap() / sm.unary_cost(100, 0).unwrap();
        assert!((ratio - (-4.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn mass_is_conserved_away_from_edges() {
        let sm = build_saliency(&set(400, 1, &[(0, 100.0), (0, 200.5), (0, 300.0)]), 15.0).unwrap();
        let total: f64 = sm.column(0).iter().sum();
        assert!((total + 3.0).abs() < 1e-6);
    }

    #[test]
    fn edge_mass_is_dropped() {
        let sm = build_saliency(&set(400, 1, &[(0, 0.0)]), 15.0).unwrap();
        let total: f64 = sm.column(0).iter().sum();
        assert!(total > -0.6 && total < -0.5);
    }

    #[test]
    fn index_errors() {
        let sm = build_saliency(&set(50, 1, &[(0, 10.0)]), 2.0).unwrap();
        assert!(sm.unary_cost(50, 0).is_err());
        assert!(sm.unary_cost(0, 1).is_err());
        assert!(build_saliency(&set(50, 1, &[(0, 10.0)]), 0.0).is_err());
    }

    #[test]
    fn pgm_header() {
        let sm = build_saliency(&set(50, 4, &[(0, 10.0)]), 2.0).unwrap();
        let pgm = sm.to_pgm(2);
        assert!(pgm.starts_with(b"P5\n2 50\n255\n"));
        assert_eq!(pgm.len(), b"P5\n2 50\n255\n".len() + 100);
    }
}
