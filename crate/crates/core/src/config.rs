//! Run configuration (TOML) and parameter defaults.
//!
//! ```toml
//! gaze = "gaze.csv"
//! output_dir = "out"
//! aspect = "4:3"
//!
//! [geometry]
//! width = 1366
//! height = 768
//! fps = 25
//! frames = 9000
//!
//! [params]
//! lambda1 = 5000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dp::DpParams;
use crate::error::{Error, Result};
use crate::fixation::FixationParams;
use crate::gaze::FrameGeometry;
use crate::qp::SolverSettings;
use crate::trajectory::{CropGeometry, OptParams};

/// Tunable parameters. Unset optional values derive from the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// λ: weight of the stage-one transition cost.
    pub lambda: f64,
    /// σ: saliency blur, pixels.
    pub sigma: f64,
    /// D: cut rhythm, frames.
    pub cut_rhythm: f64,
    /// W: jump-cut width in pixels; default 0.75·W_r.
    pub jump_width: Option<f64>,
    /// λ1, λ2, λ3: L1 weights on the x differences.
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// L1 weights on the zoom differences; default to λ1..λ3.
    pub zoom_lambda1: Option<f64>,
    pub zoom_lambda2: Option<f64>,
    pub zoom_lambda3: Option<f64>,
    /// τ: deadzone in pixels; default 0.1·W_r.
    pub tau: Option<f64>,
    /// p: cut relaxation half-width, frames.
    pub p: usize,
    /// Response delay, frames.
    pub delay: usize,
    pub z_min: f64,
    /// Minimum time to pan across the whole frame, seconds.
    pub pan_seconds: f64,
    /// Explicit pan speed limit in pixels/frame; overrides `pan_seconds`.
    pub pan_speed_max: Option<f64>,
    pub state_stride: usize,
    pub exact_d: bool,
    /// Fixation thresholds in pixels; default 4% and 2% of W_o.
    pub fixation_t1: Option<f64>,
    pub fixation_t2: Option<f64>,
    pub fixation_ms: f64,
    pub eps_abs: f64,
    pub max_iters: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            sigma: 15.0,
            cut_rhythm: 200.0,
            jump_width: None,
            lambda1: 5000.0,
            lambda2: 500.0,
            lambda3: 3000.0,
            zoom_lambda1: None,
            zoom_lambda2: None,
            zoom_lambda3: None,
            tau: None,
            p: 5,
            delay: 10,
            z_min: 0.7,
            pan_seconds: 5.0,
            pan_speed_max: None,
            state_stride: 4,
            exact_d: false,
            fixation_t1: None,
            fixation_t2: None,
            fixation_ms: 200.0,
            eps_abs: 1e-6,
            max_iters: 20_000,
        }
    }
}

/// Per-stage parameters with every default filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub fixation: FixationParams,
    pub sigma: f64,
    pub dp: DpParams,
    pub opt: OptParams,
    pub solver: SolverSettings,
}

impl Params {
    pub fn resolve(&self, frame: &FrameGeometry, crop: &CropGeometry) -> Result<ResolvedParams> {
        let wr = crop.target_width;
        let defaults = FixationParams::for_width(frame.width);
        let fixation = FixationParams {
            t1: self.fixation_t1.unwrap_or(defaults.t1),
            t2: self.fixation_t2.unwrap_or(defaults.t2),
            min_duration_ms: self.fixation_ms,
        };
        fixation.validate()?;
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::validation(format!("sigma must be positive, got {}", self.sigma)));
        }
        let dp = DpParams {
            lambda: self.lambda,
            jump_width: self.jump_width.unwrap_or(0.75 * wr),
            cut_rhythm: self.cut_rhythm,
            state_stride: self.state_stride,
            exact_d: self.exact_d,
        };
        dp.validate(frame.width as usize)?;
        if !(self.pan_seconds > 0.0) {
            return Err(Error::validation("pan_seconds must be positive"));
        }
        let lambda = [self.lambda1, self.lambda2, self.lambda3];
        let opt = OptParams {
            lambda,
            zoom_lambda: [
                self.zoom_lambda1.unwrap_or(lambda[0]),
                self.zoom_lambda2.unwrap_or(lambda[1]),
                self.zoom_lambda3.unwrap_or(lambda[2]),
            ],
            tau: self.tau.unwrap_or(0.1 * wr),
            pan_speed_max: self
                .pan_speed_max
                .unwrap_or(frame.width as f64 / (self.pan_seconds * frame.fps)),
            p: self.p,
            delay: self.delay,
            z_min: self.z_min,
        };
        opt.validate()?;
        if !(self.eps_abs > 0.0) || self.max_iters == 0 {
            return Err(Error::validation("solver tolerance and iteration limit must be positive"));
        }
        Ok(ResolvedParams {
            fixation,
            sigma: self.sigma,
            dp,
            opt,
            solver: SolverSettings { eps_abs: self.eps_abs, max_iters: self.max_iters, record_trace: false },
        })
    }
}

/// Parses `"4:3"`, `"16/9"` or `"1.25"` into width / height.
pub fn parse_aspect(text: &str) -> Result<f64> {
    let bad = || Error::validation(format!("cannot parse aspect ratio {text:?}"));
    let t = text.trim();
    let value = match t.split_once([':', '/']) {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            a / b
        }
        None => t.parse().map_err(|_| bad())?,
    };
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputFlags {
    pub plot: bool,
    pub script: bool,
    pub debug: bool,
}

impl Default for OutputFlags {
    fn default() -> Self {
        Self { plot: true, script: true, debug: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gaze: PathBuf,
    /// Frame list of original cuts (1-based).
    #[serde(default)]
    pub cuts: Option<PathBuf>,
    /// Per-frame luminance histograms for the fallback cut detector, used
    /// when no cut list is given.
    #[serde(default)]
    pub histograms: Option<PathBuf>,
    #[serde(default = "default_cut_threshold")]
    pub cut_threshold: f64,
    pub output_dir: PathBuf,
    pub aspect: String,
    pub geometry: FrameGeometry,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputFlags,
}

fn default_cut_threshold() -> f64 {
    crate::cuts::DEFAULT_CUT_THRESHOLD
}

impl RunConfig {
    /// Parses a config; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        fix(&mut cfg.gaze);
        fix(&mut cfg.output_dir);
        cfg.cuts.as_mut().map(fix);
        cfg.histograms.as_mut().map(fix);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn crop_geometry(&self) -> Result<CropGeometry> {
        CropGeometry::from_aspect(&self.geometry, parse_aspect(&self.aspect)?)
    }

    /// Checks everything that can be checked without reading inputs.
    pub fn validate(&self) -> Result<ResolvedParams> {
        self.geometry.validate()?;
        let crop = self.crop_geometry()?;
        if !(self.cut_threshold > 0.0 && self.cut_threshold <= 1.0) {
            return Err(Error::validation("cut_threshold must lie in (0, 1]"));
        }
        self.params.resolve(&self.geometry, &crop)
    }
}
