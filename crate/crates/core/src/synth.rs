//! Synthetic gaze in three regimes: fixation, pursuit and saccade.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{FrameGeometry, GazeSample, GazeSet};

pub const DEFAULT_NOISE_SD: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// Everyone looks at `anchor_x`.
    Fixation { anchor_x: f64 },
    /// Gaze drifts from `start_x` by `velocity` pixels per frame.
    Pursuit { start_x: f64, velocity: f64 },
    /// Gaze sits at `anchor_x`, then at `anchor_x + jump` from `jump_frame` (0-based) on.
    Saccade { anchor_x: f64, jump_frame: usize, jump: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(flatten)]
    pub regime: Regime,
    pub users: u32,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frames: usize,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
}

fn default_noise() -> f64 {
    DEFAULT_NOISE_SD
}

impl SynthSpec {
    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.width, self.height, self.fps, self.frames)
    }

    /// Noise-free gaze position at frame `t`.
    pub fn mean_x(&self, t: usize) -> f64 {
        match self.regime {
            Regime::Fixation { anchor_x } => anchor_x,
            Regime::Pursuit { start_x, velocity } => start_x + velocity * t as f64,
            Regime::Saccade { anchor_x, jump_frame, jump } => {
                if t < jump_frame {
                    anchor_x
                } else {
                    anchor_x + jump
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.users == 0 {
            return Err(Error::validation("synthetic spec needs at least one user"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::validation(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        let w = self.width as f64;
        let in_frame = |x: f64| (0.0..w).contains(&x);
        let ok = match self.regime {
            Regime::Saccade { jump_frame, .. } if jump_frame == 0 || jump_frame >= self.frames => false,
            _ => in_frame(self.mean_x(0)) && in_frame(self.mean_x(self.frames - 1)),
        };
        if !ok {
            return Err(Error::validation("synthetic regime leaves the frame"));
        }
        Ok(())
    }
}

/// One sample per user and frame: the regime's mean position plus
/// independent Gaussian noise on x and y, with y centered vertically.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<GazeSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::validation(e.to_string()))?;
    let cy = spec.height as f64 / 2.0;
    let mut samples = Vec::with_capacity(spec.frames * spec.users as usize);
    for t in 0..spec.frames {
        let mx = spec.mean_x(t);
        for user in 0..spec.users {
            samples.push(GazeSample {
                user,
                frame: t,
                x: mx + noise.sample(&mut rng),
                y: cy + noise.sample(&mut rng),
                valid: true,
            });
        }
    }
    GazeSet::from_samples(samples, spec.geometry()?)
}
