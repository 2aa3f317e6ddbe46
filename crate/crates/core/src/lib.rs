pub mod config;
pub mod cuts;
pub mod dp;
pub mod error;
pub mod export;
pub mod fixation;
pub mod gaze;
pub mod metrics;
pub mod pipeline;
pub mod qp;
pub mod saliency;
pub mod synth;
pub mod trajectory;
pub mod zoom;

pub use error::{Error, Result};
