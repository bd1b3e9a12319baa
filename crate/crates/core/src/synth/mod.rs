//! View synthesis behind a single pluggable interface.
//!
//! Two backends implement [`Synthesizer`]: a deterministic depth-reprojection
//! warp (the verifiable default) and a small pose-conditioned diffusion
//! denoiser trained on the dataset being augmented. The augmentation pipeline
//! is oblivious to which backend produced an image.

mod denoiser;
mod encoder;
mod reproject;
mod schedule;

pub use denoiser::{
    loss, loss_and_gradient, loss_curve_csv, synthesize_diffusion, train, DenoiseBatch,
    DenoiseSample, DenoiserConfig, DenoiserModel, DiffusionSynthesizer, TrainConfig,
};
pub use encoder::PatchEncoder;
pub use reproject::{warp_pixel, ReprojectionSynthesizer};
pub use schedule::{forward_diffuse, NoiseSchedule};

use crate::geometry::{CameraIntrinsics, Pose};
use crate::image::{Depth16Image, Mask8Image, RgbImageF};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("depth images required for reprojection but absent")]
    MissingDepth,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("trajectory of length {len} is shorter than max gap + 1 = {required}")]
    InsufficientLength { len: usize, required: usize },
    #[error("invalid model encoding: {0}")]
    InvalidEncoding(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Synchronized left/right wrist views with optional depth and gripper masks.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pub left: RgbImageF,
    pub right: RgbImageF,
    pub left_depth: Option<Depth16Image>,
    pub right_depth: Option<Depth16Image>,
    pub left_mask: Option<Mask8Image>,
    pub right_mask: Option<Mask8Image>,
}

impl ImagePair {
    pub fn from_rgb(left: RgbImageF, right: RgbImageF) -> Self {
        Self {
            left,
            right,
            left_depth: None,
            right_depth: None,
            left_mask: None,
            right_mask: None,
        }
    }
}

/// Synthesized views plus per-pixel validity; reprojection additionally
/// carries warped depth and gripper masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedViews {
    pub left: RgbImageF,
    pub right: RgbImageF,
    pub left_valid: Mask8Image,
    pub right_valid: Mask8Image,
    pub left_depth: Option<Depth16Image>,
    pub right_depth: Option<Depth16Image>,
    pub left_mask: Option<Mask8Image>,
    pub right_mask: Option<Mask8Image>,
}

/// Common surface of the reprojection and diffusion backends.
///
/// `dp_left` / `dp_right` are relative camera transforms from the source to
/// the target view (`Δp = C_src⁻¹ · C_tgt`). `seed` feeds stochastic
/// backends; deterministic backends ignore it. Identical inputs produce
/// identical outputs.
pub trait Synthesizer {
    fn synthesize(
        &self,
        src: &ImagePair,
        left_k: &CameraIntrinsics,
        right_k: &CameraIntrinsics,
        dp_left: &Pose,
        dp_right: &Pose,
        seed: u64,
    ) -> Result<SynthesizedViews, SynthError>;
}
