//! Trajectory data model, the bit-exact on-disk dataset format, and the
//! augmentation assembly.
//!
//! A dataset is a directory holding a `manifest.json` index, two arm-model
//! documents, and one binary container per episode. Write-then-read round
//! trips are byte identical; see [`io`] for the layout.

mod augment;
mod io;

pub use augment::{
    augment_trajectory, AugmentConfig, AugmentOutcome, AugmentReport, AugmentedStep, KeepReason,
    ReplacedStep,
};
pub use io::{
    read_dataset, read_dataset_full, write_dataset, write_dataset_with_specs, DatasetSpecs,
    SCHEMA_VERSION,
};

use crate::geometry::{compose, invert, CameraIntrinsics, Pose};
use crate::image::{Depth16Image, Mask8Image, Rgb8Image};
use crate::kinematics::{ArmModel, JointVector};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("format version mismatch: found {found}, expected {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt frame {index} in episode {episode}")]
    CorruptFrame { episode: String, index: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("contact labels cover {labels} steps but trajectory has {steps}")]
    LabelLengthMismatch { labels: usize, steps: usize },
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("bad header in {0}: {1}")]
    BadHeader(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    Manifest(String),
}

/// Episode origin recorded in the manifest and preserved by [`merge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Augmented,
}

/// One arm's share of a synchronized observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmView {
    pub rgb: Rgb8Image,
    pub depth: Option<Depth16Image>,
    pub mask: Option<Mask8Image>,
    /// World-frame wrist-camera pose (camera-to-world).
    pub camera_pose: Pose,
    /// World-frame end-effector pose.
    pub eef_pose: Pose,
    pub joints: JointVector,
    /// Gripper open fraction in [0,1].
    pub gripper: f64,
}

/// One synchronized bimanual observation with per-arm action labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeStep {
    pub left: ArmView,
    pub right: ArmView,
    pub action_left: JointVector,
    pub action_right: JointVector,
}

impl TimeStep {
    pub fn view(&self, side: Side) -> &ArmView {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub task: String,
    pub seed: u64,
    pub simulated: bool,
    pub provenance: Provenance,
    /// When set, every step satisfies `camera_pose = eef_pose · hand_eye`.
    pub calibrated: bool,
}

/// An episode: ordered time steps plus the arm models and calibration they
/// were recorded with.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TimeStep>,
    pub left_arm: ArmModel,
    pub right_arm: ArmModel,
    pub left_intrinsics: CameraIntrinsics,
    pub right_intrinsics: CameraIntrinsics,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn arm(&self, side: Side) -> &ArmModel {
        match side {
            Side::Left => &self.left_arm,
            Side::Right => &self.right_arm,
        }
    }

    pub fn intrinsics(&self, side: Side) -> &CameraIntrinsics {
        match side {
            Side::Left => &self.left_intrinsics,
            Side::Right => &self.right_intrinsics,
        }
    }

    pub fn has_depth(&self) -> bool {
        self.steps
            .first()
            .map(|s| s.left.depth.is_some() && s.right.depth.is_some())
            .unwrap_or(false)
    }

    pub fn has_masks(&self) -> bool {
        self.steps
            .first()
            .map(|s| s.left.mask.is_some() && s.right.mask.is_some())
            .unwrap_or(false)
    }

    /// Structural and geometric invariant violations, empty when clean.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.steps.is_empty() {
            out.push("trajectory has zero steps".to_string());
            return out;
        }
        let w = self.steps[0].left.rgb.width;
        let h = self.steps[0].left.rgb.height;
        for (i, step) in self.steps.iter().enumerate() {
            for side in Side::BOTH {
                let view = step.view(side);
                let tag = match side {
                    Side::Left => "left",
                    Side::Right => "right",
                };
                if view.rgb.width != w || view.rgb.height != h {
                    out.push(format!("step {i} {tag}: rgb dimensions differ"));
                }
                if let Some(d) = &view.depth {
                    if d.width != w || d.height != h {
                        out.push(format!("step {i} {tag}: depth dimensions differ"));
                    }
                }
                if let Some(m) = &view.mask {
                    if m.width != w || m.height != h {
                        out.push(format!("step {i} {tag}: mask dimensions differ"));
                    }
                }
                if view.camera_pose.ortho_drift() > 1e-7 {
                    out.push(format!("step {i} {tag}: camera rotation not orthonormal"));
                }
                if view.eef_pose.ortho_drift() > 1e-7 {
                    out.push(format!("step {i} {tag}: eef rotation not orthonormal"));
                }
                if self.meta.calibrated {
                    let arm = self.arm(side);
                    let expected = compose(&view.eef_pose, &arm.hand_eye);
                    let dr = (expected.rotation - view.camera_pose.rotation)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()));
                    let dt = (expected.translation - view.camera_pose.translation)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()));
                    if dr.max(dt) > 1e-6 {
                        out.push(format!(
                            "step {i} {tag}: hand-eye inconsistency {:.2e}",
                            dr.max(dt)
                        ));
                    }
                }
                if !view.joints.is_finite() {
                    out.push(format!("step {i} {tag}: non-finite joints"));
                }
            }
            if !step.action_left.is_finite() || !step.action_right.is_finite() {
                out.push(format!("step {i}: non-finite action"));
            }
        }
        out
    }

    /// Relative camera transform `Δp = C_a⁻¹ · C_b` between two steps.
    pub fn camera_delta(&self, side: Side, a: usize, b: usize) -> Pose {
        let ca = &self.steps[a].view(side).camera_pose;
        let cb = &self.steps[b].view(side).camera_pose;
        compose(&invert(ca), cb)
    }
}

/// Concatenates two episode lists, preserving per-episode provenance.
///
/// Episode schemas (arms, intrinsics, image dimensions) must agree across
/// both inputs; nothing is deduplicated.
pub fn merge(
    original: &[Trajectory],
    augmented: &[Trajectory],
) -> Result<Vec<Trajectory>, DatasetError> {
    if let (Some(a), Some(b)) = (original.first(), augmented.first()) {
        if a.left_arm != b.left_arm || a.right_arm != b.right_arm {
            return Err(DatasetError::SchemaMismatch(
                "arm models differ between datasets".into(),
            ));
        }
        if a.left_intrinsics != b.left_intrinsics || a.right_intrinsics != b.right_intrinsics {
            return Err(DatasetError::SchemaMismatch(
                "camera intrinsics differ between datasets".into(),
            ));
        }
        let dims = |t: &Trajectory| {
            t.steps
                .first()
                .map(|s| (s.left.rgb.width, s.left.rgb.height))
        };
        if dims(a) != dims(b) {
            return Err(DatasetError::SchemaMismatch(
                "image dimensions differ between datasets".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(original.len() + augmented.len());
    out.extend_from_slice(original);
    out.extend_from_slice(augmented);
    Ok(out)
}
