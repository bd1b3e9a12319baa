//! On-disk dataset layout.
//!
//! ```text
//! dataset/
//!   manifest.json     index: schema version, shared specs, episode table
//!   left_arm.toml     arm model documents (key-value, exact f64 round trip)
//!   right_arm.toml
//!   ep_00000.bmag     one binary container per episode
//! ```
//!
//! Episode container, all integers and floats little endian:
//!
//! ```text
//! magic "BMAG" | version u32 | steps u32 | width u32 | height u32 | flags u32
//! per step, per arm (left then right):
//!   rgb   w·h·3 × u8
//!   depth w·h × u16 millimeters, 0 = invalid     (flags bit 0)
//!   mask  w·h × u8                               (flags bit 1)
//!   camera pose 16 × f64 (row-major homogeneous)
//!   eef pose    16 × f64
//!   joints       6 × f64
//!   gripper      1 × f64
//! then action_left 6 × f64, action_right 6 × f64
//! ```

use super::{ArmView, DatasetError, Side, TimeStep, Trajectory, TrajectoryMeta};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::image::{Depth16Image, Mask8Image, Rgb8Image};
use crate::kinematics::{ArmModel, DhRow, JointVector, DOF};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"BMAG";
const FLAG_DEPTH: u32 = 1;
const FLAG_MASKS: u32 = 1 << 1;

/// Dataset-level invariants shared by every episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpecs {
    pub left_arm: ArmModel,
    pub right_arm: ArmModel,
    pub left_intrinsics: CameraIntrinsics,
    pub right_intrinsics: CameraIntrinsics,
    pub width: u32,
    pub height: u32,
    pub has_depth: bool,
    pub has_masks: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    width: u32,
    height: u32,
    has_depth: bool,
    has_masks: bool,
    left_intrinsics: CameraIntrinsics,
    right_intrinsics: CameraIntrinsics,
    left_arm_file: String,
    right_arm_file: String,
    episodes: Vec<EpisodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeEntry {
    id: u64,
    file: String,
    steps: u32,
    #[serde(flatten)]
    meta: TrajectoryMeta,
}

/// Serde mirror of [`ArmModel`] for the TOML document.
#[derive(Debug, Serialize, Deserialize)]
struct ArmDoc {
    dh: Vec<DhRow>,
    joint_limits: Vec<[f64; 2]>,
    /// 4×4 row-major homogeneous matrix.
    base_pose: Vec<f64>,
    hand_eye: Vec<f64>,
}

fn pose_to_matrix_vec(p: &Pose) -> Vec<f64> {
    let bytes = p.to_bytes();
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn pose_from_matrix_vec(v: &[f64]) -> Result<Pose, DatasetError> {
    if v.len() != 16 {
        return Err(DatasetError::Manifest(format!(
            "pose matrix needs 16 values, got {}",
            v.len()
        )));
    }
    let mut bytes = Vec::with_capacity(128);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    Pose::from_bytes(&bytes).map_err(|e| DatasetError::Manifest(e.to_string()))
}

/// Renders an arm model as its on-disk TOML document.
pub fn arm_to_toml(arm: &ArmModel) -> String {
    let doc = ArmDoc {
        dh: arm.dh_params.to_vec(),
        joint_limits: arm.joint_limits.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        base_pose: pose_to_matrix_vec(&arm.base_pose),
        hand_eye: pose_to_matrix_vec(&arm.hand_eye),
    };
    let header = "# 6-DOF serial arm model.\n\
                  # dh: classic Denavit-Hartenberg rows (a meters, alpha radians, d meters, theta_offset radians)\n\
                  # joint_limits: per-joint [lo, hi] radians\n\
                  # base_pose / hand_eye: 4x4 row-major homogeneous matrices\n";
    format!(
        "{header}{}",
        toml::to_string(&doc).expect("arm model serializes")
    )
}

pub fn arm_from_toml(text: &str) -> Result<ArmModel, DatasetError> {
    let doc: ArmDoc = toml::from_str(text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if doc.dh.len() != DOF || doc.joint_limits.len() != DOF {
        return Err(DatasetError::Manifest(format!(
            "arm model needs {DOF} dh rows and limits, got {} and {}",
            doc.dh.len(),
            doc.joint_limits.len()
        )));
    }
    let arm = ArmModel {
        dh_params: doc.dh.as_slice().try_into().unwrap(),
        joint_limits: doc
            .joint_limits
            .iter()
            .map(|&[lo, hi]| (lo, hi))
            .collect::<Vec<_>>()
            .try_into()
            .unwrap(),
        base_pose: pose_from_matrix_vec(&doc.base_pose)?,
        hand_eye: pose_from_matrix_vec(&doc.hand_eye)?,
    };
    arm.validate().map_err(DatasetError::Manifest)?;
    Ok(arm)
}

fn specs_from_trajectory(t: &Trajectory) -> Result<DatasetSpecs, DatasetError> {
    let first = t
        .steps
        .first()
        .ok_or_else(|| DatasetError::Inconsistent("episode has zero steps".into()))?;
    Ok(DatasetSpecs {
        left_arm: t.left_arm.clone(),
        right_arm: t.right_arm.clone(),
        left_intrinsics: t.left_intrinsics,
        right_intrinsics: t.right_intrinsics,
        width: first.left.rgb.width,
        height: first.left.rgb.height,
        has_depth: t.has_depth(),
        has_masks: t.has_masks(),
    })
}

fn check_against_specs(t: &Trajectory, specs: &DatasetSpecs) -> Result<(), DatasetError> {
    if t.left_arm != specs.left_arm || t.right_arm != specs.right_arm {
        return Err(DatasetError::Inconsistent(
            "episodes carry different arm models".into(),
        ));
    }
    if t.left_intrinsics != specs.left_intrinsics || t.right_intrinsics != specs.right_intrinsics {
        return Err(DatasetError::Inconsistent(
            "episodes carry different intrinsics".into(),
        ));
    }
    for (i, step) in t.steps.iter().enumerate() {
        for side in Side::BOTH {
            let view = step.view(side);
            if view.rgb.width != specs.width || view.rgb.height != specs.height {
                return Err(DatasetError::Inconsistent(format!(
                    "step {i}: image dimensions differ from dataset specs"
                )));
            }
            if view.depth.is_some() != specs.has_depth {
                return Err(DatasetError::Inconsistent(format!(
                    "step {i}: depth presence differs from dataset specs"
                )));
            }
            if view.mask.is_some() != specs.has_masks {
                return Err(DatasetError::Inconsistent(format!(
                    "step {i}: mask presence differs from dataset specs"
                )));
            }
        }
    }
    Ok(())
}

fn push_pose(buf: &mut Vec<u8>, pose: &Pose) {
    buf.extend_from_slice(&pose.to_bytes());
}

fn push_joints(buf: &mut Vec<u8>, q: &JointVector) {
    for v in q.0 {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn encode_episode(t: &Trajectory, specs: &DatasetSpecs) -> Vec<u8> {
    let px = (specs.width * specs.height) as usize;
    let mut per_arm = px * 3 + 16 * 8 + 16 * 8 + DOF * 8 + 8;
    if specs.has_depth {
        per_arm += px * 2;
    }
    if specs.has_masks {
        per_arm += px;
    }
    let step_bytes = per_arm * 2 + DOF * 8 * 2;
    let mut buf = Vec::with_capacity(24 + step_bytes * t.steps.len());

    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    buf.extend_from_slice(&(t.steps.len() as u32).to_le_bytes());
    buf.extend_from_slice(&specs.width.to_le_bytes());
    buf.extend_from_slice(&specs.height.to_le_bytes());
    let mut flags = 0u32;
    if specs.has_depth {
        flags |= FLAG_DEPTH;
    }
    if specs.has_masks {
        flags |= FLAG_MASKS;
    }
    buf.extend_from_slice(&flags.to_le_bytes());

    for step in &t.steps {
        for side in Side::BOTH {
            let view = step.view(side);
            buf.extend_from_slice(&view.rgb.data);
            if specs.has_depth {
                for mm in &view.depth.as_ref().unwrap().data {
                    buf.extend_from_slice(&mm.to_le_bytes());
                }
            }
            if specs.has_masks {
                buf.extend_from_slice(&view.mask.as_ref().unwrap().data);
            }
            push_pose(&mut buf, &view.camera_pose);
            push_pose(&mut buf, &view.eef_pose);
            push_joints(&mut buf, &view.joints);
            buf.extend_from_slice(&view.gripper.to_le_bytes());
        }
        push_joints(&mut buf, &step.action_left);
        push_joints(&mut buf, &step.action_right);
    }
    buf
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        if end > self.data.len() {
            return None;
        }
        let out = &self.data[self.pos..end];
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn pose(&mut self) -> Option<Pose> {
        let bytes = self.take(16 * 8)?;
        Pose::from_bytes(bytes).ok()
    }

    fn joints(&mut self) -> Option<JointVector> {
        let mut q = JointVector::zeros();
        for v in q.0.iter_mut() {
            *v = self.f64()?;
        }
        Some(q)
    }
}

fn decode_episode(
    bytes: &[u8],
    specs: &DatasetSpecs,
    meta: &TrajectoryMeta,
    episode_name: &str,
    expected_steps: u32,
) -> Result<Trajectory, DatasetError> {
    let mut cur = Cursor {
        data: bytes,
        pos: 0,
    };
    let bad_header = |why: &str| DatasetError::BadHeader(episode_name.to_string(), why.to_string());

    let magic = cur.take(4).ok_or_else(|| bad_header("truncated magic"))?;
    if magic != MAGIC {
        return Err(bad_header("wrong magic bytes"));
    }
    let version = cur.u32().ok_or_else(|| bad_header("truncated version"))?;
    if version != SCHEMA_VERSION {
        return Err(DatasetError::FormatVersionMismatch {
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    let steps = cur
        .u32()
        .ok_or_else(|| bad_header("truncated step count"))?;
    let width = cur.u32().ok_or_else(|| bad_header("truncated width"))?;
    let height = cur.u32().ok_or_else(|| bad_header("truncated height"))?;
    let flags = cur.u32().ok_or_else(|| bad_header("truncated flags"))?;
    if steps != expected_steps {
        return Err(bad_header("step count disagrees with manifest"));
    }
    if width != specs.width || height != specs.height {
        return Err(bad_header("image dimensions disagree with manifest"));
    }
    let has_depth = flags & FLAG_DEPTH != 0;
    let has_masks = flags & FLAG_MASKS != 0;
    if has_depth != specs.has_depth || has_masks != specs.has_masks {
        return Err(bad_header("channel flags disagree with manifest"));
    }

    let px = (width * height) as usize;
    let corrupt = |index: usize| DatasetError::CorruptFrame {
        episode: episode_name.to_string(),
        index,
    };

    let mut out = Vec::with_capacity(steps as usize);
    for index in 0..steps as usize {
        let mut views = Vec::with_capacity(2);
        for _ in 0..2 {
            let rgb = Rgb8Image {
                width,
                height,
                data: cur.take(px * 3).ok_or_else(|| corrupt(index))?.to_vec(),
            };
            let depth = if has_depth {
                let raw = cur.take(px * 2).ok_or_else(|| corrupt(index))?;
                Some(Depth16Image {
                    width,
                    height,
                    data: raw
                        .chunks_exact(2)
                        .map(|c| u16::from_le_bytes([c[0], c[1]]))
                        .collect(),
                })
            } else {
                None
            };
            let mask = if has_masks {
                Some(Mask8Image {
                    width,
                    height,
                    data: cur.take(px).ok_or_else(|| corrupt(index))?.to_vec(),
                })
            } else {
                None
            };
            let camera_pose = cur.pose().ok_or_else(|| corrupt(index))?;
            let eef_pose = cur.pose().ok_or_else(|| corrupt(index))?;
            let joints = cur.joints().ok_or_else(|| corrupt(index))?;
            let gripper = cur.f64().ok_or_else(|| corrupt(index))?;
            views.push(ArmView {
                rgb,
                depth,
                mask,
                camera_pose,
                eef_pose,
                joints,
                gripper,
            });
        }
        let right = views.pop().unwrap();
        let left = views.pop().unwrap();
        let action_left = cur.joints().ok_or_else(|| corrupt(index))?;
        let action_right = cur.joints().ok_or_else(|| corrupt(index))?;
        out.push(TimeStep {
            left,
            right,
            action_left,
            action_right,
        });
    }
    if cur.pos != bytes.len() {
        return Err(corrupt(steps as usize));
    }

    Ok(Trajectory {
        steps: out,
        left_arm: specs.left_arm.clone(),
        right_arm: specs.right_arm.clone(),
        left_intrinsics: specs.left_intrinsics,
        right_intrinsics: specs.right_intrinsics,
        meta: meta.clone(),
    })
}

/// Writes bytes via a temp file in the same directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes a dataset directory for episodes that share `specs`.
///
/// Works for an empty episode list; the manifest then indexes zero episodes.
pub fn write_dataset_with_specs(
    specs: &DatasetSpecs,
    trajectories: &[Trajectory],
    path: &Path,
) -> Result<(), DatasetError> {
    fs::create_dir_all(path)?;
    let mut episodes = Vec::with_capacity(trajectories.len());
    for (i, t) in trajectories.iter().enumerate() {
        check_against_specs(t, specs)?;
        let file = format!("ep_{i:05}.bmag");
        let bytes = encode_episode(t, specs);
        write_atomic(&path.join(&file), &bytes)?;
        episodes.push(EpisodeEntry {
            id: i as u64,
            file,
            steps: t.steps.len() as u32,
            meta: t.meta.clone(),
        });
    }
    write_atomic(
        &path.join("left_arm.toml"),
        arm_to_toml(&specs.left_arm).as_bytes(),
    )?;
    write_atomic(
        &path.join("right_arm.toml"),
        arm_to_toml(&specs.right_arm).as_bytes(),
    )?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        width: specs.width,
        height: specs.height,
        has_depth: specs.has_depth,
        has_masks: specs.has_masks,
        left_intrinsics: specs.left_intrinsics,
        right_intrinsics: specs.right_intrinsics,
        left_arm_file: "left_arm.toml".to_string(),
        right_arm_file: "right_arm.toml".to_string(),
        episodes,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| DatasetError::Manifest(e.to_string()))?;
    write_atomic(&path.join("manifest.json"), json.as_bytes())?;
    Ok(())
}

/// Writes a dataset directory, deriving the shared specs from the first
/// episode. Fails on an empty list; use [`write_dataset_with_specs`] there.
pub fn write_dataset(trajectories: &[Trajectory], path: &Path) -> Result<(), DatasetError> {
    let first = trajectories.first().ok_or_else(|| {
        DatasetError::Inconsistent("cannot infer specs from zero episodes".into())
    })?;
    let specs = specs_from_trajectory(first)?;
    write_dataset_with_specs(&specs, trajectories, path)
}

/// Reads a dataset directory back into episodes plus the shared specs.
pub fn read_dataset_full(path: &Path) -> Result<(DatasetSpecs, Vec<Trajectory>), DatasetError> {
    let manifest_path = path.join("manifest.json");
    if !manifest_path.is_file() {
        return Err(DatasetError::MissingManifest(manifest_path));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)
        .map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::FormatVersionMismatch {
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let left_arm = arm_from_toml(&fs::read_to_string(path.join(&manifest.left_arm_file))?)?;
    let right_arm = arm_from_toml(&fs::read_to_string(path.join(&manifest.right_arm_file))?)?;
    let specs = DatasetSpecs {
        left_arm,
        right_arm,
        left_intrinsics: manifest.left_intrinsics,
        right_intrinsics: manifest.right_intrinsics,
        width: manifest.width,
        height: manifest.height,
        has_depth: manifest.has_depth,
        has_masks: manifest.has_masks,
    };
    let mut out = Vec::with_capacity(manifest.episodes.len());
    for entry in &manifest.episodes {
        let bytes = fs::read(path.join(&entry.file))?;
        out.push(decode_episode(
            &bytes,
            &specs,
            &entry.meta,
            &entry.file,
            entry.steps,
        )?);
    }
    Ok((specs, out))
}

/// Reads a dataset directory back into its episode list.
pub fn read_dataset(path: &Path) -> Result<Vec<Trajectory>, DatasetError> {
    read_dataset_full(path).map(|(_, trajs)| trajs)
}
