//! k-interval state replacement.
//!
//! Every k-th timestep is re-synthesized from a sampled camera-pose
//! perturbation: contactless states draw independent per-arm perturbations,
//! contact-rich states share one constraint-optimized camera-frame
//! translation. The perturbed end-effector pose is `C·T·C⁻¹·E` per arm and
//! the perturbed joints come from IK seeded at the original configuration.
//! Any failure (infeasible sampler, invalid IK, synthesis error) keeps the
//! original state with a machine-readable reason. Replaced steps store the
//! synthesized observation and the perturbed proprioceptive state while the
//! action label stays the original demonstration action, so the pair teaches
//! the return to the demonstrated trajectory.

use super::{DatasetError, Side, TimeStep, Trajectory};
use crate::contact::{ContactLabel, ContactPhase};
use crate::geometry::{compose, perturb_eef, relative_pose, Pose};
use crate::image::{Depth16Image, Mask8Image, Rgb8Image};
use crate::kinematics::{ik_lm, IkConfig, IkResult, JointVector};
use crate::rng::{derive_seed, derived_rng};
use crate::sampler::{
    sample_contact, sample_contactless, AnnealConfig, ConstraintParams, ConstraintStats,
    ContactSampleOutcome, CostWeights, Perturbation, SamplerBounds, SceneContext,
};
use crate::synth::{ImagePair, Synthesizer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Replacement interval, sampler parameters, and the run seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Replace every k-th timestep (k ≥ 1).
    pub k: usize,
    /// First replaced index; the interval counts from episode start.
    pub offset: usize,
    pub bounds: SamplerBounds,
    pub constraints: ConstraintParams,
    pub weights: CostWeights,
    pub anneal: AnnealConfig,
    pub ik: IkConfig,
    pub run_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            k: 6,
            offset: 0,
            bounds: SamplerBounds::default(),
            constraints: ConstraintParams::default(),
            weights: CostWeights::default(),
            anneal: AnnealConfig::default(),
            ik: IkConfig::default(),
            run_seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("replacement interval k must be at least 1".into());
        }
        self.bounds.validate()?;
        self.constraints.validate()?;
        Ok(())
    }
}

/// Why an attempted replacement kept the original state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeepReason {
    IkInvalid,
    SamplerInfeasible,
    SynthError,
}

/// Details of one successful replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplacedStep {
    pub perturbation: Perturbation,
    /// Synthesized wrist views (quantized to the storage format).
    pub left_image: Rgb8Image,
    pub right_image: Rgb8Image,
    /// Per-pixel validity from the synthesizer.
    pub left_valid: Mask8Image,
    pub right_valid: Mask8Image,
    /// Warped depth / gripper masks where the backend provides them.
    pub left_depth: Option<Depth16Image>,
    pub right_depth: Option<Depth16Image>,
    pub left_mask: Option<Mask8Image>,
    pub right_mask: Option<Mask8Image>,
    /// Perturbed target joints ã per arm (IK solutions).
    pub action_left: JointVector,
    pub action_right: JointVector,
    pub left_eef: Pose,
    pub right_eef: Pose,
    pub left_camera: Pose,
    pub right_camera: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOutcome {
    Replaced(Box<ReplacedStep>),
    KeptOriginal { reason: KeepReason },
}

/// One replacement attempt and how it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedStep {
    pub original_index: usize,
    pub phase: ContactPhase,
    pub outcome: AugmentOutcome,
}

impl AugmentedStep {
    pub fn replaced(&self) -> Option<&ReplacedStep> {
        match &self.outcome {
            AugmentOutcome::Replaced(r) => Some(r),
            AugmentOutcome::KeptOriginal { .. } => None,
        }
    }
}

/// Replacement bookkeeping: `replaced + kept_* == attempts`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub attempts: usize,
    pub replaced: usize,
    pub kept_ik_invalid: usize,
    pub kept_sampler_infeasible: usize,
    pub kept_synth_error: usize,
    pub constraint_stats: ConstraintStats,
}

impl AugmentReport {
    pub fn kept_total(&self) -> usize {
        self.kept_ik_invalid + self.kept_sampler_infeasible + self.kept_synth_error
    }

    pub fn merge(&mut self, other: &AugmentReport) {
        self.attempts += other.attempts;
        self.replaced += other.replaced;
        self.kept_ik_invalid += other.kept_ik_invalid;
        self.kept_sampler_infeasible += other.kept_sampler_infeasible;
        self.kept_synth_error += other.kept_synth_error;
        self.constraint_stats.merge(&other.constraint_stats);
    }
}

fn step_image_pair(step: &TimeStep) -> ImagePair {
    ImagePair {
        left: step.left.rgb.to_f64(),
        right: step.right.rgb.to_f64(),
        left_depth: step.left.depth.clone(),
        right_depth: step.right.depth.clone(),
        left_mask: step.left.mask.clone(),
        right_mask: step.right.mask.clone(),
    }
}

struct Attempt {
    index: usize,
    phase: ContactPhase,
    outcome: AugmentOutcome,
    stats: ConstraintStats,
}

fn attempt_replacement(
    traj: &Trajectory,
    index: usize,
    phase: ContactPhase,
    cfg: &AugmentConfig,
    synth: &(dyn Synthesizer + Sync),
    trajectory_id: u64,
) -> Attempt {
    let step = &traj.steps[index];
    let mut stats = ConstraintStats::default();
    let seed = derive_seed(cfg.run_seed, &[trajectory_id, index as u64]);
    let mut rng = derived_rng(cfg.run_seed, &[trajectory_id, index as u64, 1]);

    let kept = |reason: KeepReason, stats: ConstraintStats| Attempt {
        index,
        phase,
        outcome: AugmentOutcome::KeptOriginal { reason },
        stats,
    };

    // Perturbation per the contact phase.
    let perturbation = match phase {
        ContactPhase::Contactless => sample_contactless(&mut rng, &cfg.bounds),
        ContactPhase::ContactRich => {
            let ctx = SceneContext {
                left_camera: step.left.camera_pose,
                right_camera: step.right.camera_pose,
                left_eef: step.left.eef_pose,
                right_eef: step.right.eef_pose,
                left_joints: step.left.joints,
                right_joints: step.right.joints,
            };
            let (outcome, s) = sample_contact(
                &ctx,
                &cfg.bounds,
                &cfg.constraints,
                &cfg.weights,
                &traj.left_arm,
                &traj.right_arm,
                &cfg.ik,
                &cfg.anneal,
                &mut rng,
            );
            stats.merge(&s);
            match outcome {
                ContactSampleOutcome::Feasible(p) => p,
                ContactSampleOutcome::Infeasible => {
                    return kept(KeepReason::SamplerInfeasible, stats)
                }
            }
        }
    };

    // Perturbed end-effector poses and their IK action labels, seeded at the
    // original configuration to stay in the same solution branch.
    let left_eef = perturb_eef(
        &step.left.camera_pose,
        &perturbation.left,
        &step.left.eef_pose,
    );
    let right_eef = perturb_eef(
        &step.right.camera_pose,
        &perturbation.right,
        &step.right.eef_pose,
    );
    let IkResult::Valid(action_left) = ik_lm(&traj.left_arm, &left_eef, &step.left.joints, &cfg.ik)
    else {
        return kept(KeepReason::IkInvalid, stats);
    };
    let IkResult::Valid(action_right) =
        ik_lm(&traj.right_arm, &right_eef, &step.right.joints, &cfg.ik)
    else {
        return kept(KeepReason::IkInvalid, stats);
    };

    // Synthesize the perturbed wrist views for the new camera poses.
    let left_camera = compose(&step.left.camera_pose, &perturbation.left);
    let right_camera = compose(&step.right.camera_pose, &perturbation.right);
    let dp_left = relative_pose(&step.left.camera_pose, &left_camera);
    let dp_right = relative_pose(&step.right.camera_pose, &right_camera);
    let views = match synth.synthesize(
        &step_image_pair(step),
        &traj.left_intrinsics,
        &traj.right_intrinsics,
        &dp_left,
        &dp_right,
        seed,
    ) {
        Ok(v) => v,
        Err(_) => return kept(KeepReason::SynthError, stats),
    };

    Attempt {
        index,
        phase,
        outcome: AugmentOutcome::Replaced(Box::new(ReplacedStep {
            perturbation,
            left_image: views.left.to_u8(),
            right_image: views.right.to_u8(),
            left_valid: views.left_valid,
            right_valid: views.right_valid,
            left_depth: views.left_depth,
            right_depth: views.right_depth,
            left_mask: views.left_mask,
            right_mask: views.right_mask,
            action_left,
            action_right,
            left_eef,
            right_eef,
            left_camera,
            right_camera,
        })),
        stats,
    }
}

fn apply_replacement(
    step: &TimeStep,
    replaced: &ReplacedStep,
    has_depth: bool,
    has_masks: bool,
) -> TimeStep {
    let mut out = step.clone();
    let (w, h) = (step.left.rgb.width, step.left.rgb.height);
    for side in Side::BOTH {
        let (view, rgb, camera, eef, joints, depth, mask) = match side {
            Side::Left => (
                &mut out.left,
                replaced.left_image.clone(),
                replaced.left_camera,
                replaced.left_eef,
                replaced.action_left,
                replaced.left_depth.clone(),
                replaced.left_mask.clone(),
            ),
            Side::Right => (
                &mut out.right,
                replaced.right_image.clone(),
                replaced.right_camera,
                replaced.right_eef,
                replaced.action_right,
                replaced.right_depth.clone(),
                replaced.right_mask.clone(),
            ),
        };
        view.rgb = rgb;
        view.camera_pose = camera;
        view.eef_pose = eef;
        view.joints = joints;
        if has_depth {
            view.depth = Some(depth.unwrap_or_else(|| Depth16Image::new(w, h)));
        }
        if has_masks {
            view.mask = Some(mask.unwrap_or_else(|| Mask8Image::new(w, h)));
        }
    }
    // The action label stays the original demonstration action.
    out
}

/// Replaces every k-th state with its perturbed, re-synthesized counterpart.
///
/// Returns the augmented trajectory, one [`AugmentedStep`] per attempt, and
/// the tally report. Non-attempted steps pass through byte-identical. Output
/// is a pure function of (trajectory, labels, config, trajectory_id)
/// regardless of worker count.
pub fn augment_trajectory(
    traj: &Trajectory,
    labels: &ContactLabel,
    cfg: &AugmentConfig,
    synth: &(dyn Synthesizer + Sync),
    trajectory_id: u64,
) -> Result<(Trajectory, Vec<AugmentedStep>, AugmentReport), DatasetError> {
    if labels.len() != traj.len() {
        return Err(DatasetError::LabelLengthMismatch {
            labels: labels.len(),
            steps: traj.len(),
        });
    }
    cfg.validate().map_err(DatasetError::Inconsistent)?;

    let indices: Vec<usize> = (0..traj.len())
        .filter(|i| i % cfg.k == cfg.offset % cfg.k)
        .collect();

    let attempts: Vec<Attempt> = indices
        .par_iter()
        .map(|&i| attempt_replacement(traj, i, labels.labels[i], cfg, synth, trajectory_id))
        .collect();

    let mut out = traj.clone();
    out.meta.provenance = super::Provenance::Augmented;
    let mut report = AugmentReport::default();
    let mut augmented_steps = Vec::with_capacity(attempts.len());
    let has_depth = traj.has_depth();
    let has_masks = traj.has_masks();

    for attempt in attempts {
        report.attempts += 1;
        report.constraint_stats.merge(&attempt.stats);
        match &attempt.outcome {
            AugmentOutcome::Replaced(replaced) => {
                report.replaced += 1;
                out.steps[attempt.index] =
                    apply_replacement(&traj.steps[attempt.index], replaced, has_depth, has_masks);
            }
            AugmentOutcome::KeptOriginal { reason } => match reason {
                KeepReason::IkInvalid => report.kept_ik_invalid += 1,
                KeepReason::SamplerInfeasible => report.kept_sampler_infeasible += 1,
                KeepReason::SynthError => report.kept_synth_error += 1,
            },
        }
        augmented_steps.push(AugmentedStep {
            original_index: attempt.index,
            phase: attempt.phase,
            outcome: attempt.outcome,
        });
    }

    Ok((out, augmented_steps, report))
}
