//! Forward kinematics for 6-DOF serial arms and a Levenberg-Marquardt
//! inverse-kinematics solver.
//!
//! Arms are described by classic Denavit-Hartenberg rows chained from a world
//! base pose. The IK solver doubles as the feasibility oracle for perturbation
//! sampling and as the action labeler: non-convergence, joint-limit violation,
//! and branch jumps are all reported as the `Invalid` value, never as errors.

use crate::geometry::{compose, rotation_log, Pose};
use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

pub const DOF: usize = 6;

/// One classic DH row: link length `a` (m), twist `alpha` (rad), offset `d`
/// (m), and a constant joint-angle offset (rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

/// Six joint angles in radians for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointVector(pub [f64; DOF]);

impl JointVector {
    pub fn zeros() -> Self {
        Self([0.0; DOF])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|q| q.is_finite())
    }

    /// Largest per-joint absolute difference.
    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Kinematic model of one 6-DOF arm plus its wrist-camera hand-eye transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub dh_params: [DhRow; DOF],
    /// Per-joint (lo, hi) limits in radians, lo < hi.
    pub joint_limits: [(f64, f64); DOF],
    /// World-frame pose of the arm base.
    pub base_pose: Pose,
    /// Wrist-camera pose in the end-effector frame: `C = E · hand_eye`.
    pub hand_eye: Pose,
}

impl ArmModel {
    pub fn validate(&self) -> Result<(), String> {
        for (i, (lo, hi)) in self.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(format!("joint {i} limits are not ordered: [{lo}, {hi}]"));
            }
        }
        if self.hand_eye.ortho_drift() > 1e-9 {
            return Err("hand_eye rotation is not orthonormal".into());
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &JointVector) -> bool {
        q.0.iter()
            .zip(self.joint_limits.iter())
            .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Wrist-camera world pose for a configuration.
    pub fn camera_pose(&self, q: &JointVector) -> Pose {
        compose(&fk(self, q), &self.hand_eye)
    }
}

/// Homogeneous transform of one DH row at joint angle `theta`.
fn dh_transform(row: &DhRow, theta: f64) -> Pose {
    let th = theta + row.theta_offset;
    let (st, ct) = th.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    // RotZ(th) · TransZ(d) · TransX(a) · RotX(alpha)
    let rotation = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
    let translation = Vector3::new(row.a * ct, row.a * st, row.d);
    Pose::new(rotation, translation)
}

/// World-frame end-effector pose by chaining DH transforms from the base.
pub fn fk(arm: &ArmModel, q: &JointVector) -> Pose {
    let mut t = arm.base_pose;
    for (row, &theta) in arm.dh_params.iter().zip(q.0.iter()) {
        t = compose(&t, &dh_transform(row, theta));
    }
    t
}

/// Joint frames needed for the geometric Jacobian: per-joint origin and
/// z-axis in the world frame, plus the end-effector pose.
fn joint_frames(
    arm: &ArmModel,
    q: &JointVector,
) -> ([Vector3<f64>; DOF], [Vector3<f64>; DOF], Pose) {
    let mut origins = [Vector3::zeros(); DOF];
    let mut axes = [Vector3::zeros(); DOF];
    let mut t = arm.base_pose;
    for i in 0..DOF {
        origins[i] = t.translation;
        axes[i] = t.rotation.column(2).into();
        t = compose(&t, &dh_transform(&arm.dh_params[i], q.0[i]));
    }
    (origins, axes, t)
}

/// Tolerances and iteration budget for [`ik_lm`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct IkConfig {
    /// Position tolerance in meters.
    pub pos_tol: f64,
    /// Orientation tolerance in radians (geodesic angle).
    pub rot_tol: f64,
    pub max_iterations: usize,
    /// Initial Levenberg-Marquardt damping.
    pub initial_damping: f64,
    /// Solutions farther than this from the seed in any joint are rejected
    /// as branch jumps.
    pub max_seed_distance: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            pos_tol: 1e-6,
            rot_tol: 1e-6,
            max_iterations: 200,
            initial_damping: 1e-3,
            max_seed_distance: 1.0,
        }
    }
}

/// Why an IK solve was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IkFailure {
    NotConverged,
    LimitViolation,
    BranchJump,
}

/// IK outcome: a valid in-limit configuration or the `Invalid` value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IkResult {
    Valid(JointVector),
    Invalid(IkFailure),
}

impl IkResult {
    pub fn valid(&self) -> Option<JointVector> {
        match self {
            IkResult::Valid(q) => Some(*q),
            IkResult::Invalid(_) => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, IkResult::Valid(_))
    }
}

/// 6-D pose error: stacked position difference and orientation log-map of
/// `R_target · R_currentᵀ`, both in the world frame.
fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dr = rotation_log(&(target.rotation * current.rotation.transpose()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

fn error_within(e: &Vector6<f64>, cfg: &IkConfig) -> bool {
    let pos = Vector3::new(e[0], e[1], e[2]).norm();
    let rot = Vector3::new(e[3], e[4], e[5]).norm();
    pos <= cfg.pos_tol && rot <= cfg.rot_tol
}

/// Levenberg-Marquardt inverse kinematics on the 6-D pose error.
///
/// Damping is multiplied by 10 when a step increases the cost and divided by
/// 10 when it decreases; at most `cfg.max_iterations` accepted iterations.
pub fn ik_lm(arm: &ArmModel, target: &Pose, seed: &JointVector, cfg: &IkConfig) -> IkResult {
    if !seed.is_finite() {
        return IkResult::Invalid(IkFailure::NotConverged);
    }

    let finish = |q: JointVector| -> IkResult {
        if !arm.within_limits(&q) {
            IkResult::Invalid(IkFailure::LimitViolation)
        } else if q.max_abs_diff(seed) > cfg.max_seed_distance {
            IkResult::Invalid(IkFailure::BranchJump)
        } else {
            IkResult::Valid(q)
        }
    };

    let mut q = *seed;
    let mut e = pose_error(target, &fk(arm, &q));
    if error_within(&e, cfg) {
        return finish(q);
    }
    let mut cost = e.norm_squared();
    let mut damping = cfg.initial_damping;

    for _ in 0..cfg.max_iterations {
        let (origins, axes, ee) = joint_frames(arm, &q);
        let mut jac = Matrix6::<f64>::zeros();
        for i in 0..DOF {
            let lin = axes[i].cross(&(ee.translation - origins[i]));
            for r in 0..3 {
                jac[(r, i)] = lin[r];
                jac[(r + 3, i)] = axes[i][r];
            }
        }

        let jt = jac.transpose();
        let g = jt * e;
        let mut stepped = false;
        // Inner damping search: retry with stiffer damping on cost increase.
        for _ in 0..12 {
            let h = jt * jac + Matrix6::identity() * damping;
            let Some(h_inv) = h.try_inverse() else {
                damping *= 10.0;
                continue;
            };
            let dq = h_inv * g;
            let mut q_new = q;
            for i in 0..DOF {
                q_new.0[i] += dq[i];
            }
            let e_new = pose_error(target, &fk(arm, &q_new));
            let cost_new = e_new.norm_squared();
            if cost_new < cost {
                q = q_new;
                e = e_new;
                cost = cost_new;
                damping = (damping / 10.0).max(1e-12);
                stepped = true;
                break;
            }
            damping *= 10.0;
        }

        if error_within(&e, cfg) {
            return finish(q);
        }
        if !stepped {
            // Damping saturated without progress.
            break;
        }
    }

    if error_within(&e, cfg) {
        finish(q)
    } else {
        IkResult::Invalid(IkFailure::NotConverged)
    }
}

/// UR5-like DH parameters used by the built-in simulator arms.
///
/// Joints 2 and 3 are limited to (−π, π) while the rest span ±2π, which keeps
/// part of the nominal workspace genuinely unreachable for testing.
pub fn simulator_arm(base_pose: Pose, hand_eye: Pose) -> ArmModel {
    use std::f64::consts::{FRAC_PI_2, PI};
    let two_pi = 2.0 * PI;
    ArmModel {
        dh_params: [
            DhRow {
                a: 0.0,
                alpha: FRAC_PI_2,
                d: 0.0892,
                theta_offset: 0.0,
            },
            DhRow {
                a: -0.425,
                alpha: 0.0,
                d: 0.0,
                theta_offset: 0.0,
            },
            DhRow {
                a: -0.392,
                alpha: 0.0,
                d: 0.0,
                theta_offset: 0.0,
            },
            DhRow {
                a: 0.0,
                alpha: FRAC_PI_2,
                d: 0.1093,
                theta_offset: 0.0,
            },
            DhRow {
                a: 0.0,
                alpha: -FRAC_PI_2,
                d: 0.0948,
                theta_offset: 0.0,
            },
            DhRow {
                a: 0.0,
                alpha: 0.0,
                d: 0.0825,
                theta_offset: 0.0,
            },
        ],
        joint_limits: [
            (-two_pi, two_pi),
            (-PI, PI),
            (-PI, PI),
            (-two_pi, two_pi),
            (-two_pi, two_pi),
            (-two_pi, two_pi),
        ],
        base_pose,
        hand_eye,
    }
}
