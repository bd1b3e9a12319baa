//! Camera-pose perturbation sampling.
//!
//! Contactless states get independent per-arm perturbations drawn uniformly
//! within magnitude and rotation bounds. Contact-rich states get a single
//! camera-frame translation, shared bit-identically by both arms with an
//! identity rotation, found by constrained dual annealing: the soft cost
//! discourages tiny perturbations and end-effectors close to the table or to
//! each other, while magnitude, table clearance, inter-EEF clearance, and IK
//! feasibility are hard constraints enforced by rejection.

mod anneal;

pub use anneal::{dual_annealing, AnnealConfig, AnnealOutcome};

use crate::geometry::{perturb_eef, Pose};
use crate::kinematics::{ik_lm, ArmModel, IkConfig, JointVector};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Magnitude and rotation bounds plus the meters-per-unit mapping for the
/// normalized decision variables.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerBounds {
    /// Translation magnitude lower bound, meters.
    pub m_lb: f64,
    /// Translation magnitude upper bound, meters.
    pub m_ub: f64,
    /// Rotation angle lower bound, degrees.
    pub r_lb_deg: f64,
    /// Rotation angle upper bound, degrees.
    pub r_ub_deg: f64,
    /// Meters per unit of the normalized [-1,1] decision variables.
    pub scale: f64,
}

impl Default for SamplerBounds {
    fn default() -> Self {
        Self {
            m_lb: 0.01,
            m_ub: 0.02,
            r_lb_deg: -28.7,
            r_ub_deg: 28.7,
            scale: 0.02,
        }
    }
}

impl SamplerBounds {
    /// Degenerate equal-bound intervals are allowed and sample the single value.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.m_lb > 0.0) {
            return Err(format!("m_lb must be positive, got {}", self.m_lb));
        }
        if self.m_lb > self.m_ub {
            return Err(format!("m_lb {} > m_ub {}", self.m_lb, self.m_ub));
        }
        if self.r_lb_deg > self.r_ub_deg {
            return Err(format!(
                "rotation bounds not ordered: [{}, {}]",
                self.r_lb_deg, self.r_ub_deg
            ));
        }
        if self.scale < self.m_ub {
            return Err(format!(
                "scale {} must be at least m_ub {}",
                self.scale, self.m_ub
            ));
        }
        Ok(())
    }
}

/// Clearance requirements for contact-rich perturbations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintParams {
    /// Minimum end-effector height above the table plane, meters.
    pub d_table: f64,
    /// Minimum inter-end-effector distance, meters.
    pub d_eff: f64,
    /// World z of the table plane, meters.
    pub table_height: f64,
}

impl Default for ConstraintParams {
    fn default() -> Self {
        Self {
            d_table: 0.03,
            d_eff: 0.05,
            table_height: 0.0,
        }
    }
}

impl ConstraintParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.d_table <= 0.0 || self.d_eff <= 0.0 {
            return Err("d_table and d_eff must be positive".into());
        }
        Ok(())
    }
}

/// Soft-cost weights (too-small, table proximity, inter-EEF proximity).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub w_small: f64,
    pub w_table: f64,
    pub w_eef: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_small: 1.0,
            w_table: 1.0,
            w_eef: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    ContactlessRandom,
    ContactOptimized,
}

/// Per-arm camera-frame transforms with provenance.
///
/// Contact-optimized perturbations carry `left == right` bit-identically,
/// with exactly identity rotations, plus the annealer cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub left: Pose,
    pub right: Pose,
    pub kind: PerturbationKind,
    pub cost: Option<f64>,
}

/// World-frame scene state a perturbation is sampled against.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub left_camera: Pose,
    pub right_camera: Pose,
    pub left_eef: Pose,
    pub right_eef: Pose,
    pub left_joints: JointVector,
    pub right_joints: JointVector,
}

fn unit_sphere_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let (x, y, z): (f64, f64, f64) = (
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let v = Vector3::new(x, y, z);
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn random_arm_perturbation(rng: &mut ChaCha8Rng, bounds: &SamplerBounds) -> Pose {
    let dir = unit_sphere_direction(rng);
    let magnitude = uniform_in(rng, bounds.m_lb, bounds.m_ub);
    let axis = unit_sphere_direction(rng);
    let angle_deg = uniform_in(rng, bounds.r_lb_deg, bounds.r_ub_deg);
    let mut pose = Pose::from_axis_angle(axis, angle_deg.to_radians());
    pose.translation = dir * magnitude;
    pose
}

/// Independent per-arm perturbation for contactless states: uniform direction
/// on the sphere times a uniform magnitude, and a uniform-angle rotation about
/// a uniform axis.
pub fn sample_contactless(rng: &mut ChaCha8Rng, bounds: &SamplerBounds) -> Perturbation {
    let left = random_arm_perturbation(rng, bounds);
    let right = random_arm_perturbation(rng, bounds);
    Perturbation {
        left,
        right,
        kind: PerturbationKind::ContactlessRandom,
        cost: None,
    }
}

/// Both perturbed end-effector poses under a shared camera-frame translation.
pub fn perturbed_eefs(
    c_trans: &[f64; 3],
    ctx: &SceneContext,
    bounds: &SamplerBounds,
) -> (Pose, Pose) {
    let t = Pose::from_translation(Vector3::new(c_trans[0], c_trans[1], c_trans[2]) * bounds.scale);
    (
        perturb_eef(&ctx.left_camera, &t, &ctx.left_eef),
        perturb_eef(&ctx.right_camera, &t, &ctx.right_eef),
    )
}

/// Soft cost over normalized decision variables in [-1,1]³.
///
/// `w_small·max(0, m_lb − ‖t‖)/m_lb + w_table·max(0, d_table − h_min)/d_table
///  + w_eef·max(0, d_eff − d_pair)/d_eff` with `t = scale·c_trans`.
pub fn perturbation_cost(
    c_trans: &[f64; 3],
    ctx: &SceneContext,
    bounds: &SamplerBounds,
    constraints: &ConstraintParams,
    weights: &CostWeights,
) -> f64 {
    let t = Vector3::new(c_trans[0], c_trans[1], c_trans[2]) * bounds.scale;
    let (left, right) = perturbed_eefs(c_trans, ctx, bounds);
    let h_min = (left.translation.z - constraints.table_height)
        .min(right.translation.z - constraints.table_height);
    let d_pair = (left.translation - right.translation).norm();

    weights.w_small * (bounds.m_lb - t.norm()).max(0.0) / bounds.m_lb
        + weights.w_table * (constraints.d_table - h_min).max(0.0) / constraints.d_table
        + weights.w_eef * (constraints.d_eff - d_pair).max(0.0) / constraints.d_eff
}

/// Which hard constraint a candidate violated first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    MagnitudeTooSmall,
    TableProximity,
    EefProximity,
    IkInvalid,
}

/// Rejection tallies across one or more annealing runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintStats {
    pub checked: u64,
    pub rejected_magnitude: u64,
    pub rejected_table: u64,
    pub rejected_eef: u64,
    pub rejected_ik: u64,
}

impl ConstraintStats {
    pub fn record(&mut self, violation: Option<ConstraintKind>) {
        self.checked += 1;
        match violation {
            None => {}
            Some(ConstraintKind::MagnitudeTooSmall) => self.rejected_magnitude += 1,
            Some(ConstraintKind::TableProximity) => self.rejected_table += 1,
            Some(ConstraintKind::EefProximity) => self.rejected_eef += 1,
            Some(ConstraintKind::IkInvalid) => self.rejected_ik += 1,
        }
    }

    pub fn merge(&mut self, other: &ConstraintStats) {
        self.checked += other.checked;
        self.rejected_magnitude += other.rejected_magnitude;
        self.rejected_table += other.rejected_table;
        self.rejected_eef += other.rejected_eef;
        self.rejected_ik += other.rejected_ik;
    }
}

/// Hard-constraint check for a normalized candidate, cheapest test first.
///
/// Also serves as the independent re-verification entry point for accepted
/// perturbations.
pub fn check_constraints(
    c_trans: &[f64; 3],
    ctx: &SceneContext,
    bounds: &SamplerBounds,
    constraints: &ConstraintParams,
    left_arm: &ArmModel,
    right_arm: &ArmModel,
    ik_cfg: &IkConfig,
) -> Option<ConstraintKind> {
    let t = Vector3::new(c_trans[0], c_trans[1], c_trans[2]) * bounds.scale;
    if t.norm() < bounds.m_lb {
        return Some(ConstraintKind::MagnitudeTooSmall);
    }
    let (left, right) = perturbed_eefs(c_trans, ctx, bounds);
    let h_min = (left.translation.z - constraints.table_height)
        .min(right.translation.z - constraints.table_height);
    if h_min < constraints.d_table {
        return Some(ConstraintKind::TableProximity);
    }
    let d_pair = (left.translation - right.translation).norm();
    if d_pair < constraints.d_eff {
        return Some(ConstraintKind::EefProximity);
    }
    if !ik_lm(left_arm, &left, &ctx.left_joints, ik_cfg).is_valid() {
        return Some(ConstraintKind::IkInvalid);
    }
    if !ik_lm(right_arm, &right, &ctx.right_joints, ik_cfg).is_valid() {
        return Some(ConstraintKind::IkInvalid);
    }
    None
}

/// Outcome of contact-rich sampling; `Infeasible` is a value, the caller
/// keeps the original state.
#[derive(Debug, Clone, PartialEq)]
pub enum ContactSampleOutcome {
    Feasible(Perturbation),
    Infeasible,
}

/// Contact-rich perturbation via constrained dual annealing.
///
/// On success both arms share one camera-frame translation (`scale · c_best`)
/// with exactly identity rotation blocks.
#[allow(clippy::too_many_arguments)]
pub fn sample_contact(
    ctx: &SceneContext,
    bounds: &SamplerBounds,
    constraints: &ConstraintParams,
    weights: &CostWeights,
    left_arm: &ArmModel,
    right_arm: &ArmModel,
    ik_cfg: &IkConfig,
    anneal_cfg: &AnnealConfig,
    rng: &mut ChaCha8Rng,
) -> (ContactSampleOutcome, ConstraintStats) {
    let mut stats = ConstraintStats::default();
    let box3 = [(-1.0, 1.0); 3];

    let mut cost_fn = |x: &[f64]| {
        let c = [x[0], x[1], x[2]];
        perturbation_cost(&c, ctx, bounds, constraints, weights)
    };
    let mut feasible_fn = |x: &[f64]| {
        let c = [x[0], x[1], x[2]];
        let violation =
            check_constraints(&c, ctx, bounds, constraints, left_arm, right_arm, ik_cfg);
        stats.record(violation);
        violation.is_none()
    };

    let outcome = dual_annealing(&mut cost_fn, &mut feasible_fn, &box3, rng, anneal_cfg);
    match outcome {
        AnnealOutcome::Feasible { x, cost } => {
            let t = Vector3::new(x[0], x[1], x[2]) * bounds.scale;
            let pose = Pose::from_translation(t);
            (
                ContactSampleOutcome::Feasible(Perturbation {
                    left: pose,
                    right: pose,
                    kind: PerturbationKind::ContactOptimized,
                    cost: Some(cost),
                }),
                stats,
            )
        }
        AnnealOutcome::Infeasible => (ContactSampleOutcome::Infeasible, stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{fk, simulator_arm};
    use nalgebra::Matrix3;
    use rand_chacha::rand_core::SeedableRng;

    fn bounds() -> SamplerBounds {
        SamplerBounds::default()
    }

    #[test]
    fn contactless_respects_bounds() {
        let b = bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = sample_contactless(&mut rng, &b);
            for pose in [&p.left, &p.right] {
                let m = pose.translation.norm();
                assert!((b.m_lb..=b.m_ub).contains(&m), "magnitude {m}");
                let angle_deg = pose.rotation_angle().to_degrees();
                assert!(angle_deg <= b.r_ub_deg.abs() + 1e-9, "angle {angle_deg}");
            }
            assert_eq!(p.kind, PerturbationKind::ContactlessRandom);
        }
    }

    #[test]
    fn degenerate_interval_gives_exact_magnitude() {
        let b = SamplerBounds {
            m_lb: 0.015,
            m_ub: 0.015,
            ..bounds()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = sample_contactless(&mut rng, &b);
            assert!((p.left.translation.norm() - 0.015).abs() < 1e-15);
            assert!((p.right.translation.norm() - 0.015).abs() < 1e-15);
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let b = bounds();
        let a = sample_contactless(&mut ChaCha8Rng::seed_from_u64(77), &b);
        let c = sample_contactless(&mut ChaCha8Rng::seed_from_u64(77), &b);
        assert_eq!(a, c);
    }

    fn flat_context() -> SceneContext {
        // Identity-rotation cameras so camera-frame steps are world steps.
        let mut left_eef = Pose::identity();
        left_eef.translation = Vector3::new(-0.1, 0.0, 0.2);
        let mut right_eef = Pose::identity();
        right_eef.translation = Vector3::new(0.1, 0.0, 0.2);
        SceneContext {
            left_camera: Pose::from_translation(Vector3::new(-0.1, -0.05, 0.25)),
            right_camera: Pose::from_translation(Vector3::new(0.1, -0.05, 0.25)),
            left_eef,
            right_eef,
            left_joints: JointVector::zeros(),
            right_joints: JointVector::zeros(),
        }
    }

    #[test]
    fn zero_perturbation_saturates_small_penalty() {
        let ctx = flat_context();
        let cost = perturbation_cost(
            &[0.0, 0.0, 0.0],
            &ctx,
            &bounds(),
            &ConstraintParams::default(),
            &CostWeights::default(),
        );
        assert!(cost >= 1.0, "cost {cost}");
    }

    #[test]
    fn comfortable_configuration_has_zero_cost() {
        let ctx = flat_context();
        // Full-scale x step: magnitude 0.02 ≥ m_lb, heights unchanged at 0.2,
        // pair distance unchanged at 0.2.
        let cost = perturbation_cost(
            &[1.0, 0.0, 0.0],
            &ctx,
            &bounds(),
            &ConstraintParams::default(),
            &CostWeights::default(),
        );
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn half_table_clearance_costs_half_weight() {
        let mut ctx = flat_context();
        let constraints = ConstraintParams::default();
        // One EEF at exactly half the required clearance; identity camera
        // rotations and an in-plane step keep heights unchanged.
        ctx.left_eef.translation.z = constraints.table_height + constraints.d_table / 2.0;
        ctx.right_eef.translation.z = constraints.table_height + 2.0 * constraints.d_table;
        let w = CostWeights::default();
        let cost = perturbation_cost(&[1.0, 0.0, 0.0], &ctx, &bounds(), &constraints, &w);
        assert_eq!(cost, w.w_table * 0.5);
    }

    #[test]
    fn contact_sampling_on_reachable_scene_is_feasible_and_reverifies() {
        let left_arm = simulator_arm(
            Pose::from_translation(Vector3::new(-0.45, 0.0, 0.0)),
            Pose::identity(),
        );
        let right_arm = simulator_arm(
            Pose::from_translation(Vector3::new(0.45, 0.0, 0.0)),
            Pose::identity(),
        );
        let ql = JointVector([0.3, -1.1, 1.3, -0.4, 0.5, 0.2]);
        let qr = JointVector([2.8, -2.0, -1.3, 0.4, -0.5, 0.2]);
        let left_eef = fk(&left_arm, &ql);
        let right_eef = fk(&right_arm, &qr);
        let ctx = SceneContext {
            left_camera: left_eef,
            right_camera: right_eef,
            left_eef,
            right_eef,
            left_joints: ql,
            right_joints: qr,
        };
        let b = bounds();
        let constraints = ConstraintParams {
            table_height: -2.0, // far below; table constraint inactive
            ..ConstraintParams::default()
        };
        let ik_cfg = IkConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (outcome, stats) = sample_contact(
            &ctx,
            &b,
            &constraints,
            &CostWeights::default(),
            &left_arm,
            &right_arm,
            &ik_cfg,
            &AnnealConfig::default(),
            &mut rng,
        );
        let ContactSampleOutcome::Feasible(p) = outcome else {
            panic!("expected feasible outcome, stats {stats:?}");
        };
        // Identity rotation blocks exactly, bit-identical arms.
        assert_eq!(p.left.rotation, Matrix3::identity());
        assert_eq!(p.left, p.right);
        assert_eq!(p.kind, PerturbationKind::ContactOptimized);
        // Independent re-verification of all four constraints.
        let c = [
            p.left.translation.x / b.scale,
            p.left.translation.y / b.scale,
            p.left.translation.z / b.scale,
        ];
        assert_eq!(
            check_constraints(&c, &ctx, &b, &constraints, &left_arm, &right_arm, &ik_cfg),
            None
        );
        assert!(stats.checked > 0);
    }

    #[test]
    fn unsatisfiable_distance_constraint_is_infeasible() {
        let left_arm = simulator_arm(
            Pose::from_translation(Vector3::new(-0.45, 0.0, 0.0)),
            Pose::identity(),
        );
        let right_arm = simulator_arm(
            Pose::from_translation(Vector3::new(0.45, 0.0, 0.0)),
            Pose::identity(),
        );
        let ctx = flat_context();
        let constraints = ConstraintParams {
            d_eff: 10.0, // larger than the arm span
            table_height: -2.0,
            ..ConstraintParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = AnnealConfig {
            max_iter: 40,
            ..AnnealConfig::default()
        };
        let (outcome, stats) = sample_contact(
            &ctx,
            &bounds(),
            &constraints,
            &CostWeights::default(),
            &left_arm,
            &right_arm,
            &IkConfig::default(),
            &cfg,
            &mut rng,
        );
        assert_eq!(outcome, ContactSampleOutcome::Infeasible);
        assert!(stats.rejected_eef > 0);
    }
}
