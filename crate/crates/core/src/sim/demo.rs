//! Scripted bimanual demonstrations and dataset generation.
//!
//! Demos are waypoint scripts per arm: each waypoint pair is solved by IK and
//! the arms interpolate linearly in joint space between solutions. The first
//! object in the scene is the manipuland; when both paddles come within the
//! attach threshold of its surface it moves kinematically with the midpoint of
//! the paddles (no dynamics). Ground-truth contact is the analytic
//! paddle-to-object surface distance against a 2 mm threshold.

use super::{
    paddle_distance, render, Primitive, RenderItem, Scene, SimError, INSTANCE_LEFT_GRIPPER,
    INSTANCE_OBJECT_BASE, INSTANCE_RIGHT_GRIPPER,
};
use crate::dataset::{
    write_dataset_with_specs, ArmView, DatasetSpecs, Provenance, Side, TimeStep, Trajectory,
    TrajectoryMeta,
};
use crate::geometry::{compose, CameraIntrinsics, Pose};
use crate::kinematics::{fk, ik_lm, simulator_arm, ArmModel, IkConfig, IkResult, JointVector};
use crate::rng::{derive_seed, derived_rng};
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Paddle proxy: a thin plate ahead of the end-effector along its z axis.
pub const PADDLE_HALF: [f64; 3] = [0.016, 0.016, 0.005];
pub const PADDLE_FORWARD: f64 = 0.05;
/// Contact face of the paddle sits this far ahead of the EEF origin.
pub const PADDLE_FACE: f64 = PADDLE_FORWARD + PADDLE_HALF[2];

/// Ground-truth contact threshold: paddle surface within 2 mm of the object.
pub const CONTACT_THRESHOLD: f64 = 0.002;

/// Starting joint configurations facing the shared workspace.
pub const HOME_LEFT: JointVector = JointVector([1.446, 1.892, 2.478, -1.229, 0.125, 0.0]);
pub const HOME_RIGHT: JointVector = JointVector([-1.446, -0.995, 2.478, 1.658, -0.125, 0.0]);

/// One synchronized bimanual waypoint. `steps` is the number of interpolation
/// steps from the previous waypoint (ignored on the first).
#[derive(Debug, Clone)]
pub struct Waypoint {
    pub left: Pose,
    pub right: Pose,
    pub gripper_left: f64,
    pub gripper_right: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct DemoScript {
    pub waypoints: Vec<Waypoint>,
}

/// Serde mirrors for the on-disk scene and script documents (TOML; poses as
/// 4×4 row-major homogeneous matrices).
#[derive(Debug, Serialize, Deserialize)]
struct WaypointDoc {
    left: Vec<f64>,
    right: Vec<f64>,
    gripper_left: f64,
    gripper_right: f64,
    steps: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScriptDoc {
    waypoints: Vec<WaypointDoc>,
}

fn pose_to_vec(p: &Pose) -> Vec<f64> {
    p.to_bytes()
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn pose_from_vec(v: &[f64]) -> Result<Pose, String> {
    if v.len() != 16 {
        return Err(format!("pose matrix needs 16 values, got {}", v.len()));
    }
    let mut bytes = Vec::with_capacity(128);
    for x in v {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    Pose::from_bytes(&bytes).map_err(|e| e.to_string())
}

/// Renders a scene as its structured-text document.
pub fn scene_to_toml(scene: &Scene) -> String {
    format!(
        "# synthetic bimanual scene: table plane, albedos, primitives\n{}",
        toml::to_string(scene).expect("scene serializes")
    )
}

pub fn scene_from_toml(text: &str) -> Result<Scene, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

/// Renders a demo script as its structured-text document.
pub fn script_to_toml(script: &DemoScript) -> String {
    let doc = ScriptDoc {
        waypoints: script
            .waypoints
            .iter()
            .map(|w| WaypointDoc {
                left: pose_to_vec(&w.left),
                right: pose_to_vec(&w.right),
                gripper_left: w.gripper_left,
                gripper_right: w.gripper_right,
                steps: w.steps,
            })
            .collect(),
    };
    format!(
        "# waypoint script: per-arm EEF poses (4x4 row-major), gripper open fractions,\n# interpolation steps from the previous waypoint\n{}",
        toml::to_string(&doc).expect("script serializes")
    )
}

pub fn script_from_toml(text: &str) -> Result<DemoScript, String> {
    let doc: ScriptDoc = toml::from_str(text).map_err(|e| e.to_string())?;
    let waypoints = doc
        .waypoints
        .iter()
        .map(|w| {
            Ok(Waypoint {
                left: pose_from_vec(&w.left)?,
                right: pose_from_vec(&w.right)?,
                gripper_left: w.gripper_left,
                gripper_right: w.gripper_right,
                steps: w.steps,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(DemoScript { waypoints })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptyScriptBehavior {
    Error,
    /// Emit a single static frame at the home configuration.
    SingleFrame,
}

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub intrinsics: CameraIntrinsics,
    pub ik: IkConfig,
    pub home_left: JointVector,
    pub home_right: JointVector,
    pub empty_script: EmptyScriptBehavior,
    /// Both paddles within this surface distance grab the manipuland.
    pub attach_threshold: f64,
    pub task: String,
    pub seed: u64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            intrinsics: default_intrinsics(),
            ik: demo_ik_config(),
            home_left: HOME_LEFT,
            home_right: HOME_RIGHT,
            empty_script: EmptyScriptBehavior::Error,
            attach_threshold: 0.0025,
            task: "demo".to_string(),
            seed: 0,
        }
    }
}

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(128.0, 128.0, 63.5, 63.5, 128, 128)
}

/// Waypoint solving allows large joint moves; the branch-jump guard is for
/// small augmentation perturbations, not scripted motions.
pub fn demo_ik_config() -> IkConfig {
    IkConfig {
        max_iterations: 300,
        max_seed_distance: 30.0,
        ..IkConfig::default()
    }
}

/// Camera pose in the EEF frame looking from `position` toward `target`,
/// with image-down aligned to `down` as far as orthogonality allows.
pub fn look_at_hand_eye(position: Vector3<f64>, target: Vector3<f64>, down: Vector3<f64>) -> Pose {
    let z = (target - position).normalize();
    let y = (down - z * down.dot(&z)).normalize();
    let x = y.cross(&z);
    Pose::new(Matrix3::from_columns(&[x, y, z]), position)
}

/// Wrist camera: beside and slightly above the paddle, aimed at its center.
///
/// The oblique vantage means a grasped object bulges into the line of sight
/// and occludes the paddle as contact closes, which is the signal the SSIM
/// visibility detector keys on.
pub fn default_hand_eye() -> Pose {
    look_at_hand_eye(
        Vector3::new(0.13, -0.04, -0.06),
        Vector3::new(0.0, 0.0, PADDLE_FACE),
        Vector3::new(0.0, 1.0, 0.0),
    )
}

/// The two simulator arms on a shared table.
pub fn default_arms() -> (ArmModel, ArmModel) {
    let he = default_hand_eye();
    let left = simulator_arm(Pose::from_translation(Vector3::new(-0.45, 0.0, 0.0)), he);
    let right = simulator_arm(Pose::from_translation(Vector3::new(0.45, 0.0, 0.0)), he);
    (left, right)
}

/// Tool orientation for the left arm: z toward +x (the workspace), y down.
pub fn left_tool_orientation() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Tool orientation for the right arm: z toward −x, y down.
pub fn right_tool_orientation() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Lift-ball scene: a ball resting on the table at the given center.
pub fn lift_ball_scene(ball_x: f64, ball_y: f64, radius: f64) -> Scene {
    Scene {
        table_height: 0.0,
        table_albedo: [0.72, 0.70, 0.66],
        background_albedo: [0.07, 0.08, 0.10],
        objects: vec![Primitive::Sphere {
            center: [ball_x, ball_y, radius],
            radius,
            albedo: [0.16, 0.03, 0.03],
        }],
    }
}

/// Push-block scene: a box resting on the table.
pub fn push_block_scene(block_x: f64, block_y: f64) -> Scene {
    let half = [0.045, 0.065, 0.05];
    Scene {
        table_height: 0.0,
        table_albedo: [0.72, 0.70, 0.66],
        background_albedo: [0.07, 0.08, 0.10],
        objects: vec![Primitive::boxed(
            Pose::from_translation(Vector3::new(block_x, block_y, half[2])),
            half,
            [0.16, 0.14, 0.30],
        )],
    }
}

fn pose_at(rotation: Matrix3<f64>, x: f64, y: f64, z: f64) -> Pose {
    Pose::new(rotation, Vector3::new(x, y, z))
}

/// Approach, descend beside the ball, converge to a 1 mm standoff, lift.
/// 60 steps total (1 start + 19 + 20 + 20).
pub fn lift_ball_script(scene: &Scene) -> DemoScript {
    let Primitive::Sphere { center, radius, .. } = &scene.objects[0] else {
        panic!("lift-ball scene must start with a sphere");
    };
    let (bx, by, bz) = (center[0], center[1], center[2]);
    let r = *radius;
    let rl = left_tool_orientation();
    let rr = right_tool_orientation();
    // Final EEF x offset: paddle face at 1 mm from the ball surface.
    let hold = r + PADDLE_FACE + 0.001;
    let approach_gap = 0.12;
    let high = bz + 0.10;
    let open = |left: Pose, right: Pose, g: f64, steps: usize| Waypoint {
        left,
        right,
        gripper_left: g,
        gripper_right: g,
        steps,
    };
    DemoScript {
        waypoints: vec![
            open(
                pose_at(rl, bx - hold - approach_gap, by, high),
                pose_at(rr, bx + hold + approach_gap, by, high),
                1.0,
                0,
            ),
            open(
                pose_at(rl, bx - hold - approach_gap, by, bz),
                pose_at(rr, bx + hold + approach_gap, by, bz),
                1.0,
                19,
            ),
            open(
                pose_at(rl, bx - hold, by, bz),
                pose_at(rr, bx + hold, by, bz),
                0.0,
                20,
            ),
            open(
                pose_at(rl, bx - hold, by, bz + 0.12),
                pose_at(rr, bx + hold, by, bz + 0.12),
                0.0,
                20,
            ),
        ],
    }
}

/// Approach, descend beside the block, converge to its side faces, push
/// forward along +y. 60 steps total.
pub fn push_block_script(scene: &Scene) -> DemoScript {
    let Primitive::Box { half_extents, .. } = &scene.objects[0] else {
        panic!("push-block scene must start with a box");
    };
    let pose = scene.objects[0].box_pose().unwrap();
    let (bx, by, bz) = (pose.translation.x, pose.translation.y, pose.translation.z);
    let hold = half_extents[0] + PADDLE_FACE + 0.001;
    let approach_gap = 0.12;
    let high = bz + 0.10;
    let rl = left_tool_orientation();
    let rr = right_tool_orientation();
    let push = 0.14;
    let wp = |lx: f64, rx: f64, y: f64, z: f64, g: f64, steps: usize| Waypoint {
        left: pose_at(rl, lx, y, z),
        right: pose_at(rr, rx, y, z),
        gripper_left: g,
        gripper_right: g,
        steps,
    };
    DemoScript {
        waypoints: vec![
            wp(
                bx - hold - approach_gap,
                bx + hold + approach_gap,
                by,
                high,
                1.0,
                0,
            ),
            wp(
                bx - hold - approach_gap,
                bx + hold + approach_gap,
                by,
                bz,
                1.0,
                19,
            ),
            wp(bx - hold, bx + hold, by, bz, 0.0, 20),
            wp(bx - hold, bx + hold, by + push, bz, 0.0, 20),
        ],
    }
}

/// Ground truth recorded alongside a demo: per-step geometric contact flags
/// and the object states each frame was rendered with.
#[derive(Debug, Clone)]
pub struct DemoGroundTruth {
    pub contact: Vec<bool>,
    pub objects: Vec<Vec<Primitive>>,
}

impl DemoGroundTruth {
    pub fn contact_onset(&self) -> Option<usize> {
        self.contact.iter().position(|&c| c)
    }
}

fn solve_waypoints(
    script: &DemoScript,
    left_arm: &ArmModel,
    right_arm: &ArmModel,
    opts: &DemoOptions,
) -> Result<Vec<(JointVector, JointVector)>, SimError> {
    let mut out = Vec::with_capacity(script.waypoints.len());
    let mut seed_l = opts.home_left;
    let mut seed_r = opts.home_right;
    for (i, wp) in script.waypoints.iter().enumerate() {
        let ql = match ik_lm(left_arm, &wp.left, &seed_l, &opts.ik) {
            IkResult::Valid(q) => q,
            IkResult::Invalid(_) => return Err(SimError::UnreachableWaypoint(i)),
        };
        let qr = match ik_lm(right_arm, &wp.right, &seed_r, &opts.ik) {
            IkResult::Valid(q) => q,
            IkResult::Invalid(_) => return Err(SimError::UnreachableWaypoint(i)),
        };
        seed_l = ql;
        seed_r = qr;
        out.push((ql, qr));
    }
    Ok(out)
}

fn interpolate(a: &JointVector, b: &JointVector, alpha: f64) -> JointVector {
    let mut q = *a;
    for i in 0..6 {
        q.0[i] = a.0[i] + (b.0[i] - a.0[i]) * alpha;
    }
    q
}

/// World pose of an arm's paddle for a configuration.
pub fn paddle_pose(arm: &ArmModel, q: &JointVector) -> Pose {
    compose(
        &fk(arm, q),
        &Pose::from_translation(Vector3::new(0.0, 0.0, PADDLE_FORWARD)),
    )
}

struct StepState {
    ql: JointVector,
    qr: JointVector,
    gripper_l: f64,
    gripper_r: f64,
    objects: Vec<Primitive>,
    contact: bool,
}

/// Runs a scripted demo: joint-space interpolation between IK solutions, a
/// per-step render of both wrist cameras, recorded actions (next step's
/// joints), and geometric ground truth.
pub fn run_demo(
    scene: &Scene,
    script: &DemoScript,
    left_arm: &ArmModel,
    right_arm: &ArmModel,
    opts: &DemoOptions,
) -> Result<(Trajectory, DemoGroundTruth), SimError> {
    // Per-step joint configurations.
    let configs: Vec<(JointVector, JointVector, f64, f64)> = if script.waypoints.is_empty() {
        match opts.empty_script {
            EmptyScriptBehavior::Error => return Err(SimError::EmptyScript),
            EmptyScriptBehavior::SingleFrame => {
                vec![(opts.home_left, opts.home_right, 1.0, 1.0)]
            }
        }
    } else {
        let wp_configs = solve_waypoints(script, left_arm, right_arm, opts)?;
        let mut list = Vec::new();
        let first = &script.waypoints[0];
        list.push((
            wp_configs[0].0,
            wp_configs[0].1,
            first.gripper_left,
            first.gripper_right,
        ));
        for i in 1..script.waypoints.len() {
            let wp = &script.waypoints[i];
            let prev = &script.waypoints[i - 1];
            for j in 0..wp.steps {
                let alpha = (j + 1) as f64 / wp.steps as f64;
                list.push((
                    interpolate(&wp_configs[i - 1].0, &wp_configs[i].0, alpha),
                    interpolate(&wp_configs[i - 1].1, &wp_configs[i].1, alpha),
                    prev.gripper_left + (wp.gripper_left - prev.gripper_left) * alpha,
                    prev.gripper_right + (wp.gripper_right - prev.gripper_right) * alpha,
                ));
            }
        }
        list
    };

    // Sequential object-state pass: kinematic attachment of the manipuland.
    let mut objects = scene.objects.clone();
    let mut attach_midpoint: Option<Vector3<f64>> = None;
    let mut states: Vec<StepState> = Vec::with_capacity(configs.len());
    for (ql, qr, gl, gr) in &configs {
        let paddle_l = paddle_pose(left_arm, ql);
        let paddle_r = paddle_pose(right_arm, qr);
        let midpoint = (paddle_l.translation + paddle_r.translation) / 2.0;
        if !objects.is_empty() {
            if let Some(at) = attach_midpoint {
                let offset = midpoint - at;
                objects[0] = objects[0].translated(offset);
                attach_midpoint = Some(midpoint);
            } else {
                let dl = paddle_distance(&paddle_l, &PADDLE_HALF, &objects[0]);
                let dr = paddle_distance(&paddle_r, &PADDLE_HALF, &objects[0]);
                if dl <= opts.attach_threshold && dr <= opts.attach_threshold {
                    attach_midpoint = Some(midpoint);
                }
            }
        }
        let contact = !objects.is_empty()
            && (paddle_distance(&paddle_l, &PADDLE_HALF, &objects[0]) <= CONTACT_THRESHOLD
                || paddle_distance(&paddle_r, &PADDLE_HALF, &objects[0]) <= CONTACT_THRESHOLD);
        states.push(StepState {
            ql: *ql,
            qr: *qr,
            gripper_l: *gl,
            gripper_r: *gr,
            objects: objects.clone(),
            contact,
        });
    }

    // Pure per-step renders, parallel across steps.
    let k = opts.intrinsics;
    let steps: Vec<TimeStep> = states
        .par_iter()
        .map(|st| {
            let mut items: Vec<RenderItem> = st
                .objects
                .iter()
                .enumerate()
                .map(|(i, p)| RenderItem {
                    id: INSTANCE_OBJECT_BASE + i as u16,
                    primitive: p.clone(),
                })
                .collect();
            let paddle_l = paddle_pose(left_arm, &st.ql);
            let paddle_r = paddle_pose(right_arm, &st.qr);
            items.push(RenderItem {
                id: INSTANCE_LEFT_GRIPPER,
                primitive: Primitive::boxed(paddle_l, PADDLE_HALF, [0.80, 0.85, 0.95]),
            });
            items.push(RenderItem {
                id: INSTANCE_RIGHT_GRIPPER,
                primitive: Primitive::boxed(paddle_r, PADDLE_HALF, [0.80, 0.95, 0.82]),
            });

            let build_view = |side: Side| {
                let (arm, q, gripper, own_id) = match side {
                    Side::Left => (left_arm, &st.ql, st.gripper_l, INSTANCE_LEFT_GRIPPER),
                    Side::Right => (right_arm, &st.qr, st.gripper_r, INSTANCE_RIGHT_GRIPPER),
                };
                let eef_pose = fk(arm, q);
                let camera_pose = compose(&eef_pose, &arm.hand_eye);
                let out = render(
                    scene.table_height,
                    scene.table_albedo,
                    scene.background_albedo,
                    &items,
                    &camera_pose,
                    &k,
                );
                ArmView {
                    mask: Some(out.instance_mask(own_id, k.width, k.height)),
                    rgb: out.rgb,
                    depth: Some(out.depth),
                    camera_pose,
                    eef_pose,
                    joints: *q,
                    gripper,
                }
            };
            TimeStep {
                left: build_view(Side::Left),
                right: build_view(Side::Right),
                action_left: JointVector::zeros(),
                action_right: JointVector::zeros(),
            }
        })
        .collect();

    // Action labels: the next step's joints; the final step targets itself.
    let mut steps = steps;
    for i in 0..steps.len() {
        let next = (i + 1).min(states.len() - 1);
        steps[i].action_left = states[next].ql;
        steps[i].action_right = states[next].qr;
    }

    let trajectory = Trajectory {
        steps,
        left_arm: left_arm.clone(),
        right_arm: right_arm.clone(),
        left_intrinsics: k,
        right_intrinsics: k,
        meta: TrajectoryMeta {
            task: opts.task.clone(),
            seed: opts.seed,
            simulated: true,
            provenance: Provenance::Original,
            calibrated: true,
        },
    };
    let ground_truth = DemoGroundTruth {
        contact: states.iter().map(|s| s.contact).collect(),
        objects: states.iter().map(|s| s.objects.clone()).collect(),
    };
    Ok((trajectory, ground_truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    LiftBall,
    PushBlock,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::LiftBall => "lift-ball",
            Task::PushBlock => "push-block",
        }
    }
}

/// Dataset-generation parameters: task, episode count, seed, and the object
/// spawn region (uniform over a centered rectangle).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimDatasetConfig {
    pub task: Task,
    pub n_demos: usize,
    pub seed: u64,
    pub spawn_center: [f64; 2],
    pub spawn_half: [f64; 2],
}

impl Default for SimDatasetConfig {
    fn default() -> Self {
        Self {
            task: Task::LiftBall,
            n_demos: 10,
            seed: 0,
            spawn_center: [0.0, 0.25],
            spawn_half: [0.04, 0.03],
        }
    }
}

/// Builds the scene and script for one episode of a task.
pub fn episode_setup(cfg: &SimDatasetConfig, episode: usize) -> (Scene, DemoScript, u64) {
    let episode_seed = derive_seed(cfg.seed, &[0x51e9, episode as u64]);
    let mut rng = derived_rng(cfg.seed, &[0x51e9, episode as u64, 1]);
    let sx = cfg.spawn_half[0];
    let sy = cfg.spawn_half[1];
    let x = cfg.spawn_center[0]
        + if sx > 0.0 {
            rng.random_range(-sx..sx)
        } else {
            0.0
        };
    let y = cfg.spawn_center[1]
        + if sy > 0.0 {
            rng.random_range(-sy..sy)
        } else {
            0.0
        };
    let scene = match cfg.task {
        Task::LiftBall => lift_ball_scene(x, y, 0.06),
        Task::PushBlock => push_block_scene(x, y),
    };
    let script = match cfg.task {
        Task::LiftBall => lift_ball_script(&scene),
        Task::PushBlock => push_block_script(&scene),
    };
    (scene, script, episode_seed)
}

/// Generates demos in parallel (derived per-episode seeds) and writes the
/// dataset directory. Returns the specs, episodes, and ground truths.
pub fn generate_dataset(
    cfg: &SimDatasetConfig,
    out_dir: &Path,
) -> Result<(DatasetSpecs, Vec<Trajectory>, Vec<DemoGroundTruth>), SimError> {
    let (left_arm, right_arm) = default_arms();
    let results: Vec<Result<(Trajectory, DemoGroundTruth), SimError>> = (0..cfg.n_demos)
        .into_par_iter()
        .map(|i| {
            let (scene, script, episode_seed) = episode_setup(cfg, i);
            let opts = DemoOptions {
                task: cfg.task.name().to_string(),
                seed: episode_seed,
                ..DemoOptions::default()
            };
            run_demo(&scene, &script, &left_arm, &right_arm, &opts)
        })
        .collect();

    let mut trajectories = Vec::with_capacity(cfg.n_demos);
    let mut truths = Vec::with_capacity(cfg.n_demos);
    for r in results {
        let (t, g) = r?;
        trajectories.push(t);
        truths.push(g);
    }
    let specs = DatasetSpecs {
        left_arm,
        right_arm,
        left_intrinsics: default_intrinsics(),
        right_intrinsics: default_intrinsics(),
        width: default_intrinsics().width,
        height: default_intrinsics().height,
        has_depth: true,
        has_masks: true,
    };
    write_dataset_with_specs(&specs, &trajectories, out_dir)?;
    Ok((specs, trajectories, truths))
}
