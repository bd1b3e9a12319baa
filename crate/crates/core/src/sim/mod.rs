//! Synthetic bimanual environment.
//!
//! Two 6-DOF kinematic arms with wrist cameras act over a table plane with
//! analytic primitives (spheres and boxes). A per-pixel ray caster renders
//! RGB, z-depth, and instance masks with closed-form intersections, so
//! rendered depth is exact and every other module can be verified against the
//! simulator. No dynamics: demonstrations are scripted waypoint motions with
//! kinematic object attachment on grasp.

mod demo;

pub use demo::{
    default_arms, default_hand_eye, default_intrinsics, demo_ik_config, episode_setup,
    generate_dataset, left_tool_orientation, lift_ball_scene, lift_ball_script, paddle_pose,
    push_block_scene, push_block_script, right_tool_orientation, run_demo, scene_from_toml,
    scene_to_toml, script_from_toml, script_to_toml, DemoGroundTruth, DemoOptions, DemoScript,
    EmptyScriptBehavior, SimDatasetConfig, Task, Waypoint, CONTACT_THRESHOLD, HOME_LEFT,
    HOME_RIGHT, PADDLE_FACE, PADDLE_FORWARD, PADDLE_HALF,
};

use crate::geometry::{invert, pixel_ray, CameraIntrinsics, Pose};
use crate::image::{Depth16Image, Mask8Image, Rgb8Image};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("waypoint {0} is not reachable by inverse kinematics")]
    UnreachableWaypoint(usize),
    #[error("demo script has no waypoints")]
    EmptyScript,
    #[error("spawn region outside the reachable workspace: {0}")]
    BadSpawnRegion(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
}

/// Analytic scene primitive with a flat albedo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: [f64; 3],
    },
    Box {
        /// World pose of the box center.
        pose_matrix: [f64; 16],
        half_extents: [f64; 3],
        albedo: [f64; 3],
    },
}

impl Primitive {
    pub fn boxed(pose: Pose, half_extents: [f64; 3], albedo: [f64; 3]) -> Self {
        let m = pose.to_bytes();
        let mut pose_matrix = [0.0; 16];
        for (i, chunk) in m.chunks_exact(8).enumerate() {
            pose_matrix[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Primitive::Box {
            pose_matrix,
            half_extents,
            albedo,
        }
    }

    pub fn box_pose(&self) -> Option<Pose> {
        match self {
            Primitive::Box { pose_matrix, .. } => {
                let mut bytes = Vec::with_capacity(128);
                for v in pose_matrix {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                Some(Pose::from_bytes(&bytes).expect("stored box pose is valid"))
            }
            _ => None,
        }
    }

    pub fn translated(&self, offset: Vector3<f64>) -> Primitive {
        match self {
            Primitive::Sphere {
                center,
                radius,
                albedo,
            } => Primitive::Sphere {
                center: [
                    center[0] + offset.x,
                    center[1] + offset.y,
                    center[2] + offset.z,
                ],
                radius: *radius,
                albedo: *albedo,
            },
            Primitive::Box {
                half_extents,
                albedo,
                ..
            } => {
                let mut pose = self.box_pose().unwrap();
                pose.translation += offset;
                Primitive::boxed(pose, *half_extents, *albedo)
            }
        }
    }

    /// Signed distance from a world point to the primitive surface.
    pub fn signed_distance(&self, p: Vector3<f64>) -> f64 {
        match self {
            Primitive::Sphere { center, radius, .. } => {
                (p - Vector3::new(center[0], center[1], center[2])).norm() - radius
            }
            Primitive::Box { half_extents, .. } => {
                let pose = self.box_pose().unwrap();
                let local = invert(&pose).transform_point(p);
                let he = Vector3::new(half_extents[0], half_extents[1], half_extents[2]);
                let q = Vector3::new(
                    local.x.abs() - he.x,
                    local.y.abs() - he.y,
                    local.z.abs() - he.z,
                );
                let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
        }
    }
}

/// Static scene description: a table plane plus world objects. The first
/// object is the manipuland that demos grasp and move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub table_height: f64,
    pub table_albedo: [f64; 3],
    pub background_albedo: [f64; 3],
    pub objects: Vec<Primitive>,
}

/// Instance ids in rendered masks.
pub const INSTANCE_BACKGROUND: u16 = 0;
pub const INSTANCE_TABLE: u16 = 1;
/// World objects take 2, 3, ... in scene order.
pub const INSTANCE_OBJECT_BASE: u16 = 2;
pub const INSTANCE_LEFT_GRIPPER: u16 = 100;
pub const INSTANCE_RIGHT_GRIPPER: u16 = 101;

/// One renderable item: a primitive with its instance id.
#[derive(Debug, Clone)]
pub struct RenderItem {
    pub id: u16,
    pub primitive: Primitive,
}

/// Raster output: flat-shaded RGB, z-depth in millimeters (0 = no hit), and
/// per-pixel instance ids.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub rgb: Rgb8Image,
    pub depth: Depth16Image,
    pub instances: Vec<u16>,
}

impl RenderOutput {
    /// Binary mask of one instance id.
    pub fn instance_mask(&self, id: u16, width: u32, height: u32) -> Mask8Image {
        Mask8Image {
            width,
            height,
            data: self.instances.iter().map(|&v| (v == id) as u8).collect(),
        }
    }
}

fn ray_plane_z(origin: Vector3<f64>, dir: Vector3<f64>, z: f64) -> Option<f64> {
    if dir.z.abs() < 1e-15 {
        return None;
    }
    let t = (z - origin.z) / dir.z;
    (t > 1e-9).then_some(t)
}

fn ray_sphere(
    origin: Vector3<f64>,
    dir: Vector3<f64>,
    center: Vector3<f64>,
    radius: f64,
) -> Option<f64> {
    let oc = origin - center;
    let a = dir.dot(&dir);
    let b = 2.0 * oc.dot(&dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    if t0 > 1e-9 {
        Some(t0)
    } else if t1 > 1e-9 {
        Some(t1)
    } else {
        None
    }
}

fn ray_box(origin: Vector3<f64>, dir: Vector3<f64>, pose: &Pose, half: &[f64; 3]) -> Option<f64> {
    // Slab test in the box frame; rigid transforms preserve the ray parameter.
    let inv = invert(pose);
    let o = inv.transform_point(origin);
    let d = inv.rotate(dir);
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i].abs() > half[i] {
                return None;
            }
            continue;
        }
        let inv_d = 1.0 / d[i];
        let mut t0 = (-half[i] - o[i]) * inv_d;
        let mut t1 = (half[i] - o[i]) * inv_d;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near > 1e-9 {
        Some(t_near)
    } else if t_far > 1e-9 {
        Some(t_far)
    } else {
        None
    }
}

/// Per-pixel ray cast: nearest hit wins. `camera` is camera-to-world; depth
/// is the camera-frame z distance, exact to the analytic intersection.
pub fn render(
    table_height: f64,
    table_albedo: [f64; 3],
    background_albedo: [f64; 3],
    items: &[RenderItem],
    camera: &Pose,
    k: &CameraIntrinsics,
) -> RenderOutput {
    let (w, h) = (k.width, k.height);
    let origin = camera.translation;
    let quant = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;

    let rows: Vec<(Vec<u8>, Vec<u16>, Vec<u16>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rgb_row = Vec::with_capacity((w * 3) as usize);
            let mut depth_row = Vec::with_capacity(w as usize);
            let mut inst_row = Vec::with_capacity(w as usize);
            for x in 0..w {
                // Unnormalized direction with camera-frame z = 1, so the ray
                // parameter is the z-depth directly.
                let dir = camera.rotate(pixel_ray(x as f64, y as f64, k));
                let mut best_t = f64::INFINITY;
                let mut best_albedo = background_albedo;
                let mut best_id = INSTANCE_BACKGROUND;
                if let Some(t) = ray_plane_z(origin, dir, table_height) {
                    if t < best_t {
                        best_t = t;
                        best_albedo = table_albedo;
                        best_id = INSTANCE_TABLE;
                    }
                }
                for item in items {
                    let hit = match &item.primitive {
                        Primitive::Sphere { center, radius, .. } => ray_sphere(
                            origin,
                            dir,
                            Vector3::new(center[0], center[1], center[2]),
                            *radius,
                        ),
                        Primitive::Box { half_extents, .. } => {
                            let pose = item.primitive.box_pose().unwrap();
                            ray_box(origin, dir, &pose, half_extents)
                        }
                    };
                    if let Some(t) = hit {
                        if t < best_t {
                            best_t = t;
                            best_albedo = match &item.primitive {
                                Primitive::Sphere { albedo, .. } => *albedo,
                                Primitive::Box { albedo, .. } => *albedo,
                            };
                            best_id = item.id;
                        }
                    }
                }
                rgb_row.push(quant(best_albedo[0]));
                rgb_row.push(quant(best_albedo[1]));
                rgb_row.push(quant(best_albedo[2]));
                if best_t.is_finite() {
                    depth_row.push((best_t * 1000.0).round().clamp(1.0, 65535.0) as u16);
                } else {
                    depth_row.push(0);
                }
                inst_row.push(best_id);
            }
            (rgb_row, depth_row, inst_row)
        })
        .collect();

    let mut rgb = Vec::with_capacity((w * h * 3) as usize);
    let mut depth = Vec::with_capacity((w * h) as usize);
    let mut instances = Vec::with_capacity((w * h) as usize);
    for (r, d, i) in rows {
        rgb.extend_from_slice(&r);
        depth.extend_from_slice(&d);
        instances.extend_from_slice(&i);
    }
    RenderOutput {
        rgb: Rgb8Image {
            width: w,
            height: h,
            data: rgb,
        },
        depth: Depth16Image {
            width: w,
            height: h,
            data: depth,
        },
        instances,
    }
}

/// Minimum distance from a paddle box surface to another primitive's surface.
///
/// Exact for spheres (center-to-box distance minus radius); for box targets
/// the paddle surface is sampled on a fixed grid.
pub fn paddle_distance(paddle_pose: &Pose, paddle_half: &[f64; 3], target: &Primitive) -> f64 {
    match target {
        Primitive::Sphere { center, radius, .. } => {
            let probe = Primitive::boxed(*paddle_pose, *paddle_half, [0.0; 3])
                .signed_distance(Vector3::new(center[0], center[1], center[2]));
            probe - radius
        }
        Primitive::Box { .. } => {
            let mut best = f64::INFINITY;
            let n = 4;
            for fz in [-1.0, 1.0] {
                for iy in 0..=n {
                    for ix in 0..=n {
                        let local = Vector3::new(
                            paddle_half[0] * (2.0 * ix as f64 / n as f64 - 1.0),
                            paddle_half[1] * (2.0 * iy as f64 / n as f64 - 1.0),
                            paddle_half[2] * fz,
                        );
                        let p = paddle_pose.transform_point(local);
                        best = best.min(target.signed_distance(p));
                    }
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k128() -> CameraIntrinsics {
        CameraIntrinsics::new(128.0, 128.0, 63.5, 63.5, 128, 128)
    }

    #[test]
    fn fronto_parallel_plane_has_constant_depth() {
        // Camera at z = +d looking straight down at the z = 0 plane.
        let mut camera = Pose::rot_x(std::f64::consts::PI); // optical axis -z
        camera.translation = Vector3::new(0.0, 0.0, 0.4);
        let out = render(0.0, [0.7; 3], [0.1; 3], &[], &camera, &k128());
        for &d in &out.depth.data {
            assert_eq!(d, 400);
        }
        assert!(out.instances.iter().all(|&i| i == INSTANCE_TABLE));
    }

    #[test]
    fn sphere_center_pixel_depth_matches_hand_computation() {
        // Unit-axis sphere: camera at origin looking +z, sphere at z = 2 with
        // radius 0.35: first hit at 1.65.
        let camera = Pose::identity();
        let items = [RenderItem {
            id: INSTANCE_OBJECT_BASE,
            primitive: Primitive::Sphere {
                center: [0.0, 0.0, 2.0],
                radius: 0.35,
                albedo: [0.8, 0.2, 0.2],
            },
        }];
        let out = render(-10.0, [0.7; 3], [0.1; 3], &items, &camera, &k128());
        // cx = cy = 63.5: the optical axis passes between pixels 63 and 64;
        // both neighbors are within half a pixel of the axis.
        let d = out.depth.get(63, 63);
        assert!((d as i32 - 1650).abs() <= 1, "depth {d}");
        let ray = pixel_ray(63.0, 63.0, &k128());
        let t = ray_sphere(Vector3::zeros(), ray, Vector3::new(0.0, 0.0, 2.0), 0.35).unwrap();
        assert_abs_diff_eq!(t * 1000.0, d as f64, epsilon = 0.51);
    }

    #[test]
    fn empty_scene_renders_background() {
        let camera = Pose::rot_x(-std::f64::consts::FRAC_PI_2); // looking +y horizon
        let out = render(-5.0, [0.7; 3], [0.12, 0.13, 0.14], &[], &camera, &k128());
        // Straight-ahead pixels miss the deep table plane.
        assert_eq!(out.depth.get(63, 63), 0);
        assert_eq!(
            out.instance_mask(INSTANCE_BACKGROUND, 128, 128).get(63, 63),
            true
        );
        assert_eq!(out.rgb.pixel(63, 63), [31, 33, 36]);
    }

    #[test]
    fn rendered_depth_matches_analytic_intersections() {
        let mut camera = Pose::rot_y(0.3);
        camera.translation = Vector3::new(-0.2, 0.1, 0.5);
        let sphere = Primitive::Sphere {
            center: [0.1, 0.05, 1.4],
            radius: 0.2,
            albedo: [0.9, 0.1, 0.1],
        };
        let bx = Primitive::boxed(
            Pose::from_translation(Vector3::new(-0.3, 0.0, 1.2)),
            [0.1, 0.15, 0.05],
            [0.1, 0.9, 0.1],
        );
        let items = [
            RenderItem {
                id: 2,
                primitive: sphere.clone(),
            },
            RenderItem {
                id: 3,
                primitive: bx.clone(),
            },
        ];
        let k = k128();
        let out = render(-0.5, [0.7; 3], [0.1; 3], &items, &camera, &k);
        for (x, y) in [(20u32, 30u32), (64, 64), (90, 100), (5, 120)] {
            let dir = camera.rotate(pixel_ray(x as f64, y as f64, &k));
            let mut expected = f64::INFINITY;
            if let Some(t) = ray_plane_z(camera.translation, dir, -0.5) {
                expected = expected.min(t);
            }
            if let Some(t) = ray_sphere(camera.translation, dir, Vector3::new(0.1, 0.05, 1.4), 0.2)
            {
                expected = expected.min(t);
            }
            if let Some(t) = ray_box(
                camera.translation,
                dir,
                &bx.box_pose().unwrap(),
                &[0.1, 0.15, 0.05],
            ) {
                expected = expected.min(t);
            }
            let got = out.depth.get(x, y);
            if expected.is_finite() {
                assert!((got as f64 - expected * 1000.0).abs() <= 0.5 + 1e-9);
            } else {
                assert_eq!(got, 0);
            }
        }
    }

    #[test]
    fn signed_distance_of_box_and_sphere() {
        let b = Primitive::boxed(Pose::identity(), [0.1, 0.2, 0.3], [0.0; 3]);
        assert_abs_diff_eq!(
            b.signed_distance(Vector3::new(0.3, 0.0, 0.0)),
            0.2,
            epsilon = 1e-12
        );
        assert!(b.signed_distance(Vector3::new(0.0, 0.0, 0.0)) < 0.0);
        let s = Primitive::Sphere {
            center: [1.0, 0.0, 0.0],
            radius: 0.5,
            albedo: [0.0; 3],
        };
        assert_abs_diff_eq!(
            s.signed_distance(Vector3::new(2.0, 0.0, 0.0)),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn paddle_sphere_distance_is_exact() {
        let paddle = Pose::from_translation(Vector3::new(0.0, 0.0, 0.0));
        let half = [0.035, 0.035, 0.005];
        let target = Primitive::Sphere {
            center: [0.0, 0.0, 0.105],
            radius: 0.05,
            albedo: [0.0; 3],
        };
        // Sphere center 0.105 ahead, paddle face at 0.005: gap = 0.105 − 0.005 − 0.05.
        assert_abs_diff_eq!(
            paddle_distance(&paddle, &half, &target),
            0.05,
            epsilon = 1e-12
        );
    }
}
