//! SE(3) pose algebra and the pinhole camera model.
//!
//! Poses are rigid transforms stored as a rotation matrix plus a translation
//! vector (meters). All camera poses in this crate are camera-to-world:
//! `pose.transform_point(p_cam)` maps a camera-frame point into the world
//! frame. Angles cross module boundaries in degrees; internal math is radians.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Drift threshold above which a composed rotation is re-orthonormalized.
const ORTHO_DRIFT_LIMIT: f64 = 1e-7;

/// Number of bytes in a serialized pose (16 little-endian f64).
pub const POSE_BYTES: usize = 16 * 8;

/// Number of bytes in serialized intrinsics (6 little-endian f64).
pub const INTRINSICS_BYTES: usize = 6 * 8;

#[derive(Debug, Error)]
pub enum GeometryError {
    /// Projection or unprojection was asked for a point at or behind the camera.
    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),
    /// A serialized pose or intrinsics blob had the wrong length or content.
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),
}

/// A rigid SE(3) transform: orthonormal rotation plus translation in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pure translation, identity rotation.
    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about an arbitrary axis (need not be unit length) by `angle` radians.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let rotation = match nalgebra::Unit::try_new(axis, 1e-12) {
            Some(unit) => nalgebra::Rotation3::from_axis_angle(&unit, angle).into_inner(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(Vector3::z(), angle)
    }

    /// Applies the transform to a point expressed in the local frame.
    pub fn transform_point(&self, p: Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotates a direction vector (ignores translation).
    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Max-norm of `RᵀR − I`, a measure of orthonormality drift.
    pub fn ortho_drift(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Geodesic rotation angle in radians.
    pub fn rotation_angle(&self) -> f64 {
        let trace = self.rotation.trace();
        ((trace - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }

    /// Axis-angle (log-map) vector of the rotation part.
    pub fn rotation_log(&self) -> Vector3<f64> {
        rotation_log(&self.rotation)
    }

    /// Nearest orthonormal rotation via polar decomposition.
    pub fn renormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // Flip the singular direction with the smallest singular value.
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self {
            rotation: r,
            translation: self.translation,
        }
    }

    /// Serializes as a 4×4 row-major homogeneous matrix, 16 little-endian f64.
    pub fn to_bytes(&self) -> [u8; POSE_BYTES] {
        let mut out = [0u8; POSE_BYTES];
        let m = self.to_homogeneous_rows();
        for (i, value) in m.iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&value.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GeometryError> {
        if bytes.len() != POSE_BYTES {
            return Err(GeometryError::InvalidEncoding(format!(
                "pose needs {POSE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut m = [0.0f64; 16];
        for (i, value) in m.iter_mut().enumerate() {
            let mut raw = [0u8; 8];
            raw.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            *value = f64::from_le_bytes(raw);
        }
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(GeometryError::InvalidEncoding(
                "bottom homogeneous row is not (0,0,0,1)".into(),
            ));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        Ok(Self {
            rotation,
            translation,
        })
    }

    fn to_homogeneous_rows(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }
}

/// Rigid composition: applying `b` then `a` (the homogeneous product `a·b`).
///
/// Long composition chains drift; the result is re-orthonormalized when the
/// drift exceeds 1e-7.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    let out = Pose {
        rotation: a.rotation * b.rotation,
        translation: a.rotation * b.translation + a.translation,
    };
    if out.ortho_drift() > ORTHO_DRIFT_LIMIT {
        out.renormalized()
    } else {
        out
    }
}

/// Analytic rigid inverse: `(Rᵀ, −Rᵀt)`.
pub fn invert(p: &Pose) -> Pose {
    let rotation = p.rotation.transpose();
    Pose {
        rotation,
        translation: -(rotation * p.translation),
    }
}

/// Relative transform from `a` to `b`: `a⁻¹·b`, so `compose(a, result) = b`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Pose {
    compose(&invert(a), b)
}

/// Maps a camera-frame perturbation onto the end-effector: `C·T·C⁻¹·E`.
///
/// With an identity-rotation `perturbation`, the result keeps the
/// end-effector rotation and offsets its position by `R_C·t`.
pub fn perturb_eef(camera: &Pose, perturbation: &Pose, eef: &Pose) -> Pose {
    compose(
        &compose(&compose(camera, perturbation), &invert(camera)),
        eef,
    )
}

/// SO(3) log map: axis-angle vector of a rotation matrix.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(*r);
    nalgebra::UnitQuaternion::from_rotation_matrix(&rot).scaled_axis()
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad.to_degrees()
}

/// Pinhole intrinsics in pixels. No distortion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        debug_assert!(k.is_valid(), "invalid intrinsics {k:?}");
        k
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64
    }

    pub fn to_bytes(&self) -> [u8; INTRINSICS_BYTES] {
        let values = [
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width as f64,
            self.height as f64,
        ];
        let mut out = [0u8; INTRINSICS_BYTES];
        for (i, value) in values.iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&value.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, GeometryError> {
        if bytes.len() != INTRINSICS_BYTES {
            return Err(GeometryError::InvalidEncoding(format!(
                "intrinsics need {INTRINSICS_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let mut v = [0.0f64; 6];
        for (i, value) in v.iter_mut().enumerate() {
            let mut raw = [0u8; 8];
            raw.copy_from_slice(&bytes[i * 8..(i + 1) * 8]);
            *value = f64::from_le_bytes(raw);
        }
        let k = Self {
            fx: v[0],
            fy: v[1],
            cx: v[2],
            cy: v[3],
            width: v[4] as u32,
            height: v[5] as u32,
        };
        if !k.is_valid() {
            return Err(GeometryError::InvalidEncoding(format!(
                "decoded intrinsics are invalid: {k:?}"
            )));
        }
        Ok(k)
    }
}

/// Projects a camera-frame point to a continuous pixel coordinate plus depth.
pub fn project(
    point: Vector3<f64>,
    k: &CameraIntrinsics,
) -> Result<(f64, f64, f64), GeometryError> {
    if point.z <= 0.0 {
        return Err(GeometryError::NonPositiveDepth(point.z));
    }
    let u = k.fx * point.x / point.z + k.cx;
    let v = k.fy * point.y / point.z + k.cy;
    Ok((u, v, point.z))
}

/// Inverse of [`project`]: pixel plus depth back to a camera-frame point.
pub fn unproject(
    u: f64,
    v: f64,
    depth: f64,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>, GeometryError> {
    if depth <= 0.0 {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(Vector3::new(
        (u - k.cx) / k.fx * depth,
        (v - k.cy) / k.fy * depth,
        depth,
    ))
}

/// Unit ray direction through a pixel (z = 1 before normalization is not applied).
pub fn pixel_ray(u: f64, v: f64, k: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
}
