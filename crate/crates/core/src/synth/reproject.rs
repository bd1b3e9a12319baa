//! Depth-based forward warping into a perturbed camera.
//!
//! Convention (tested, not inherited from any dataset): with `Δp = C_a⁻¹·C_b`
//! the target-frame point is `Δp⁻¹ ·` source-frame point. Source pixels splat
//! into the target with nearest-pixel rounding and z-buffering. Pixels with
//! invalid (zero) depth are treated as being at infinity and warp by rotation
//! only, so an identity `Δp` reproduces the input exactly with an all-true
//! validity mask.
//!
//! A splat is only marked valid when its warp field is locally coherent: if a
//! 4-neighbor of the source pixel lands farther than `stretch_limit` pixels
//! away, the splat straddles a depth discontinuity and is dropped from the
//! validity mask (disocclusion boundaries are where forward warping lies).
//! Unobserved and unreliable target pixels are zero-filled and invalid.

use super::{ImagePair, SynthError, SynthesizedViews, Synthesizer};
use crate::geometry::{invert, pixel_ray, project, unproject, CameraIntrinsics, Pose};
use crate::image::{Depth16Image, Mask8Image, RgbImageF};

/// Deterministic depth-reprojection backend.
#[derive(Debug, Clone)]
pub struct ReprojectionSynthesizer {
    /// Warp-field divergence (pixels) beyond which a splat is unreliable.
    pub stretch_limit: f64,
}

impl Default for ReprojectionSynthesizer {
    fn default() -> Self {
        Self { stretch_limit: 1.5 }
    }
}

/// Warps one source pixel with finite depth through `Δp`.
///
/// Returns the continuous target pixel plus target-frame depth, or `None`
/// when the point falls behind the target camera.
pub fn warp_pixel(
    u: f64,
    v: f64,
    depth_m: f64,
    k: &CameraIntrinsics,
    dp: &Pose,
) -> Option<(f64, f64, f64)> {
    let p_src = unproject(u, v, depth_m, k).ok()?;
    let p_tgt = invert(dp).transform_point(p_src);
    project(p_tgt, k).ok()
}

/// Rotation-only warp for at-infinity (invalid-depth) pixels.
fn warp_direction(u: f64, v: f64, k: &CameraIntrinsics, dp: &Pose) -> Option<(f64, f64)> {
    let ray = pixel_ray(u, v, k);
    let r = invert(dp).rotate(ray);
    if r.z <= 0.0 {
        return None;
    }
    Some((k.fx * r.x / r.z + k.cx, k.fy * r.y / r.z + k.cy))
}

#[derive(Clone, Copy)]
struct Splat {
    /// Target-frame depth; +inf for at-infinity pixels.
    depth: f64,
    src_x: u32,
    src_y: u32,
    reliable: bool,
}

fn warp_side(
    rgb: &RgbImageF,
    depth: &Depth16Image,
    mask: Option<&Mask8Image>,
    k: &CameraIntrinsics,
    dp: &Pose,
    stretch_limit: f64,
) -> Result<(RgbImageF, Mask8Image, Depth16Image, Option<Mask8Image>), SynthError> {
    let (w, h) = (rgb.width, rgb.height);
    if depth.width != w || depth.height != h {
        return Err(SynthError::DimensionMismatch(format!(
            "rgb {w}x{h} vs depth {}x{}",
            depth.width, depth.height
        )));
    }

    // Continuous warp positions per source pixel.
    let mut warped: Vec<Option<(f64, f64, f64)>> = vec![None; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let idx = (y * w + x) as usize;
            warped[idx] = match depth.meters(x, y) {
                Some(d) => warp_pixel(x as f64, y as f64, d, k, dp),
                None => {
                    warp_direction(x as f64, y as f64, k, dp).map(|(u, v)| (u, v, f64::INFINITY))
                }
            };
        }
    }

    // A splat is reliable when every warped 4-neighbor lands nearby.
    let reliable = |x: u32, y: u32| -> bool {
        let Some((u, v, _)) = warped[(y * w + x) as usize] else {
            return false;
        };
        let neighbors = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= w || ny >= h {
                continue;
            }
            match warped[(ny * w + nx) as usize] {
                Some((nu, nv, _)) => {
                    let d2 = (nu - u) * (nu - u) + (nv - v) * (nv - v);
                    if d2 > stretch_limit * stretch_limit {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    };

    let mut zbuf: Vec<Option<Splat>> = vec![None; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let Some((u, v, d)) = warped[(y * w + x) as usize] else {
                continue;
            };
            let tx = u.round();
            let ty = v.round();
            if tx < 0.0 || ty < 0.0 || tx >= w as f64 || ty >= h as f64 {
                continue;
            }
            let tidx = (ty as u32 * w + tx as u32) as usize;
            let wins = match &zbuf[tidx] {
                Some(existing) => d < existing.depth,
                None => true,
            };
            if wins {
                zbuf[tidx] = Some(Splat {
                    depth: d,
                    src_x: x,
                    src_y: y,
                    reliable: reliable(x, y),
                });
            }
        }
    }

    let mut out_rgb = RgbImageF::new(w, h);
    let mut out_valid = Mask8Image::new(w, h);
    let mut out_depth = Depth16Image::new(w, h);
    let mut out_mask = mask.map(|_| Mask8Image::new(w, h));
    for y in 0..h {
        for x in 0..w {
            let tidx = (y * w + x) as usize;
            let Some(splat) = &zbuf[tidx] else { continue };
            if !splat.reliable {
                continue;
            }
            out_valid.set(x, y, true);
            out_rgb.set_pixel(x, y, rgb.pixel(splat.src_x, splat.src_y));
            if splat.depth.is_finite() {
                out_depth.set(
                    x,
                    y,
                    (splat.depth * 1000.0).round().clamp(0.0, 65535.0) as u16,
                );
            }
            if let (Some(om), Some(m)) = (&mut out_mask, mask) {
                om.set(x, y, m.get(splat.src_x, splat.src_y));
            }
        }
    }
    Ok((out_rgb, out_valid, out_depth, out_mask))
}

impl Synthesizer for ReprojectionSynthesizer {
    fn synthesize(
        &self,
        src: &ImagePair,
        left_k: &CameraIntrinsics,
        right_k: &CameraIntrinsics,
        dp_left: &Pose,
        dp_right: &Pose,
        _seed: u64,
    ) -> Result<SynthesizedViews, SynthError> {
        let left_depth = src.left_depth.as_ref().ok_or(SynthError::MissingDepth)?;
        let right_depth = src.right_depth.as_ref().ok_or(SynthError::MissingDepth)?;
        let (left, left_valid, ld, lm) = warp_side(
            &src.left,
            left_depth,
            src.left_mask.as_ref(),
            left_k,
            dp_left,
            self.stretch_limit,
        )?;
        let (right, right_valid, rd, rm) = warp_side(
            &src.right,
            right_depth,
            src.right_mask.as_ref(),
            right_k,
            dp_right,
            self.stretch_limit,
        )?;
        Ok(SynthesizedViews {
            left,
            right,
            left_valid,
            right_valid,
            left_depth: Some(ld),
            right_depth: Some(rd),
            left_mask: lm,
            right_mask: rm,
        })
    }
}
