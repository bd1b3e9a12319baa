//! Contact-phase labeling.
//!
//! Trajectories decompose into contactless and contact-rich states. The
//! primary detector combines the gripper mask with depth: after filling mask
//! holes and rejecting depth outliers in a ring around the gripper, a frame is
//! contact-rich when non-gripper geometry sits within `contact_gap` of the
//! gripper's own depth. The fallback detector compares the gripper region
//! against its appearance in a template frame using SSIM; a drop below the
//! threshold means the gripper is no longer fully visible.

use crate::dataset::{Side, Trajectory};
use crate::image::{Depth16Image, GrayImage, Mask8Image, Rgb8Image};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("gripper mask has {pixels} pixels, need at least {required}")]
    EmptyMask { pixels: usize, required: usize },
    #[error("degenerate depth: {invalid_fraction:.2} of ring pixels invalid")]
    DegenerateDepth { invalid_fraction: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("depth images required but absent")]
    MissingDepth,
    #[error("gripper masks required but absent")]
    MissingMask,
    #[error("at timestep {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<ContactError>,
    },
}

/// Per-timestep contact phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactPhase {
    Contactless,
    ContactRich,
}

/// Smoothed per-timestep labels plus the first contact-rich index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContactLabel {
    pub labels: Vec<ContactPhase>,
    pub onset_index: Option<usize>,
}

impl ContactLabel {
    pub fn from_phases(labels: Vec<ContactPhase>) -> Self {
        let onset_index = labels.iter().position(|&p| p == ContactPhase::ContactRich);
        Self {
            labels,
            onset_index,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One byte per timestep: 0 contactless, 1 contact-rich.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.labels
            .iter()
            .map(|&p| (p == ContactPhase::ContactRich) as u8)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self::from_phases(
            bytes
                .iter()
                .map(|&b| {
                    if b != 0 {
                        ContactPhase::ContactRich
                    } else {
                        ContactPhase::Contactless
                    }
                })
                .collect(),
        )
    }

    /// Maximal runs as (phase, start, length).
    pub fn runs(&self) -> Vec<(ContactPhase, usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.labels.len() {
            let phase = self.labels[i];
            let start = i;
            while i < self.labels.len() && self.labels[i] == phase {
                i += 1;
            }
            out.push((phase, start, i - start));
        }
        out
    }

    /// Human-readable structured-text summary (onset index, phase runs).
    pub fn summary_text(&self) -> String {
        let mut out = String::from("# contact label summary\n");
        match self.onset_index {
            Some(i) => out.push_str(&format!("onset_index = {i}\n")),
            None => out.push_str("onset_index = \"none\"\n"),
        }
        out.push_str(&format!("steps = {}\n", self.labels.len()));
        for (phase, start, len) in self.runs() {
            let name = match phase {
                ContactPhase::Contactless => "contactless",
                ContactPhase::ContactRich => "contact-rich",
            };
            out.push_str(&format!(
                "\n[[runs]]\nphase = \"{name}\"\nstart = {start}\nlen = {len}\n"
            ));
        }
        out
    }
}

/// Detector parameters. Defaults match the documented pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactConfig {
    /// Ring depth z-score beyond which pixels are discarded.
    pub z_max: f64,
    /// Contact when (min ring depth − median gripper depth) falls below this, meters.
    pub contact_gap: f64,
    /// Minimum raw gripper-mask pixel count.
    pub min_mask_pixels: usize,
    /// 3×3 closing iterations for mask hole filling.
    pub closing_iterations: usize,
    /// Ring width in dilation rounds around the filled mask.
    pub ring_width: usize,
    /// SSIM below this means the gripper is not fully visible.
    pub ssim_threshold: f64,
    /// Padding around the template-frame mask bounding box, pixels.
    pub roi_padding: u32,
    /// Template frame index for the SSIM path.
    pub template_index: usize,
    /// Temporal median filter window (odd).
    pub median_window: usize,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            z_max: 2.5,
            contact_gap: 0.01,
            min_mask_pixels: 50,
            closing_iterations: 2,
            ring_width: 4,
            ssim_threshold: 0.75,
            roi_padding: 4,
            template_index: 0,
            median_window: 5,
        }
    }
}

/// SSIM parameters (standard constants, unit dynamic range).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SsimConfig {
    pub window: u32,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 7,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

/// Which detector drives [`label_trajectory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactMethod {
    /// Depth when the trajectory has depth images, SSIM otherwise.
    Auto,
    Depth,
    Ssim,
}

/// Depth-based per-frame contact test.
///
/// Pipeline: fill gripper-mask holes (3×3 closing), form a dilated ring
/// around the mask, reject ring depths with |z-score| > `z_max`, then compare
/// the minimum surviving ring depth against the median gripper depth.
pub fn detect_contact_depth(
    depth: &Depth16Image,
    mask: &Mask8Image,
    cfg: &ContactConfig,
) -> Result<bool, ContactError> {
    if depth.width != mask.width || depth.height != mask.height {
        return Err(ContactError::DimensionMismatch(format!(
            "depth {}x{} vs mask {}x{}",
            depth.width, depth.height, mask.width, mask.height
        )));
    }
    if mask.count() < cfg.min_mask_pixels {
        return Err(ContactError::EmptyMask {
            pixels: mask.count(),
            required: cfg.min_mask_pixels,
        });
    }

    let filled = mask.closed(cfg.closing_iterations);
    let ring = filled.ring(cfg.ring_width);

    let mut ring_depths = Vec::new();
    let mut ring_total = 0usize;
    for y in 0..depth.height {
        for x in 0..depth.width {
            if ring.get(x, y) {
                ring_total += 1;
                if let Some(m) = depth.meters(x, y) {
                    ring_depths.push(m);
                }
            }
        }
    }
    let invalid_fraction = if ring_total == 0 {
        1.0
    } else {
        1.0 - ring_depths.len() as f64 / ring_total as f64
    };
    if invalid_fraction > 0.9 {
        return Err(ContactError::DegenerateDepth { invalid_fraction });
    }

    // z-score outlier rejection inside the ring.
    let n = ring_depths.len() as f64;
    let mean = ring_depths.iter().sum::<f64>() / n;
    let var = ring_depths.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    let surviving_min = ring_depths
        .iter()
        .copied()
        .filter(|d| std <= 1e-12 || ((d - mean) / std).abs() <= cfg.z_max)
        .fold(f64::INFINITY, f64::min);
    if !surviving_min.is_finite() {
        return Err(ContactError::DegenerateDepth { invalid_fraction });
    }

    let mut gripper_depths = Vec::new();
    for y in 0..depth.height {
        for x in 0..depth.width {
            if filled.get(x, y) {
                if let Some(m) = depth.meters(x, y) {
                    gripper_depths.push(m);
                }
            }
        }
    }
    if gripper_depths.is_empty() {
        return Err(ContactError::DegenerateDepth {
            invalid_fraction: 1.0,
        });
    }
    gripper_depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = gripper_depths[gripper_depths.len() / 2];

    Ok(surviving_min - median < cfg.contact_gap)
}

/// Mean local SSIM over all fully interior windows.
///
/// Uniform square window; images smaller than the window fall back to one
/// window covering the whole image.
pub fn ssim(a: &GrayImage, b: &GrayImage, cfg: &SsimConfig) -> Result<f64, ContactError> {
    if a.width != b.width || a.height != b.height {
        return Err(ContactError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let win = cfg.window.min(a.width).min(a.height).max(1);
    let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
    let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);

    // Summed-area tables with a zero row/column of padding.
    let w = a.width as usize;
    let h = a.height as usize;
    let mut sa = vec![0.0f64; (w + 1) * (h + 1)];
    let mut sb = vec![0.0f64; (w + 1) * (h + 1)];
    let mut saa = vec![0.0f64; (w + 1) * (h + 1)];
    let mut sbb = vec![0.0f64; (w + 1) * (h + 1)];
    let mut sab = vec![0.0f64; (w + 1) * (h + 1)];
    let stride = w + 1;
    for y in 0..h {
        for x in 0..w {
            let va = a.data[y * w + x];
            let vb = b.data[y * w + x];
            let i = (y + 1) * stride + (x + 1);
            let up = y * stride + (x + 1);
            let left = (y + 1) * stride + x;
            let diag = y * stride + x;
            sa[i] = va + sa[up] + sa[left] - sa[diag];
            sb[i] = vb + sb[up] + sb[left] - sb[diag];
            saa[i] = va * va + saa[up] + saa[left] - saa[diag];
            sbb[i] = vb * vb + sbb[up] + sbb[left] - sbb[diag];
            sab[i] = va * vb + sab[up] + sab[left] - sab[diag];
        }
    }
    let window_sum = |t: &[f64], x0: usize, y0: usize, wn: usize| -> f64 {
        t[(y0 + wn) * stride + (x0 + wn)] + t[y0 * stride + x0]
            - t[y0 * stride + (x0 + wn)]
            - t[(y0 + wn) * stride + x0]
    };

    let wn = win as usize;
    let n = (wn * wn) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - wn) {
        for x0 in 0..=(w - wn) {
            let mu_a = window_sum(&sa, x0, y0, wn) / n;
            let mu_b = window_sum(&sb, x0, y0, wn) / n;
            let var_a = window_sum(&saa, x0, y0, wn) / n - mu_a * mu_a;
            let var_b = window_sum(&sbb, x0, y0, wn) / n - mu_b * mu_b;
            let cov = window_sum(&sab, x0, y0, wn) / n - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Rectangular region of interest, inclusive origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x0: u32,
    pub y0: u32,
    pub width: u32,
    pub height: u32,
}

impl Roi {
    /// Mask bounding box expanded by `padding`, clamped to image bounds.
    pub fn from_mask(mask: &Mask8Image, padding: u32) -> Option<Roi> {
        let (x0, y0, x1, y1) = mask.bounding_box()?;
        let rx0 = x0.saturating_sub(padding);
        let ry0 = y0.saturating_sub(padding);
        let rx1 = (x1 + padding).min(mask.width - 1);
        let ry1 = (y1 + padding).min(mask.height - 1);
        Some(Roi {
            x0: rx0,
            y0: ry0,
            width: rx1 - rx0 + 1,
            height: ry1 - ry0 + 1,
        })
    }

    pub fn crop(&self, img: &GrayImage) -> GrayImage {
        img.crop(self.x0, self.y0, self.width, self.height)
    }
}

/// SSIM-based per-frame contact test: compares the gripper region against a
/// template of the fully visible gripper; scores below the threshold are
/// treated as contact.
pub fn detect_contact_ssim(
    frame: &Rgb8Image,
    template: &Rgb8Image,
    roi: Roi,
    cfg: &ContactConfig,
) -> Result<bool, ContactError> {
    if frame.width != template.width || frame.height != template.height {
        return Err(ContactError::DimensionMismatch(format!(
            "frame {}x{} vs template {}x{}",
            frame.width, frame.height, template.width, template.height
        )));
    }
    let a = roi.crop(&frame.to_gray());
    let b = roi.crop(&template.to_gray());
    let score = ssim(&a, &b, &SsimConfig::default())?;
    Ok(score < cfg.ssim_threshold)
}

/// Majority filter over a clamped window, then suppression of runs shorter
/// than three frames.
fn smooth(raw: &[bool], window: usize) -> Vec<bool> {
    if raw.is_empty() {
        return Vec::new();
    }
    let half = (window / 2) as isize;
    let n = raw.len() as isize;
    let mut filtered: Vec<bool> = (0..n)
        .map(|i| {
            let mut set = 0usize;
            let mut total = 0usize;
            for d in -half..=half {
                let j = (i + d).clamp(0, n - 1) as usize;
                set += raw[j] as usize;
                total += 1;
            }
            set * 2 > total
        })
        .collect();

    // No contact or contactless run shorter than 3 frames may survive, except
    // a run covering the whole trajectory.
    loop {
        let mut runs = Vec::new();
        let mut i = 0usize;
        while i < filtered.len() {
            let v = filtered[i];
            let start = i;
            while i < filtered.len() && filtered[i] == v {
                i += 1;
            }
            runs.push((start, i - start));
        }
        if runs.len() <= 1 {
            break;
        }
        let Some(&(start, len)) = runs.iter().find(|&&(_, len)| len < 3) else {
            break;
        };
        for v in filtered[start..start + len].iter_mut() {
            *v = !*v;
        }
    }
    filtered
}

/// Labels a whole trajectory: per-arm detection, OR across arms, temporal
/// smoothing, onset extraction. Per-frame failures carry the timestep index.
pub fn label_trajectory(
    traj: &Trajectory,
    cfg: &ContactConfig,
    method: ContactMethod,
) -> Result<ContactLabel, ContactError> {
    if traj.steps.is_empty() {
        return Ok(ContactLabel::from_phases(Vec::new()));
    }
    let method = match method {
        ContactMethod::Auto => {
            if traj.has_depth() {
                ContactMethod::Depth
            } else {
                ContactMethod::Ssim
            }
        }
        m => m,
    };
    if !traj.has_masks() {
        return Err(ContactError::MissingMask);
    }

    let per_frame: Vec<Result<bool, ContactError>> = match method {
        ContactMethod::Depth => {
            if !traj.has_depth() {
                return Err(ContactError::MissingDepth);
            }
            traj.steps
                .par_iter()
                .map(|step| {
                    let mut contact = false;
                    for side in Side::BOTH {
                        let view = step.view(side);
                        contact |= detect_contact_depth(
                            view.depth.as_ref().unwrap(),
                            view.mask.as_ref().unwrap(),
                            cfg,
                        )?;
                    }
                    Ok(contact)
                })
                .collect()
        }
        ContactMethod::Ssim => {
            let t_index = cfg.template_index.min(traj.steps.len() - 1);
            let template_step = &traj.steps[t_index];
            let mut rois = Vec::new();
            for side in Side::BOTH {
                let mask = template_step.view(side).mask.as_ref().unwrap();
                let roi = Roi::from_mask(mask, cfg.roi_padding).ok_or(ContactError::EmptyMask {
                    pixels: 0,
                    required: cfg.min_mask_pixels,
                })?;
                rois.push(roi);
            }
            traj.steps
                .par_iter()
                .map(|step| {
                    let mut contact = false;
                    for (i, side) in Side::BOTH.iter().enumerate() {
                        contact |= detect_contact_ssim(
                            &step.view(*side).rgb,
                            &template_step.view(*side).rgb,
                            rois[i],
                            cfg,
                        )?;
                    }
                    Ok(contact)
                })
                .collect()
        }
        ContactMethod::Auto => unreachable!(),
    };

    let mut raw = Vec::with_capacity(per_frame.len());
    for (index, r) in per_frame.into_iter().enumerate() {
        match r {
            Ok(v) => raw.push(v),
            Err(e) => {
                return Err(ContactError::AtStep {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }

    let smoothed = smooth(&raw, cfg.median_window);
    Ok(ContactLabel::from_phases(
        smoothed
            .into_iter()
            .map(|v| {
                if v {
                    ContactPhase::ContactRich
                } else {
                    ContactPhase::Contactless
                }
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive reference SSIM: direct per-window loops, no summed-area tables.
    fn ssim_oracle(a: &GrayImage, b: &GrayImage, cfg: &SsimConfig) -> f64 {
        let win = cfg.window.min(a.width).min(a.height).max(1) as usize;
        let c1 = (cfg.k1 * cfg.dynamic_range).powi(2);
        let c2 = (cfg.k2 * cfg.dynamic_range).powi(2);
        let (w, h) = (a.width as usize, a.height as usize);
        let n = (win * win) as f64;
        let mut total = 0.0;
        let mut count = 0usize;
        for y0 in 0..=(h - win) {
            for x0 in 0..=(w - win) {
                let (mut s_a, mut s_b, mut s_aa, mut s_bb, mut s_ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in y0..y0 + win {
                    for x in x0..x0 + win {
                        let va = a.data[y * w + x];
                        let vb = b.data[y * w + x];
                        s_a += va;
                        s_b += vb;
                        s_aa += va * va;
                        s_bb += vb * vb;
                        s_ab += va * vb;
                    }
                }
                let mu_a = s_a / n;
                let mu_b = s_b / n;
                let var_a = s_aa / n - mu_a * mu_a;
                let var_b = s_bb / n - mu_b * mu_b;
                let cov = s_ab / n - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    fn random_gray(seed: u64, w: u32, h: u32) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = GrayImage::new(w, h);
        for v in img.data.iter_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        img
    }

    #[test]
    fn ssim_identity_is_exactly_one() {
        let img = random_gray(1, 32, 24);
        assert_eq!(ssim(&img, &img, &SsimConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = random_gray(2, 20, 20);
        let b = random_gray(3, 20, 20);
        let cfg = SsimConfig::default();
        let ab = ssim(&a, &b, &cfg).unwrap();
        let ba = ssim(&b, &a, &cfg).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn ssim_checkerboard_inversion_is_negative() {
        let mut a = GrayImage::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                a.set(x, y, ((x + y) % 2) as f64);
            }
        }
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            *v = 1.0 - *v;
        }
        let score = ssim(&a, &b, &SsimConfig::default()).unwrap();
        assert!(score < 0.0, "score {score}");
    }

    #[test]
    fn ssim_matches_independent_reference() {
        let cfg = SsimConfig::default();
        let a = random_gray(4, 33, 29);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            // Uniform noise with sigma 0.2 (half-width 0.2·√3), clamped to [0,1].
            let half = 0.2 * 3.0f64.sqrt();
            *v = (*v + rng.random_range(-half..half)).clamp(0.0, 1.0);
        }
        let fast = ssim(&a, &b, &cfg).unwrap();
        let slow = ssim_oracle(&a, &b, &cfg);
        assert!((fast - slow).abs() < 1e-6, "fast {fast} slow {slow}");

        let dissimilar = random_gray(6, 33, 29);
        let fast = ssim(&a, &dissimilar, &cfg).unwrap();
        let slow = ssim_oracle(&a, &dissimilar, &cfg);
        assert!((fast - slow).abs() < 1e-6);
    }

    #[test]
    fn ssim_rejects_dimension_mismatch() {
        let a = random_gray(7, 8, 8);
        let b = random_gray(8, 9, 8);
        assert!(matches!(
            ssim(&a, &b, &SsimConfig::default()),
            Err(ContactError::DimensionMismatch(_))
        ));
    }

    fn synthetic_scene(gripper_depth_mm: u16, object_gap_mm: i32) -> (Depth16Image, Mask8Image) {
        // 40×40: a 10×10 gripper block in the center over a 600 mm floor, with
        // an object band approaching from the right at gripper depth + gap.
        // The band fills about a third of the ring, like a grasped object.
        let (w, h) = (40u32, 40u32);
        let mut depth = Depth16Image::new(w, h);
        let mut mask = Mask8Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                depth.set(x, y, 600);
            }
        }
        let object = (gripper_depth_mm as i32 + object_gap_mm).max(1) as u16;
        for y in 0..h {
            for x in 25..29 {
                depth.set(x, y, object);
            }
        }
        for y in 15..25 {
            for x in 15..25 {
                mask.set(x, y, true);
                depth.set(x, y, gripper_depth_mm);
            }
        }
        (depth, mask)
    }

    #[test]
    fn depth_contact_detects_adjacent_object() {
        let cfg = ContactConfig::default();
        let (depth, mask) = synthetic_scene(200, 2);
        assert!(detect_contact_depth(&depth, &mask, &cfg).unwrap());
    }

    #[test]
    fn depth_contact_rejects_distant_object() {
        let cfg = ContactConfig::default();
        let (depth, mask) = synthetic_scene(200, 100);
        assert!(!detect_contact_depth(&depth, &mask, &cfg).unwrap());
    }

    #[test]
    fn depth_contact_monotone_in_gap() {
        let (depth, mask) = synthetic_scene(200, 8);
        let mut cfg = ContactConfig::default();
        for gap in [0.002, 0.005, 0.009, 0.012, 0.02, 0.05] {
            cfg.contact_gap = gap;
            let contact = detect_contact_depth(&depth, &mask, &cfg).unwrap();
            // 8 mm offset: contact exactly when gap > 0.008.
            assert_eq!(contact, gap > 0.008, "gap {gap}");
        }
    }

    #[test]
    fn all_invalid_depth_is_degenerate() {
        let cfg = ContactConfig::default();
        let (_, mask) = synthetic_scene(200, 5);
        let depth = Depth16Image::new(40, 40);
        assert!(matches!(
            detect_contact_depth(&depth, &mask, &cfg),
            Err(ContactError::DegenerateDepth { .. })
        ));
    }

    #[test]
    fn sparse_mask_is_empty_mask_error() {
        let cfg = ContactConfig::default();
        let (depth, _) = synthetic_scene(200, 5);
        let mut mask = Mask8Image::new(40, 40);
        mask.set(20, 20, true);
        assert!(matches!(
            detect_contact_depth(&depth, &mask, &cfg),
            Err(ContactError::EmptyMask { pixels: 1, .. })
        ));
    }

    #[test]
    fn ssim_detector_self_template_is_contactless() {
        let mut frame = Rgb8Image::new(32, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        rng.fill(frame.data.as_mut_slice());
        let mut mask = Mask8Image::new(32, 32);
        for y in 10..20 {
            for x in 10..20 {
                mask.set(x, y, true);
            }
        }
        let roi = Roi::from_mask(&mask, 4).unwrap();
        let cfg = ContactConfig::default();
        assert!(!detect_contact_ssim(&frame, &frame, roi, &cfg).unwrap());
    }

    #[test]
    fn ssim_detector_threshold_dominance() {
        let mut frame = Rgb8Image::new(32, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        rng.fill(frame.data.as_mut_slice());
        let mut mask = Mask8Image::new(32, 32);
        for y in 8..24 {
            for x in 8..24 {
                mask.set(x, y, true);
            }
        }
        let roi = Roi::from_mask(&mask, 2).unwrap();
        let cfg = ContactConfig {
            ssim_threshold: 1.01,
            ..ContactConfig::default()
        };
        // Threshold above the SSIM range forces contact even on self-comparison.
        assert!(detect_contact_ssim(&frame, &frame, roi, &cfg).unwrap());
    }

    #[test]
    fn smoothing_removes_single_frame_flips() {
        let mut raw = vec![false; 20];
        raw[7] = true; // isolated flip
        for v in raw[12..20].iter_mut() {
            *v = true;
        }
        raw[14] = false; // isolated dropout
        let out = smooth(&raw, 5);
        assert!(!out[7]);
        assert!(out[13] && out[14] && out[15]);
        let label = ContactLabel::from_phases(
            out.iter()
                .map(|&v| {
                    if v {
                        ContactPhase::ContactRich
                    } else {
                        ContactPhase::Contactless
                    }
                })
                .collect(),
        );
        for (_, _, len) in label.runs() {
            assert!(len >= 3);
        }
    }

    #[test]
    fn smoothing_enforces_min_run_even_in_adversarial_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for len in [1usize, 2, 3, 5, 17, 64] {
            for _ in 0..50 {
                let raw: Vec<bool> = (0..len).map(|_| rng.random()).collect();
                let out = smooth(&raw, 5);
                let mut i = 0;
                let mut runs = Vec::new();
                while i < out.len() {
                    let v = out[i];
                    let start = i;
                    while i < out.len() && out[i] == v {
                        i += 1;
                    }
                    runs.push(i - start);
                }
                if runs.len() > 1 {
                    assert!(runs.iter().all(|&r| r >= 3), "runs {runs:?} from {raw:?}");
                }
            }
        }
    }

    #[test]
    fn labels_serialize_round_trip() {
        let label = ContactLabel::from_phases(vec![
            ContactPhase::Contactless,
            ContactPhase::Contactless,
            ContactPhase::ContactRich,
            ContactPhase::ContactRich,
        ]);
        let bytes = label.to_bytes();
        assert_eq!(bytes, vec![0, 0, 1, 1]);
        assert_eq!(ContactLabel::from_bytes(&bytes), label);
        assert_eq!(label.onset_index, Some(2));
        let summary = label.summary_text();
        assert!(summary.contains("onset_index = 2"));
        assert!(summary.contains("contact-rich"));
    }

    #[test]
    fn empty_trajectory_labels_are_empty() {
        use crate::dataset::{Provenance, TrajectoryMeta};
        use crate::geometry::{CameraIntrinsics, Pose};
        use crate::kinematics::simulator_arm;
        let arm = simulator_arm(Pose::identity(), Pose::identity());
        let traj = Trajectory {
            steps: Vec::new(),
            left_arm: arm.clone(),
            right_arm: arm,
            left_intrinsics: CameraIntrinsics::new(16.0, 16.0, 8.0, 8.0, 16, 16),
            right_intrinsics: CameraIntrinsics::new(16.0, 16.0, 8.0, 8.0, 16, 16),
            meta: TrajectoryMeta {
                task: "t".into(),
                seed: 0,
                simulated: true,
                provenance: Provenance::Original,
                calibrated: false,
            },
        };
        let label =
            label_trajectory(&traj, &ContactConfig::default(), ContactMethod::Auto).unwrap();
        assert!(label.is_empty());
        assert_eq!(label.onset_index, None);
    }
}
