//! Fixed linear patch encoder.
//!
//! Images are average-pooled over a non-overlapping patch grid and the
//! per-patch RGB means pass through a fixed orthogonal linear map into the
//! latent channels. The decoder applies the transpose map and un-pools, so
//! `decode(encode(x))` reproduces the patch means of `x` exactly and all
//! learning signal flows to the denoiser.

use super::SynthError;
use crate::image::RgbImageF;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seed for the fixed (untrained) channel map; part of the format.
const MAP_SEED: u64 = 0x42d;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchEncoder {
    /// Patches per image side.
    grid: u32,
    /// Latent channels per patch.
    channels: u32,
    /// channels×3 map with orthonormal columns, row-major.
    map: Vec<f64>,
}

impl PatchEncoder {
    /// Builds the encoder for a `grid`×`grid` patch layout with `channels`
    /// latent channels (at least 3, so the transpose map is a left inverse).
    pub fn new(grid: u32, channels: u32) -> Self {
        assert!(grid > 0);
        assert!(channels >= 3, "need at least 3 channels for exact decoding");
        let mut rng = ChaCha8Rng::seed_from_u64(MAP_SEED);
        let c = channels as usize;
        let mut cols = [vec![0.0f64; c], vec![0.0f64; c], vec![0.0f64; c]];
        for col in cols.iter_mut() {
            for v in col.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        }
        // Gram-Schmidt on the three columns.
        for j in 0..3 {
            for k in 0..j {
                let dot: f64 = (0..c).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..c {
                    cols[j][i] -= dot * cols[k][i];
                }
            }
            let norm: f64 = (0..c).map(|i| cols[j][i] * cols[j][i]).sum::<f64>().sqrt();
            for i in 0..c {
                cols[j][i] /= norm;
            }
        }
        let mut map = vec![0.0f64; c * 3];
        for i in 0..c {
            for (j, col) in cols.iter().enumerate() {
                map[i * 3 + j] = col[i];
            }
        }
        Self {
            grid,
            channels,
            map,
        }
    }

    pub fn grid(&self) -> u32 {
        self.grid
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    /// Latent length: grid² · channels.
    pub fn latent_len(&self) -> usize {
        (self.grid * self.grid * self.channels) as usize
    }

    fn patch_size(&self, width: u32, height: u32) -> Result<(u32, u32), SynthError> {
        if width % self.grid != 0 || height % self.grid != 0 {
            return Err(SynthError::DimensionMismatch(format!(
                "image {width}x{height} not divisible by patch grid {}",
                self.grid
            )));
        }
        Ok((width / self.grid, height / self.grid))
    }

    /// Patch-mean pool followed by the fixed orthogonal channel map.
    pub fn encode(&self, img: &RgbImageF) -> Result<Vec<f64>, SynthError> {
        let (pw, ph) = self.patch_size(img.width, img.height)?;
        let g = self.grid as usize;
        let c = self.channels as usize;
        let n = (pw * ph) as f64;
        let mut latent = vec![0.0f64; self.latent_len()];
        for gy in 0..g {
            for gx in 0..g {
                let mut mean = [0.0f64; 3];
                for y in 0..ph {
                    for x in 0..pw {
                        let px = img.pixel(gx as u32 * pw + x, gy as u32 * ph + y);
                        for (m, v) in mean.iter_mut().zip(px.iter()) {
                            *m += v;
                        }
                    }
                }
                for m in mean.iter_mut() {
                    *m /= n;
                }
                let base = (gy * g + gx) * c;
                for ch in 0..c {
                    latent[base + ch] = self.map[ch * 3] * mean[0]
                        + self.map[ch * 3 + 1] * mean[1]
                        + self.map[ch * 3 + 2] * mean[2];
                }
            }
        }
        Ok(latent)
    }

    /// Transpose channel map followed by un-pooling into constant patches.
    pub fn decode(&self, latent: &[f64], width: u32, height: u32) -> Result<RgbImageF, SynthError> {
        if latent.len() != self.latent_len() {
            return Err(SynthError::DimensionMismatch(format!(
                "latent length {} != {}",
                latent.len(),
                self.latent_len()
            )));
        }
        let (pw, ph) = self.patch_size(width, height)?;
        let g = self.grid as usize;
        let c = self.channels as usize;
        let mut img = RgbImageF::new(width, height);
        for gy in 0..g {
            for gx in 0..g {
                let base = (gy * g + gx) * c;
                let mut rgb = [0.0f64; 3];
                for (j, out) in rgb.iter_mut().enumerate() {
                    *out = (0..c)
                        .map(|ch| self.map[ch * 3 + j] * latent[base + ch])
                        .sum();
                }
                for y in 0..ph {
                    for x in 0..pw {
                        img.set_pixel(gx as u32 * pw + x, gy as u32 * ph + y, rgb);
                    }
                }
            }
        }
        Ok(img)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_image(seed: u64, w: u32, h: u32) -> RgbImageF {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RgbImageF::new(w, h);
        for v in img.data.iter_mut() {
            *v = rng.random_range(0.0..1.0);
        }
        img
    }

    /// Patch means computed directly.
    fn patch_mean_image(img: &RgbImageF, grid: u32) -> RgbImageF {
        let (pw, ph) = (img.width / grid, img.height / grid);
        let mut out = RgbImageF::new(img.width, img.height);
        for gy in 0..grid {
            for gx in 0..grid {
                let mut mean = [0.0f64; 3];
                for y in 0..ph {
                    for x in 0..pw {
                        let px = img.pixel(gx * pw + x, gy * ph + y);
                        for (m, v) in mean.iter_mut().zip(px.iter()) {
                            *m += v;
                        }
                    }
                }
                for m in mean.iter_mut() {
                    *m /= (pw * ph) as f64;
                }
                for y in 0..ph {
                    for x in 0..pw {
                        out.set_pixel(gx * pw + x, gy * ph + y, mean);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn constant_image_round_trips_to_constant() {
        let enc = PatchEncoder::new(8, 4);
        let img = RgbImageF::constant(64, 64, [0.37, 0.61, 0.18]);
        let latent = enc.encode(&img).unwrap();
        let back = enc.decode(&latent, 64, 64).unwrap();
        for (a, b) in back.data.iter().zip(img.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decode_encode_is_patch_mean() {
        let enc = PatchEncoder::new(8, 4);
        let img = random_image(1, 64, 64);
        let back = enc.decode(&enc.encode(&img).unwrap(), 64, 64).unwrap();
        let expected = patch_mean_image(&img, 8);
        for (a, b) in back.data.iter().zip(expected.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_is_linear() {
        let enc = PatchEncoder::new(4, 4);
        let img = random_image(2, 32, 32);
        let mut half = img.clone();
        for v in half.data.iter_mut() {
            *v *= 0.5;
        }
        let z = enc.encode(&img).unwrap();
        let z_half = enc.encode(&half).unwrap();
        for (a, b) in z_half.iter().zip(z.iter()) {
            assert!((a - 0.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn indivisible_dimensions_are_rejected() {
        let enc = PatchEncoder::new(8, 4);
        let img = RgbImageF::new(60, 64);
        assert!(matches!(
            enc.encode(&img),
            Err(SynthError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn channel_map_has_orthonormal_columns() {
        let enc = PatchEncoder::new(2, 4);
        let c = enc.channels as usize;
        for j in 0..3 {
            for k in 0..3 {
                let dot: f64 = (0..c)
                    .map(|i| enc.map[i * 3 + j] * enc.map[i * 3 + k])
                    .sum();
                let expected = if j == k { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-14);
            }
        }
    }
}
