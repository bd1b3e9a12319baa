//! Pose-conditioned diffusion denoiser at desk scale.
//!
//! Both arms' noisy target latents, a timestep embedding, and a conditioning
//! vector (flattened Δp and Δp⁻¹ for both arms plus the encoded source
//! latents) feed a two-hidden-layer tanh network that predicts the injected
//! noise for both arms. Training minimizes the summed squared noise-prediction
//! error, batch averaged, with plain SGD plus momentum. Gradients are exact
//! reverse-mode derivatives and are finite-difference checked in the tests.

use super::encoder::PatchEncoder;
use super::schedule::{forward_diffuse, NoiseSchedule};
use super::{ImagePair, SynthError, SynthesizedViews, Synthesizer};
use crate::dataset::Trajectory;
use crate::geometry::{invert, CameraIntrinsics, Pose};
use crate::image::Mask8Image;
use crate::rng::derived_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::Write;
use std::path::Path;

/// Sinusoidal frequencies plus the schedule gains √ᾱ and √(1−ᾱ).
const T_EMBED: usize = 10;
/// Fixed gain applied to centered latent inputs; standardizes their scale so
/// gradient flow through the first layer is not starved by small magnitudes.
const LATENT_GAIN: f64 = 2.0;
/// Pose translations are centimeter scale; bring them to the same order as
/// the rotation entries in the conditioning vector.
const POSE_TRANSLATION_GAIN: f64 = 25.0;
/// Four poses (Δp and Δp⁻¹ per arm) as 3×4 row-major blocks.
const POSE_COND: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DenoiserConfig {
    /// Patch grid per image side.
    pub grid: u32,
    /// Latent channels per patch.
    pub channels: u32,
    /// Hidden layer width.
    pub hidden: usize,
    /// Parameter initialization seed.
    pub init_seed: u64,
    /// Initialization gain in thousandths (1000 = 1/sqrt(fan_in)).
    pub init_gain_milli: u64,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            grid: 8,
            channels: 4,
            hidden: 256,
            init_seed: 0,
            init_gain_milli: 1000,
        }
    }
}

/// Parameter block offsets inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    input: usize,
    hidden: usize,
    output: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    total: usize,
}

impl Layout {
    fn new(latent: usize, hidden: usize) -> Self {
        let input = 4 * latent + T_EMBED + POSE_COND;
        let output = 2 * latent;
        let w1 = 0;
        let b1 = w1 + hidden * input;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let w3 = b2 + hidden;
        let b3 = w3 + output * hidden;
        Self {
            input,
            hidden,
            output,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            total: b3 + output,
        }
    }
}

/// The conditioned noise-prediction network plus its encoder and schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    pub config: DenoiserConfig,
    encoder: PatchEncoder,
    schedule: NoiseSchedule,
    layout: Layout,
    params: Vec<f64>,
    /// Latent of a mid-gray image; input centering constant.
    latent_center: Vec<f64>,
}

fn flatten_pose(pose: &Pose, out: &mut Vec<f64>) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(pose.rotation[(r, c)]);
        }
        out.push(pose.translation[r] * POSE_TRANSLATION_GAIN);
    }
}

impl DenoiserModel {
    pub fn new(config: DenoiserConfig, schedule: NoiseSchedule) -> Self {
        let encoder = PatchEncoder::new(config.grid, config.channels);
        let latent = encoder.latent_len();
        let layout = Layout::new(latent, config.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut params = vec![0.0f64; layout.total];
        let gain = config.init_gain_milli as f64 / 1000.0;
        let mut init_dense = |w_off: usize, rows: usize, cols: usize, params: &mut Vec<f64>| {
            let scale = gain / (cols as f64).sqrt();
            for i in 0..rows * cols {
                let g: f64 = StandardNormal.sample(&mut rng);
                params[w_off + i] = g * scale;
            }
        };
        init_dense(layout.w1, layout.hidden, layout.input, &mut params);
        init_dense(layout.w2, layout.hidden, layout.hidden, &mut params);
        init_dense(layout.w3, layout.output, layout.hidden, &mut params);
        // Per-position latent of a constant mid-gray image.
        let c = config.channels as usize;
        let mut center_channel = vec![0.0f64; c];
        {
            let gray = crate::image::RgbImageF::constant(config.grid, config.grid, [0.5; 3]);
            let z = encoder.encode(&gray).expect("grid-sized image encodes");
            center_channel.copy_from_slice(&z[..c]);
        }
        let latent_center: Vec<f64> = (0..latent).map(|i| center_channel[i % c]).collect();
        Self {
            config,
            encoder,
            schedule,
            layout,
            params,
            latent_center,
        }
    }

    pub fn encoder(&self) -> &PatchEncoder {
        &self.encoder
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    /// Per-arm latent length.
    pub fn latent_len(&self) -> usize {
        self.encoder.latent_len()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn time_embedding(&self, t: usize, out: &mut Vec<f64>) {
        let tau = t as f64 / self.schedule.steps as f64;
        for i in 0..4 {
            let f = (1u32 << i) as f64 * std::f64::consts::PI;
            out.push((f * tau).sin());
            out.push((f * tau).cos());
        }
        let ab = self.schedule.alpha_bar(t);
        out.push(ab.sqrt());
        out.push((1.0 - ab).sqrt());
    }

    /// Network input: noisy latents, timestep embedding, pose conditioning
    /// (Δp, Δp⁻¹ per arm), encoded source latents.
    fn assemble_input(
        &self,
        z_t_left: &[f64],
        z_t_right: &[f64],
        t: usize,
        dp_left: &Pose,
        dp_right: &Pose,
        z_a_left: &[f64],
        z_a_right: &[f64],
    ) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.layout.input);
        // Noisy latents centered on the signal-scaled mid-gray latent.
        let signal = self.schedule.alpha_bar(t).sqrt();
        for z in [z_t_left, z_t_right] {
            x.extend(
                z.iter()
                    .zip(self.latent_center.iter())
                    .map(|(v, c)| (v - signal * c) * LATENT_GAIN),
            );
        }
        self.time_embedding(t, &mut x);
        flatten_pose(dp_left, &mut x);
        flatten_pose(&invert(dp_left), &mut x);
        flatten_pose(dp_right, &mut x);
        flatten_pose(&invert(dp_right), &mut x);
        for z in [z_a_left, z_a_right] {
            x.extend(
                z.iter()
                    .zip(self.latent_center.iter())
                    .map(|(v, c)| (v - c) * LATENT_GAIN),
            );
        }
        debug_assert_eq!(x.len(), self.layout.input);
        x
    }

    /// Forward pass returning the prediction and hidden activations.
    fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = &self.layout;
        let p = &self.params;
        let mut h1 = vec![0.0f64; l.hidden];
        for i in 0..l.hidden {
            let row = l.w1 + i * l.input;
            let mut acc = p[l.b1 + i];
            for (j, xv) in x.iter().enumerate() {
                acc += p[row + j] * xv;
            }
            h1[i] = acc.tanh();
        }
        let mut h2 = vec![0.0f64; l.hidden];
        for i in 0..l.hidden {
            let row = l.w2 + i * l.hidden;
            let mut acc = p[l.b2 + i];
            for (j, hv) in h1.iter().enumerate() {
                acc += p[row + j] * hv;
            }
            h2[i] = acc.tanh();
        }
        let mut y = vec![0.0f64; l.output];
        for i in 0..l.output {
            let row = l.w3 + i * l.hidden;
            let mut acc = p[l.b3 + i];
            for (j, hv) in h2.iter().enumerate() {
                acc += p[row + j] * hv;
            }
            y[i] = acc;
        }
        (y, h1, h2)
    }

    /// Noise prediction for both arms, concatenated left then right.
    pub fn predict(
        &self,
        z_t_left: &[f64],
        z_t_right: &[f64],
        t: usize,
        dp_left: &Pose,
        dp_right: &Pose,
        z_a_left: &[f64],
        z_a_right: &[f64],
    ) -> Vec<f64> {
        let x = self.assemble_input(
            z_t_left, z_t_right, t, dp_left, dp_right, z_a_left, z_a_right,
        );
        self.forward_cached(&x).0
    }

    /// Writes the model: structured-text header, `---` separator, then the
    /// flat little-endian f64 parameter array.
    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        let mut header = String::new();
        header.push_str("bimaug-denoiser v1\n");
        header.push_str(&format!("grid = {}\n", self.config.grid));
        header.push_str(&format!("channels = {}\n", self.config.channels));
        header.push_str(&format!("hidden = {}\n", self.config.hidden));
        header.push_str(&format!("init_seed = {}\n", self.config.init_seed));
        header.push_str(&format!(
            "init_gain_milli = {}\n",
            self.config.init_gain_milli
        ));
        header.push_str(&format!("schedule_steps = {}\n", self.schedule.steps));
        header.push_str(&format!("beta_start = {}\n", self.schedule.beta_start));
        header.push_str(&format!("beta_end = {}\n", self.schedule.beta_end));
        header.push_str(&format!("params = {}\n", self.params.len()));
        header.push_str("---\n");
        let mut bytes = header.into_bytes();
        for v in &self.params {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let bytes = std::fs::read(path)?;
        let sep = b"---\n";
        let sep_pos = bytes
            .windows(sep.len())
            .position(|w| w == sep)
            .ok_or_else(|| SynthError::InvalidEncoding("missing header separator".into()))?;
        let header = std::str::from_utf8(&bytes[..sep_pos])
            .map_err(|_| SynthError::InvalidEncoding("header is not utf-8".into()))?;
        let mut lines = header.lines();
        let magic = lines.next().unwrap_or_default();
        if magic != "bimaug-denoiser v1" {
            return Err(SynthError::InvalidEncoding(format!(
                "unknown model format '{magic}'"
            )));
        }
        let get = |key: &str| -> Result<String, SynthError> {
            for line in header.lines().skip(1) {
                if let Some((k, v)) = line.split_once('=') {
                    if k.trim() == key {
                        return Ok(v.trim().to_string());
                    }
                }
            }
            Err(SynthError::InvalidEncoding(format!("missing key {key}")))
        };
        let parse_err = |k: &str| SynthError::InvalidEncoding(format!("bad value for {k}"));
        let grid: u32 = get("grid")?.parse().map_err(|_| parse_err("grid"))?;
        let channels: u32 = get("channels")?
            .parse()
            .map_err(|_| parse_err("channels"))?;
        let hidden: usize = get("hidden")?.parse().map_err(|_| parse_err("hidden"))?;
        let init_seed: u64 = get("init_seed")?
            .parse()
            .map_err(|_| parse_err("init_seed"))?;
        let init_gain_milli: u64 = get("init_gain_milli")?
            .parse()
            .map_err(|_| parse_err("init_gain_milli"))?;
        let steps: usize = get("schedule_steps")?
            .parse()
            .map_err(|_| parse_err("schedule_steps"))?;
        let beta_start: f64 = get("beta_start")?
            .parse()
            .map_err(|_| parse_err("beta_start"))?;
        let beta_end: f64 = get("beta_end")?
            .parse()
            .map_err(|_| parse_err("beta_end"))?;
        let n_params: usize = get("params")?.parse().map_err(|_| parse_err("params"))?;

        let mut model = Self::new(
            DenoiserConfig {
                grid,
                channels,
                hidden,
                init_seed,
                init_gain_milli,
            },
            NoiseSchedule::linear(steps, beta_start, beta_end),
        );
        if model.params.len() != n_params {
            return Err(SynthError::InvalidEncoding(format!(
                "parameter count {} does not match architecture {}",
                n_params,
                model.params.len()
            )));
        }
        let blob = &bytes[sep_pos + sep.len()..];
        if blob.len() != n_params * 8 {
            return Err(SynthError::InvalidEncoding(format!(
                "parameter blob holds {} bytes, expected {}",
                blob.len(),
                n_params * 8
            )));
        }
        for (i, chunk) in blob.chunks_exact(8).enumerate() {
            model.params[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(model)
    }
}

/// One training sample: clean target latents, source latents, relative poses,
/// the diffusion step, and the drawn noises.
#[derive(Debug, Clone)]
pub struct DenoiseSample {
    pub z_b0_left: Vec<f64>,
    pub z_b0_right: Vec<f64>,
    pub z_a_left: Vec<f64>,
    pub z_a_right: Vec<f64>,
    pub dp_left: Pose,
    pub dp_right: Pose,
    pub t: usize,
    pub eps_left: Vec<f64>,
    pub eps_right: Vec<f64>,
}

pub type DenoiseBatch = Vec<DenoiseSample>;

/// Batch-mean of `‖ε_l − ε̂_l‖² + ‖ε_r − ε̂_r‖²`.
pub fn loss(model: &DenoiserModel, batch: &DenoiseBatch) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let z_t_l = forward_diffuse(&s.z_b0_left, s.t, &s.eps_left, &model.schedule);
        let z_t_r = forward_diffuse(&s.z_b0_right, s.t, &s.eps_right, &model.schedule);
        let y = model.predict(
            &z_t_l,
            &z_t_r,
            s.t,
            &s.dp_left,
            &s.dp_right,
            &s.z_a_left,
            &s.z_a_right,
        );
        let l = model.latent_len();
        for i in 0..l {
            let dl = y[i] - s.eps_left[i];
            let dr = y[l + i] - s.eps_right[i];
            total += dl * dl + dr * dr;
        }
    }
    total / batch.len() as f64
}

/// Loss plus exact reverse-mode parameter gradients.
pub fn loss_and_gradient(model: &DenoiserModel, batch: &DenoiseBatch) -> (f64, Vec<f64>) {
    let l = &model.layout;
    let mut grad = vec![0.0f64; l.total];
    let mut total = 0.0;
    let inv_b = 1.0 / batch.len() as f64;
    let latent = model.latent_len();

    for s in batch {
        let z_t_l = forward_diffuse(&s.z_b0_left, s.t, &s.eps_left, &model.schedule);
        let z_t_r = forward_diffuse(&s.z_b0_right, s.t, &s.eps_right, &model.schedule);
        let x = model.assemble_input(
            &z_t_l,
            &z_t_r,
            s.t,
            &s.dp_left,
            &s.dp_right,
            &s.z_a_left,
            &s.z_a_right,
        );
        let (y, h1, h2) = model.forward_cached(&x);

        let mut dy = vec![0.0f64; l.output];
        for i in 0..latent {
            let dl = y[i] - s.eps_left[i];
            let dr = y[latent + i] - s.eps_right[i];
            total += dl * dl + dr * dr;
            dy[i] = 2.0 * dl * inv_b;
            dy[latent + i] = 2.0 * dr * inv_b;
        }

        // Output layer.
        let mut dh2 = vec![0.0f64; l.hidden];
        for i in 0..l.output {
            let row = l.w3 + i * l.hidden;
            let g = dy[i];
            grad[l.b3 + i] += g;
            for (j, hv) in h2.iter().enumerate() {
                grad[row + j] += g * hv;
                dh2[j] += model.params[row + j] * g;
            }
        }
        // Second hidden layer.
        let mut dh1 = vec![0.0f64; l.hidden];
        for i in 0..l.hidden {
            let dz = dh2[i] * (1.0 - h2[i] * h2[i]);
            let row = l.w2 + i * l.hidden;
            grad[l.b2 + i] += dz;
            for (j, hv) in h1.iter().enumerate() {
                grad[row + j] += dz * hv;
                dh1[j] += model.params[row + j] * dz;
            }
        }
        // First hidden layer.
        for i in 0..l.hidden {
            let dz = dh1[i] * (1.0 - h1[i] * h1[i]);
            let row = l.w1 + i * l.input;
            grad[l.b1 + i] += dz;
            for (j, xv) in x.iter().enumerate() {
                grad[row + j] += dz * xv;
            }
        }
    }
    (total * inv_b, grad)
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Source/target frame gap range, inclusive.
    pub gap_min: usize,
    pub gap_max: usize,
    pub momentum: f64,
    /// Global gradient-norm clip; guards the stiff small-t directions.
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            learning_rate: 1e-3,
            batch_size: 16,
            gap_min: 5,
            gap_max: 15,
            momentum: 0.9,
            max_grad_norm: 50.0,
            seed: 0,
        }
    }
}

/// Pre-encoded latents and camera poses for one trajectory.
struct EncodedTrajectory {
    latents: Vec<[Vec<f64>; 2]>,
    cameras: Vec<[Pose; 2]>,
}

fn encode_trajectories(
    model: &DenoiserModel,
    trajectories: &[Trajectory],
) -> Result<Vec<EncodedTrajectory>, SynthError> {
    trajectories
        .iter()
        .map(|traj| {
            let mut latents = Vec::with_capacity(traj.len());
            let mut cameras = Vec::with_capacity(traj.len());
            for step in &traj.steps {
                let l = model.encoder.encode(&step.left.rgb.to_f64())?;
                let r = model.encoder.encode(&step.right.rgb.to_f64())?;
                latents.push([l, r]);
                cameras.push([step.left.camera_pose, step.right.camera_pose]);
            }
            Ok(EncodedTrajectory { latents, cameras })
        })
        .collect()
}

fn draw_sample(
    model: &DenoiserModel,
    encoded: &[EncodedTrajectory],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> DenoiseSample {
    let traj = &encoded[rng.random_range(0..encoded.len())];
    let gap = if cfg.gap_min == cfg.gap_max {
        cfg.gap_min
    } else {
        rng.random_range(cfg.gap_min..=cfg.gap_max)
    };
    let a = rng.random_range(0..traj.latents.len() - gap);
    let b = a + gap;
    let t = rng.random_range(1..=model.schedule.steps);
    let latent = model.latent_len();
    let mut eps_left = vec![0.0f64; latent];
    let mut eps_right = vec![0.0f64; latent];
    for v in eps_left.iter_mut().chain(eps_right.iter_mut()) {
        *v = StandardNormal.sample(rng);
    }
    let dp = |side: usize| {
        let ca = &traj.cameras[a][side];
        let cb = &traj.cameras[b][side];
        crate::geometry::relative_pose(ca, cb)
    };
    DenoiseSample {
        z_b0_left: traj.latents[b][0].clone(),
        z_b0_right: traj.latents[b][1].clone(),
        z_a_left: traj.latents[a][0].clone(),
        z_a_right: traj.latents[a][1].clone(),
        dp_left: dp(0),
        dp_right: dp(1),
        t,
        eps_left,
        eps_right,
    }
}

/// SGD-with-momentum training on source/target pairs drawn from the
/// trajectories with the configured frame-gap range. Returns the per-step
/// loss curve.
pub fn train(
    model: &mut DenoiserModel,
    trajectories: &[Trajectory],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, SynthError> {
    let required = cfg.gap_max + 1;
    if trajectories.is_empty() {
        return Err(SynthError::InsufficientLength { len: 0, required });
    }
    for traj in trajectories {
        if traj.len() < required {
            return Err(SynthError::InsufficientLength {
                len: traj.len(),
                required,
            });
        }
    }
    let encoded = encode_trajectories(model, trajectories)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = vec![0.0f64; model.params.len()];
    let mut curve = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let batch: DenoiseBatch = (0..cfg.batch_size)
            .map(|_| draw_sample(model, &encoded, cfg, &mut rng))
            .collect();
        let (loss_value, mut grad) = loss_and_gradient(model, &batch);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm > cfg.max_grad_norm {
            let scale = cfg.max_grad_norm / gnorm;
            for g in grad.iter_mut() {
                *g *= scale;
            }
        }
        for ((p, v), g) in model
            .params
            .iter_mut()
            .zip(velocity.iter_mut())
            .zip(grad.iter())
        {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *p += *v;
        }
        curve.push(loss_value);
    }
    Ok(curve)
}

/// Renders a loss curve as `step,loss` CSV lines.
pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

/// Ancestral reverse diffusion from unit-Gaussian latents, conditioned on the
/// encoded source images and relative poses. Deterministic for a fixed rng.
pub fn synthesize_diffusion(
    model: &DenoiserModel,
    src: &ImagePair,
    dp_left: &Pose,
    dp_right: &Pose,
    rng: &mut ChaCha8Rng,
) -> Result<ImagePair, SynthError> {
    let z_a_left = model.encoder.encode(&src.left)?;
    let z_a_right = model.encoder.encode(&src.right)?;
    let latent = model.latent_len();
    let sched = &model.schedule;

    let mut z_l = vec![0.0f64; latent];
    let mut z_r = vec![0.0f64; latent];
    for v in z_l.iter_mut().chain(z_r.iter_mut()) {
        *v = StandardNormal.sample(rng);
    }

    for t in (1..=sched.steps).rev() {
        let y = model.predict(&z_l, &z_r, t, dp_left, dp_right, &z_a_left, &z_a_right);
        let beta = sched.beta(t);
        let alpha = sched.alpha(t);
        let ab = sched.alpha_bar(t);
        let ab_prev = sched.alpha_bar(t - 1);
        let mean_scale = 1.0 / alpha.sqrt();
        let eps_scale = beta / (1.0 - ab).sqrt();
        let sigma = if t > 1 {
            (beta * (1.0 - ab_prev) / (1.0 - ab)).sqrt()
        } else {
            0.0
        };
        for i in 0..latent {
            let mu_l = mean_scale * (z_l[i] - eps_scale * y[i]);
            let mu_r = mean_scale * (z_r[i] - eps_scale * y[latent + i]);
            if t > 1 {
                let xi_l: f64 = StandardNormal.sample(rng);
                let xi_r: f64 = StandardNormal.sample(rng);
                z_l[i] = mu_l + sigma * xi_l;
                z_r[i] = mu_r + sigma * xi_r;
            } else {
                z_l[i] = mu_l;
                z_r[i] = mu_r;
            }
        }
    }

    let (w, h) = (src.left.width, src.left.height);
    let mut left = model.encoder.decode(&z_l, w, h)?;
    let mut right = model.encoder.decode(&z_r, w, h)?;
    for v in left.data.iter_mut().chain(right.data.iter_mut()) {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ImagePair::from_rgb(left, right))
}

/// Trained-denoiser backend for the shared synthesis interface.
#[derive(Debug, Clone)]
pub struct DiffusionSynthesizer {
    pub model: DenoiserModel,
}

impl Synthesizer for DiffusionSynthesizer {
    fn synthesize(
        &self,
        src: &ImagePair,
        _left_k: &CameraIntrinsics,
        _right_k: &CameraIntrinsics,
        dp_left: &Pose,
        dp_right: &Pose,
        seed: u64,
    ) -> Result<SynthesizedViews, SynthError> {
        let mut rng = derived_rng(seed, &[0x5d1f]);
        let out = synthesize_diffusion(&self.model, src, dp_left, dp_right, &mut rng)?;
        let (w, h) = (out.left.width, out.left.height);
        let mut all_true = Mask8Image::new(w, h);
        all_true.data.fill(1);
        Ok(SynthesizedViews {
            left: out.left,
            right: out.right,
            left_valid: all_true.clone(),
            right_valid: all_true,
            left_depth: None,
            right_depth: None,
            left_mask: None,
            right_mask: None,
        })
    }
}

use rand_chacha::rand_core::SeedableRng;
