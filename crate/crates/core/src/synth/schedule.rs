//! Forward-diffusion bookkeeping: linear beta schedule and the closed-form
//! noising step.

use serde::{Deserialize, Serialize};

/// Linear beta schedule with cached alphas and cumulative products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    /// alpha_bars[t] = ᾱ_t with ᾱ_0 = 1; length steps + 1.
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Self {
        assert!(steps >= 1);
        let betas: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    beta_start
                } else {
                    beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        assert!(betas.iter().all(|&b| b > 0.0 && b < 1.0));
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps + 1);
        alpha_bars.push(1.0);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        debug_assert!(alpha_bars.windows(2).all(|w| w[1] < w[0]));
        Self {
            steps,
            beta_start,
            beta_end,
            betas,
            alphas,
            alpha_bars,
        }
    }

    /// β_t for t in 1..=steps.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// α_t for t in 1..=steps.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// ᾱ_t for t in 0..=steps; ᾱ_0 = 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(100, 1e-4, 0.02)
    }
}

/// Closed-form forward noising: `√(ᾱ_t)·z0 + √(1−ᾱ_t)·eps`. `t = 0` returns
/// `z0` unchanged.
pub fn forward_diffuse(z0: &[f64], t: usize, eps: &[f64], sched: &NoiseSchedule) -> Vec<f64> {
    assert_eq!(z0.len(), eps.len());
    assert!(t <= sched.steps);
    let ab = sched.alpha_bar(t);
    let signal = ab.sqrt();
    let noise = (1.0 - ab).sqrt();
    z0.iter()
        .zip(eps.iter())
        .map(|(z, e)| signal * z + noise * e)
        .collect()
}
