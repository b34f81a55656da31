//! Reference kernels, the shift-invariant similarity of Fourier features,
//! and similarity-heatmap diagnostics.

mod export;
mod heatmap;

pub use export::{pgm_scaling, write_csv, write_meta, write_pgm, PgmScaling};
pub use heatmap::{anisotropy_ratio, default_probes, similarity_heatmap, Grid, HeatmapGrid};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{dot_slices, sample, Dist, SeededRng, Tensor};

/// `exp(-‖x-y‖² / γ²)`.
pub fn gaussian_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(
            "gaussian_kernel",
            format!("{} vs {} coordinates", x.len(), y.len()),
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-d2 / (gamma * gamma)).exp())
}

/// Expected Fourier-feature dot product under `W_r ~ N(0, γ^-2)`:
/// `½·exp(-‖δ‖² / 2γ²)`.
pub fn fourier_kernel_expectation(delta_norm: f64, gamma: f64) -> f64 {
    0.5 * (-(delta_norm * delta_norm) / (2.0 * gamma * gamma)).exp()
}

/// `(1/|F|)·Σ_k cos(δ·w_k)` over the `|F|/2` rows of `W_r`; equals the dot
/// product of the Fourier features of any two positions `δ` apart.
pub fn shift_fn(delta: &[f64], w_r: &Tensor) -> Result<f64> {
    if w_r.ndim() != 2 || w_r.cols() != delta.len() {
        return Err(Error::shape(
            "shift_fn",
            format!("offset of {} coordinates for W_r {:?}", delta.len(), w_r.shape()),
        ));
    }
    let sum: f64 = (0..w_r.rows()).map(|k| dot_slices(w_r.row(k), delta).cos()).sum();
    Ok(sum / (2 * w_r.rows()) as f64)
}

/// Seed-ensemble estimate of the Fourier-feature kernel at one offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub expected: f64,
}

impl KernelEstimate {
    /// `|mean - expected| ≤ k·SE`. The floor covers `δ = 0`, where every
    /// sample equals the expectation and the standard error vanishes.
    pub fn within(&self, k: f64) -> bool {
        (self.mean - self.expected).abs() <= (k * self.std_err).max(1e-12)
    }
}

/// Averages `shift_fn(δ, W_r)` over `seeds` independent `W_r ~ N(0, γ^-2)`
/// draws of `|F|/2` frequencies, seed `s` using stream `s` of `rng`.
pub fn kernel_monte_carlo(
    delta: &[f64],
    gamma: f64,
    fourier_dim: usize,
    seeds: usize,
    rng: &SeededRng,
) -> Result<KernelEstimate> {
    if seeds < 2 || fourier_dim < 2 || !fourier_dim.is_multiple_of(2) {
        return Err(Error::Config("need at least two seeds and an even |F| ≥ 2".into()));
    }
    let samples = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let w = sample(
                &mut rng.fork(s),
                Dist::Normal {
                    mean: 0.0,
                    std: 1.0 / gamma,
                },
                &[fourier_dim / 2, delta.len()],
            )?;
            shift_fn(delta, &w)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(KernelEstimate {
        mean,
        std_err: (var / n).sqrt(),
        expected: fourier_kernel_expectation(norm, gamma),
    })
}
