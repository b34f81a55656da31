//! KL penalty pulling the empirical distribution of `W_r` toward
//! `N(0, σ̄²)` with a learnable target variance.
//!
//! ```text
//! L_KL = -½ (1 − log σ̄² + log σ² − (σ² + μ²) / σ̄²)
//! ```
//!
//! where `μ` and `σ²` are the mean and population variance of all entries.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct KlRegConfig {
    /// Weight `α` of the penalty in the total loss.
    pub alpha: f64,
    /// `log σ̄²`.
    pub log_target_variance: f64,
    /// Whether training updates the target variance.
    pub learn_target: bool,
}

impl KlRegConfig {
    /// Target variance initialized to `γ^-2`, learnable.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {alpha}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        Ok(KlRegConfig {
            alpha,
            log_target_variance: -2.0 * gamma.ln(),
            learn_target: true,
        })
    }

    pub fn target_variance(&self) -> f64 {
        self.log_target_variance.exp()
    }
}

/// Loss value, the moments it was computed from, and its gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct KlTerms {
    pub loss: f64,
    pub mean: f64,
    pub variance: f64,
    /// `∂L/∂W_r`, same shape as `W_r`.
    pub grad_w: Tensor,
    /// `∂L/∂ log σ̄²`.
    pub grad_log_target: f64,
}

/// Mean and population variance of all entries.
pub fn moments(w: &Tensor) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.sum() / n;
    let var = w.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub fn kl_terms(w_r: &Tensor, cfg: &KlRegConfig) -> Result<KlTerms> {
    if w_r.is_empty() {
        return Err(Error::Degenerate("KL penalty of an empty W_r".into()));
    }
    let (mean, variance) = moments(w_r);
    if !(variance > 0.0) {
        return Err(Error::Degenerate("W_r has zero empirical variance".into()));
    }
    let s = cfg.log_target_variance;
    let inv_target = (-s).exp();
    let loss = -0.5 * (1.0 - s + variance.ln() - (variance + mean * mean) * inv_target);
    let d_var = -0.5 * (1.0 / variance - inv_target);
    let d_mean = mean * inv_target;
    let n = w_r.len() as f64;
    let grad_w = w_r.map(|w| d_mean / n + d_var * 2.0 * (w - mean) / n);
    Ok(KlTerms {
        loss,
        mean,
        variance,
        grad_w,
        grad_log_target: 0.5 * (1.0 - (variance + mean * mean) * inv_target),
    })
}

pub fn kl_loss(w_r: &Tensor, cfg: &KlRegConfig) -> Result<f64> {
    kl_terms(w_r, cfg).map(|t| t.loss)
}

/// `L_model + α·L_KL`.
pub fn total_loss(model_loss: f64, kl: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be nonnegative, got {alpha}")));
    }
    Ok(model_loss + alpha * kl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample, Dist, SeededRng};
    use crate::training::finite_diff_grad;

    fn standardized(n: usize, mean: f64, var: f64, seed: u64) -> Tensor {
        let w = sample(&mut SeededRng::new(seed), Dist::Normal { mean: 0.0, std: 1.0 }, &[n, 2]).unwrap();
        let (m, v) = moments(&w);
        w.map(|x| (x - m) / v.sqrt() * var.sqrt() + mean)
    }

    #[test]
    fn matched_gaussian_has_zero_loss() {
        let cfg = KlRegConfig::new(1.0, 0.5).unwrap();
        let w = standardized(500, 0.0, cfg.target_variance(), 1);
        assert!(kl_loss(&w, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn variance_scan_minimum_at_target() {
        let cfg = KlRegConfig::new(1.0, 2.0).unwrap();
        let target = cfg.target_variance();
        let scan: Vec<(f64, f64)> = (1..400)
            .map(|k| {
                let v = k as f64 * 0.002;
                (v, kl_loss(&standardized(50, 0.0, v, 2), &cfg).unwrap())
            })
            .collect();
        let best = scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert!((best.0 - target).abs() <= 0.002, "{} vs {target}", best.0);
    }

    #[test]
    fn nonzero_mean_costs_more() {
        let cfg = KlRegConfig::new(1.0, 1.0).unwrap();
        let a = kl_loss(&standardized(40, 0.0, 0.7, 3), &cfg).unwrap();
        let b = kl_loss(&standardized(40, 0.3, 0.7, 3), &cfg).unwrap();
        assert!(b > a);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let cfg = KlRegConfig {
            log_target_variance: 0.3,
            ..KlRegConfig::new(1.0, 1.0).unwrap()
        };
        let w = standardized(10, 0.4, 0.5, 4);
        let t = kl_terms(&w, &cfg).unwrap();
        let fd = finite_diff_grad(|w: &Tensor| kl_loss(w, &cfg), &w, 1e-6).unwrap();
        let err = t.grad_w.sub(fd.get("value").unwrap()).unwrap().norm() / t.grad_w.norm();
        assert!(err < 1e-6, "{err}");
        let s = Tensor::vector(vec![cfg.log_target_variance]).unwrap();
        let fd = finite_diff_grad(
            |s: &Tensor| {
                kl_loss(
                    &w,
                    &KlRegConfig {
                        log_target_variance: s.data()[0],
                        ..cfg.clone()
                    },
                )
            },
            &s,
            1e-6,
        )
        .unwrap();
        assert!((fd.get("value").unwrap().data()[0] - t.grad_log_target).abs() < 1e-8);
    }

    #[test]
    fn permutation_invariant() {
        let cfg = KlRegConfig::new(1.0, 1.0).unwrap();
        let w = standardized(8, 0.2, 0.9, 5);
        let mut d = w.data().to_vec();
        d.reverse();
        let p = Tensor::new(w.shape().to_vec(), d).unwrap();
        assert!((kl_loss(&w, &cfg).unwrap() - kl_loss(&p, &cfg).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_weighting() {
        let cfg = KlRegConfig::new(1.0, 1.0).unwrap();
        assert!(kl_loss(&Tensor::full(&[3, 2], 0.5), &cfg).is_err());
        assert_eq!(total_loss(2.5, 7.0, 0.0).unwrap(), 2.5);
        assert_eq!(total_loss(2.5, 0.0, 1.0).unwrap(), 2.5);
        assert_eq!(
            total_loss(1.0, 3.0, 2.0).unwrap() - 1.0,
            2.0 * (total_loss(1.0, 3.0, 1.0).unwrap() - 1.0)
        );
        assert!(total_loss(1.0, 1.0, -1.0).is_err());
    }
}
