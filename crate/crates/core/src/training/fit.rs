//! Full-batch fitting of encoder dot products to a target kernel.

use std::io::Write;

use super::adam::{AdamConfig, AdamState};
use super::backward::backward_encode;
use super::kl::{kl_terms, KlRegConfig};
use crate::encoders::{Encoder, EncoderParams, Mode};
use crate::error::{Error, Result};
use crate::numerics::{SeededRng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct KernelFitConfig {
    /// Positions form a `grid_side × grid_side` lattice.
    pub grid_side: usize,
    pub spacing: f64,
    pub steps: usize,
    pub adam: AdamConfig,
    /// Optional KL penalty on `W_r`.
    pub kl: Option<KlRegConfig>,
}

impl KernelFitConfig {
    pub fn new(grid_side: usize, spacing: f64, steps: usize) -> Self {
        KernelFitConfig {
            grid_side,
            spacing,
            steps,
            adam: AdamConfig::default(),
            kl: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub model_loss: f64,
    pub kl_loss: f64,
    pub total_loss: f64,
    /// Empirical mean and variance of `W_r`, when the encoder has one.
    pub w_moments: Option<(f64, f64)>,
    /// `σ̄²` of the KL penalty, when enabled.
    pub target_variance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub encoder: Encoder,
    /// Row `s` holds the losses evaluated before update `s`; the last row
    /// is an evaluation-mode pass after the final update.
    pub trace: Vec<TraceRow>,
    /// Running minimum of `total_loss`.
    pub smoothed: Vec<f64>,
    pub kl: Option<KlRegConfig>,
}

impl FitResult {
    pub fn initial_loss(&self) -> f64 {
        self.trace[0].model_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.trace[self.trace.len() - 1].model_loss
    }
}

/// Lattice positions `(i·s, j·s)`, repeated to fill `width` coordinates;
/// a one-coordinate encoder sees the scaled raster index.
pub fn lattice_positions(side: usize, spacing: f64, width: usize) -> Result<Tensor> {
    let mut rows = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            rows.push(if width == 1 {
                vec![(i * side + j) as f64 * spacing]
            } else {
                (0..width)
                    .map(|k| if k % 2 == 0 { i as f64 } else { j as f64 } * spacing)
                    .collect()
            });
        }
    }
    Tensor::from_rows(&rows)
}

fn w_r(encoder: &Encoder) -> Option<&Tensor> {
    match &encoder.params {
        EncoderParams::Fourier(p) => Some(&p.w_r),
        _ => None,
    }
}

/// Minimizes `mean_{a,b} (e_a·e_b − k(p_a, p_b))²` over all lattice pairs
/// with Adam, optionally adding `α·L_KL(W_r)`.
pub fn fit_kernel_target(
    mut encoder: Encoder,
    target: impl Fn(&[f64], &[f64]) -> f64,
    cfg: &KernelFitConfig,
    rng: &mut SeededRng,
) -> Result<FitResult> {
    if cfg.grid_side < 2 || !(cfg.spacing > 0.0) {
        return Err(Error::Config(
            "kernel fitting needs a lattice of side ≥ 2 and positive spacing".into(),
        ));
    }
    let positions = lattice_positions(cfg.grid_side, cfg.spacing, encoder.input_width())?;
    let n = positions.rows();
    let mut k = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            k.push(target(positions.row(a), positions.row(b)));
        }
    }
    let k =
        Tensor::new(vec![n, n], k).map_err(|_| Error::Config("target kernel returned a non-finite value".into()))?;
    for a in 0..n {
        for b in 0..a {
            if (k.at2(a, b) - k.at2(b, a)).abs() > 1e-12 {
                return Err(Error::Config("target kernel must be symmetric".into()));
            }
        }
    }
    let mut kl = cfg.kl.clone();
    let mut adam = AdamState::new(cfg.adam);
    let mut target_adam = AdamState::new(cfg.adam);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut run_rng = rng.fork(0);
    for step in 0..=cfg.steps {
        let last = step == cfg.steps;
        let mut mode = if last { Mode::Eval } else { Mode::Train(&mut run_rng) };
        let (e, enc_trace) = encoder.encode_traced(&positions, &mut mode)?;
        let resid = e.matmul_t(&e)?.sub(&k)?;
        let model_loss = resid.data().iter().map(|r| r * r).sum::<f64>() / (n * n) as f64;
        let kl_now = match (&kl, w_r(&encoder)) {
            (Some(c), Some(w)) => Some(kl_terms(w, c)?),
            _ => None,
        };
        let alpha = kl.as_ref().map_or(0.0, |c| c.alpha);
        let kl_loss = kl_now.as_ref().map_or(0.0, |t| t.loss);
        let total = model_loss + alpha * kl_loss;
        if !total.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("loss {total}"),
            });
        }
        trace.push(TraceRow {
            step,
            model_loss,
            kl_loss,
            total_loss: total,
            w_moments: w_r(&encoder).map(super::kl::moments),
            target_variance: kl.as_ref().map(KlRegConfig::target_variance),
        });
        if last {
            break;
        }
        let upstream = resid.matmul(&e)?.scale(4.0 / (n * n) as f64)?;
        let mut grads = backward_encode(&encoder, &enc_trace, &upstream)?;
        if let (Some(t), Some(c)) = (&kl_now, kl.as_mut()) {
            grads.add_named("w_r", &t.grad_w, c.alpha)?;
            if c.learn_target {
                let mut s = Tensor::vector(vec![c.log_target_variance])?;
                let mut g = super::GradientStore::zeros_like(&s);
                g.add_named("value", &Tensor::vector(vec![c.alpha * t.grad_log_target])?, 1.0)?;
                target_adam.step(&mut s, &g)?;
                c.log_target_variance = s.data()[0];
            }
        }
        adam.step(&mut encoder, &grads).map_err(|e| Error::Diverged {
            step,
            detail: e.to_string(),
        })?;
    }
    let mut smoothed = Vec::with_capacity(trace.len());
    let mut best = f64::INFINITY;
    for r in &trace {
        best = best.min(r.total_loss);
        smoothed.push(best);
    }
    Ok(FitResult {
        encoder,
        trace,
        smoothed,
        kl,
    })
}

/// `step,model_loss,kl_loss,total_loss` with a header row.
pub fn write_trace_csv(rows: &[TraceRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "step,model_loss,kl_loss,total_loss")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.step, r.model_loss, r.kl_loss, r.total_loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderSpec, FourierPEConfig};

    fn small(seed: u64) -> Encoder {
        let spec = EncoderSpec::Fourier(FourierPEConfig::new(1, 2, 16, 8, 8, 1.0).unwrap());
        Encoder::init(spec, &mut SeededRng::new(seed)).unwrap()
    }

    #[test]
    fn lattice_layout() {
        let p = lattice_positions(2, 0.5, 2).unwrap();
        assert_eq!(p.data(), &[0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 0.5]);
        assert_eq!(lattice_positions(2, 1.0, 1).unwrap().data(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn trace_shape_and_smoothing() {
        let cfg = KernelFitConfig::new(3, 0.5, 5);
        let r = fit_kernel_target(
            small(1),
            |x, y| crate::kernels::gaussian_kernel(x, y, 2.0).unwrap(),
            &cfg,
            &mut SeededRng::new(1),
        )
        .unwrap();
        assert_eq!(r.trace.len(), 6);
        assert!(r.smoothed.windows(2).all(|w| w[1] <= w[0]));
        let mut buf = Vec::new();
        write_trace_csv(&r.trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn asymmetric_target_rejected() {
        let cfg = KernelFitConfig::new(2, 1.0, 1);
        assert!(fit_kernel_target(small(2), |x, y| x[0] - y[1], &cfg, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = KernelFitConfig {
            adam: AdamConfig::with_lr(1e-2),
            ..KernelFitConfig::new(3, 0.5, 10)
        };
        let k = |x: &[f64], y: &[f64]| crate::kernels::gaussian_kernel(x, y, 2.0).unwrap();
        let a = fit_kernel_target(small(3), k, &cfg, &mut SeededRng::new(4)).unwrap();
        let b = fit_kernel_target(small(3), k, &cfg, &mut SeededRng::new(4)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.encoder, b.encoder);
    }
}
