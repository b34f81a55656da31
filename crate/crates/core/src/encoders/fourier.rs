//! Learnable Fourier feature positional encoding.
//!
//! For a batch `X: [N, G, M]` the encoder computes, per group,
//!
//! ```text
//! F = [cos(X W_r^T) ‖ sin(X W_r^T)] / sqrt(|F|)        [N, G, |F|]
//! Y = GeLU(F W_1 + B_1) W_2 + B_2                      [N, G, D/G]
//! PE = reshape(Y, [N, D])
//! ```
//!
//! `W_r: [|F|/2, M]` is drawn from `N(0, γ^-2)` (or a uniform range), so at
//! initialization `F(x)·F(y) ≈ ½·exp(-‖x-y‖² / 2γ²)` and the dot product is
//! exactly a function of `x - y` for every `W_r`.

use super::mlp::{mlp_forward_traced, MlpParams, MlpTrace, Mode};
use super::positions::PositionBatch;
use crate::error::{Error, Result};
use crate::numerics::{sample, Dist, ParamSet, SeededRng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightInit {
    /// `N(0, γ^-2)`.
    Normal,
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierPEConfig {
    /// `|F|`, must be even.
    pub fourier_dim: usize,
    /// `|H|`.
    pub hidden_dim: usize,
    /// `D`, must be divisible by `groups`.
    pub encoding_dim: usize,
    pub groups: usize,
    pub coords_per_group: usize,
    pub gamma: f64,
    pub init: WeightInit,
    pub use_layer_norm: bool,
    pub dropout: f64,
    /// `false` freezes `W_r` at its initial value (Fixed-Fourier).
    pub trainable_fourier: bool,
}

impl FourierPEConfig {
    /// Learnable, normal-initialized, no LayerNorm, no dropout.
    pub fn new(
        groups: usize,
        coords_per_group: usize,
        fourier_dim: usize,
        hidden_dim: usize,
        encoding_dim: usize,
        gamma: f64,
    ) -> Result<Self> {
        let cfg = FourierPEConfig {
            fourier_dim,
            hidden_dim,
            encoding_dim,
            groups,
            coords_per_group,
            gamma,
            init: WeightInit::Normal,
            use_layer_norm: false,
            dropout: 0.0,
            trainable_fourier: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.use_layer_norm = on;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Result<Self> {
        self.dropout = rate;
        self.validate()?;
        Ok(self)
    }

    pub fn with_init(mut self, init: WeightInit) -> Result<Self> {
        self.init = init;
        self.validate()?;
        Ok(self)
    }

    pub fn fixed(mut self) -> Self {
        self.trainable_fourier = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.fourier_dim == 0 || !self.fourier_dim.is_multiple_of(2) {
            return fail(format!(
                "fourier_dim must be even and positive, got {}",
                self.fourier_dim
            ));
        }
        if self.hidden_dim == 0 || self.groups == 0 || self.coords_per_group == 0 {
            return fail("hidden_dim, groups and coords_per_group must be positive".into());
        }
        if self.encoding_dim == 0 || !self.encoding_dim.is_multiple_of(self.groups) {
            return fail(format!(
                "encoding_dim {} is not a positive multiple of groups {}",
                self.encoding_dim, self.groups
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if let WeightInit::Uniform { lo, hi } = self.init {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return fail(format!("uniform init range [{lo}, {hi}) is empty"));
            }
        }
        Ok(())
    }

    pub fn group_dim(&self) -> usize {
        self.encoding_dim / self.groups
    }

    pub fn input_width(&self) -> usize {
        self.groups * self.coords_per_group
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FourierPEParams {
    /// `[|F|/2, M]`.
    pub w_r: Tensor,
    pub mlp: MlpParams,
    /// Mirrors `FourierPEConfig::trainable_fourier`; frozen `w_r` is not
    /// exposed through `ParamSet`.
    pub trainable_fourier: bool,
}

impl ParamSet for FourierPEParams {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if self.trainable_fourier {
            out.push(("w_r".to_string(), &self.w_r));
        }
        out.extend(self.mlp.named(""));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        if self.trainable_fourier {
            out.push(("w_r".to_string(), &mut self.w_r));
        }
        out.extend(self.mlp.named_mut(""));
        out
    }
}

pub fn init_params(config: &FourierPEConfig, rng: &mut SeededRng) -> Result<FourierPEParams> {
    config.validate()?;
    let dist = match config.init {
        WeightInit::Normal => Dist::Normal {
            mean: 0.0,
            std: 1.0 / config.gamma,
        },
        WeightInit::Uniform { lo, hi } => Dist::Uniform { lo, hi },
    };
    let w_r = sample(rng, dist, &[config.fourier_dim / 2, config.coords_per_group])?;
    let mlp = MlpParams::init(
        config.fourier_dim,
        config.hidden_dim,
        config.group_dim(),
        config.use_layer_norm,
        rng,
    )?;
    Ok(FourierPEParams {
        w_r,
        mlp,
        trainable_fourier: config.trainable_fourier,
    })
}

/// `[cos(X W_r^T) ‖ sin(X W_r^T)] / sqrt(|F|)` per group, `[N, G, |F|]`.
pub fn fourier_features(x: &PositionBatch, w_r: &Tensor) -> Result<Tensor> {
    fourier_features_traced(x, w_r).map(|(_, features)| features)
}

pub(crate) fn fourier_features_traced(x: &PositionBatch, w_r: &Tensor) -> Result<(Tensor, Tensor)> {
    if w_r.ndim() != 2 || w_r.shape()[1] != x.coords_per_group() {
        return Err(Error::shape(
            "fourier_features",
            format!(
                "W_r {:?} for groups of {} coordinates",
                w_r.shape(),
                x.coords_per_group()
            ),
        ));
    }
    let half = w_r.shape()[0];
    let scale = 1.0 / ((2 * half) as f64).sqrt();
    let proj = x.group_rows().matmul_t(w_r)?;
    let mut data = vec![0.0; proj.len() * 2];
    for (u, out) in proj.data().chunks_exact(half).zip(data.chunks_exact_mut(2 * half)) {
        let (cos, sin) = out.split_at_mut(half);
        for ((v, c), s) in u.iter().zip(cos).zip(sin) {
            let (sv, cv) = libm::sincos(*v);
            *c = cv * scale;
            *s = sv * scale;
        }
    }
    let features = Tensor::new(vec![x.len(), x.groups(), 2 * half], data)?;
    Ok((proj, features))
}

/// `GeLU(F W_1 + B_1) W_2 + B_2` per group row, `[N, G, D/G]`.
pub fn mlp_modulate(
    features: &Tensor,
    params: &FourierPEParams,
    config: &FourierPEConfig,
    mode: &mut Mode<'_>,
) -> Result<Tensor> {
    let shape = features.shape().to_vec();
    if shape.len() != 3 || shape[2] != config.fourier_dim {
        return Err(Error::shape(
            "mlp_modulate",
            format!("features {:?} for |F| = {}", shape, config.fourier_dim),
        ));
    }
    let (y, _) = mlp_forward_traced(features, &params.mlp, config.dropout, mode)?;
    y.reshape(&[shape[0], shape[1], config.group_dim()])
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub struct FourierTrace {
    pub(crate) positions: PositionBatch,
    /// `X W_r^T`, `[N·G, |F|/2]`.
    pub(crate) projections: Tensor,
    pub(crate) mlp: MlpTrace,
}

fn check_batch(x: &PositionBatch, params: &FourierPEParams, config: &FourierPEConfig) -> Result<()> {
    config.validate()?;
    if x.groups() != config.groups || x.coords_per_group() != config.coords_per_group {
        return Err(Error::shape(
            "encode",
            format!(
                "positions [_, {}, {}] for a config of [_, {}, {}]",
                x.groups(),
                x.coords_per_group(),
                config.groups,
                config.coords_per_group
            ),
        ));
    }
    if params.w_r.shape() != [config.fourier_dim / 2, config.coords_per_group]
        || params.mlp.in_dim() != config.fourier_dim
        || params.mlp.hidden_dim() != config.hidden_dim
        || params.mlp.out_dim() != config.group_dim()
    {
        return Err(Error::shape("encode", "parameters do not match the config"));
    }
    Ok(())
}

pub fn encode_traced(
    x: &PositionBatch,
    params: &FourierPEParams,
    config: &FourierPEConfig,
    mode: &mut Mode<'_>,
) -> Result<(Tensor, FourierTrace)> {
    check_batch(x, params, config)?;
    let (projections, features) = fourier_features_traced(x, &params.w_r)?;
    let (y, mlp) = mlp_forward_traced(&features, &params.mlp, config.dropout, mode)?;
    let pe = y.reshape(&[x.len(), config.encoding_dim])?;
    Ok((
        pe,
        FourierTrace {
            positions: x.clone(),
            projections,
            mlp,
        },
    ))
}

/// Full pipeline, `[N, G, M] → [N, D]` with group outputs concatenated in
/// group order.
pub fn encode(
    x: &PositionBatch,
    params: &FourierPEParams,
    config: &FourierPEConfig,
    mode: &mut Mode<'_>,
) -> Result<Tensor> {
    encode_traced(x, params, config, mode).map(|(pe, _)| pe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn batch(rows: &[Vec<f64>], g: usize, m: usize) -> PositionBatch {
        PositionBatch::from_rows(rows, g, m).unwrap()
    }

    #[test]
    fn zero_position_gives_cos_ones_then_sin_zeros() {
        let mut rng = SeededRng::new(4);
        let w = sample(&mut rng, Dist::Normal { mean: 0.0, std: 1.0 }, &[4, 2]).unwrap();
        let f = fourier_features(&batch(&[vec![0.0, 0.0]], 1, 2), &w).unwrap();
        let s = 1.0 / 8f64.sqrt();
        assert_eq!(f.data(), &[s, s, s, s, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn quarter_turn_single_frequency() {
        let w = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let f = fourier_features(&batch(&[vec![FRAC_PI_2]], 1, 1), &w).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((f.data()[0] - 0.0).abs() < 1e-12);
        assert!((f.data()[1] - s).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_is_one_half_per_group() {
        let mut rng = SeededRng::new(8);
        let w = sample(&mut rng, Dist::Normal { mean: 0.0, std: 3.0 }, &[16, 2]).unwrap();
        let x = batch(&[vec![1.5, -20.0, 3.0, 0.1]], 2, 2);
        let f = fourier_features(&x, &w).unwrap();
        for g in 0..2 {
            let r = f.row(g);
            let d: f64 = r.iter().map(|v| v * v).sum();
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn output_shapes() {
        let cfg = FourierPEConfig::new(2, 2, 8, 4, 8, 1.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(1)).unwrap();
        let x = batch(&[vec![0.1; 4], vec![0.2; 4], vec![0.3; 4]], 2, 2);
        let f = fourier_features(&x, &p.w_r).unwrap();
        assert_eq!(f.shape(), &[3, 2, 8]);
        let y = mlp_modulate(&f, &p, &cfg, &mut Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[3, 2, 4]);
        let pe = encode(&x, &p, &cfg, &mut Mode::Eval).unwrap();
        assert_eq!(pe.shape(), &[3, 8]);
        assert_eq!(pe.data(), y.data());
    }

    #[test]
    fn single_group_is_plain_composition() {
        let cfg = FourierPEConfig::new(1, 3, 6, 5, 4, 2.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(2)).unwrap();
        let x = batch(&[vec![0.3, -1.0, 2.0], vec![4.0, 0.0, 0.5]], 1, 3);
        let f = fourier_features(&x, &p.w_r).unwrap();
        let y = mlp_modulate(&f, &p, &cfg, &mut Mode::Eval).unwrap();
        let pe = encode(&x, &p, &cfg, &mut Mode::Eval).unwrap();
        assert_eq!(pe.data(), y.data());
    }

    #[test]
    fn identical_positions_identical_rows() {
        let cfg = FourierPEConfig::new(1, 2, 8, 4, 6, 1.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(3)).unwrap();
        let x = batch(&[vec![0.7, 0.2], vec![0.7, 0.2]], 1, 2);
        let pe = encode(&x, &p, &cfg, &mut Mode::Eval).unwrap();
        assert_eq!(pe.row(0), pe.row(1));
    }

    #[test]
    fn init_statistics() {
        let cfg = FourierPEConfig::new(1, 2, 4096, 4, 4, 1.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(10)).unwrap();
        let n = p.w_r.len() as f64;
        let mean = p.w_r.sum() / n;
        let std = (p.w_r.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 1.0).abs() < 0.03, "std {std}");
        assert!(p.mlp.b1.data().iter().all(|&v| v == 0.0));
        assert!(p.mlp.b2.data().iter().all(|&v| v == 0.0));

        let cfg = FourierPEConfig::new(2, 2, 64, 32, 64, 100.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(11)).unwrap();
        let std = (p.w_r.data().iter().map(|v| v * v).sum::<f64>() / p.w_r.len() as f64).sqrt();
        assert!((std - 0.01).abs() < 0.003, "std {std}");
    }

    #[test]
    fn uniform_init_respects_range() {
        let cfg = FourierPEConfig::new(1, 2, 32, 4, 4, 4.0)
            .unwrap()
            .with_init(WeightInit::Uniform { lo: 0.0, hi: 1.0 })
            .unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(12)).unwrap();
        assert!(p.w_r.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(FourierPEConfig::new(1, 2, 7, 4, 4, 1.0).is_err());
        assert!(FourierPEConfig::new(3, 2, 8, 4, 8, 1.0).is_err());
        assert!(FourierPEConfig::new(1, 2, 8, 4, 4, 0.0).is_err());
        assert!(FourierPEConfig::new(1, 2, 8, 4, 4, 1.0)
            .unwrap()
            .with_dropout(1.0)
            .is_err());
    }

    #[test]
    fn mismatched_batch_rejected() {
        let cfg = FourierPEConfig::new(1, 2, 8, 4, 4, 1.0).unwrap();
        let p = init_params(&cfg, &mut SeededRng::new(0)).unwrap();
        let x = batch(&[vec![0.0; 3]], 1, 3);
        assert!(encode(&x, &p, &cfg, &mut Mode::Eval).is_err());
        assert!(fourier_features(&x, &p.w_r).is_err());
    }
}
