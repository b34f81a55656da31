//! One tagged encoder type over every family, operating on flat `[N, width]`
//! position rows.

use super::embed::{embed_batch, EmbedConfig, EmbedTable};
use super::fourier::{self, FourierPEConfig, FourierPEParams, FourierTrace};
use super::mlp::{mlp_forward_traced, MlpParams, MlpTrace, Mode};
use super::positions::PositionBatch;
use super::sine::{MdSineConfig, SineConfig};
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, SeededRng, Tensor};

/// MLP applied directly to raw coordinates, groups sharing weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpOnlyConfig {
    pub groups: usize,
    pub coords_per_group: usize,
    pub hidden_dim: usize,
    pub encoding_dim: usize,
    pub use_layer_norm: bool,
    pub dropout: f64,
}

impl MlpOnlyConfig {
    pub fn new(groups: usize, coords_per_group: usize, hidden_dim: usize, encoding_dim: usize) -> Result<Self> {
        let c = MlpOnlyConfig {
            groups,
            coords_per_group,
            hidden_dim,
            encoding_dim,
            use_layer_norm: false,
            dropout: 0.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.coords_per_group == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(
                "groups, coords_per_group and hidden_dim must be positive".into(),
            ));
        }
        if self.encoding_dim == 0 || !self.encoding_dim.is_multiple_of(self.groups) {
            return Err(Error::Config(format!(
                "encoding_dim {} is not a positive multiple of groups {}",
                self.encoding_dim, self.groups
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Emits zeros; the no-positional-information control.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroConfig {
    pub input_width: usize,
    pub encoding_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderSpec {
    /// Learnable or fixed depending on `trainable_fourier`.
    Fourier(FourierPEConfig),
    /// Scalar (flattened) position; `coords` must be 1.
    Sine1D(SineConfig),
    SineConcat(SineConfig),
    MdSine(MdSineConfig),
    Embed(EmbedConfig),
    MlpOnly(MlpOnlyConfig),
    Zero(ZeroConfig),
}

impl EncoderSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            EncoderSpec::Fourier(c) if c.trainable_fourier => "learnable-fourier",
            EncoderSpec::Fourier(_) => "fixed-fourier",
            EncoderSpec::Sine1D(_) => "sine-1d",
            EncoderSpec::SineConcat(_) => "sine-concat",
            EncoderSpec::MdSine(_) => "md-sine",
            EncoderSpec::Embed(_) => "embed",
            EncoderSpec::MlpOnly(_) => "mlp",
            EncoderSpec::Zero(_) => "zero",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncoderSpec::Fourier(c) => c.validate(),
            EncoderSpec::Sine1D(c) => {
                if c.coords != 1 {
                    return Err(Error::Config(format!("sine-1d takes one coordinate, got {}", c.coords)));
                }
                c.validate()
            }
            EncoderSpec::SineConcat(c) => c.validate(),
            EncoderSpec::MdSine(c) => c.validate(),
            EncoderSpec::Embed(c) => c.validate(),
            EncoderSpec::MlpOnly(c) => c.validate(),
            EncoderSpec::Zero(c) => {
                if c.input_width == 0 || c.encoding_dim == 0 {
                    return Err(Error::Config("zero encoder widths must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Number of coordinates per position row.
    pub fn input_width(&self) -> usize {
        match self {
            EncoderSpec::Fourier(c) => c.input_width(),
            EncoderSpec::Sine1D(_) => 1,
            EncoderSpec::SineConcat(c) => c.coords,
            EncoderSpec::MdSine(_) => 2,
            EncoderSpec::Embed(c) => c.dims(),
            EncoderSpec::MlpOnly(c) => c.groups * c.coords_per_group,
            EncoderSpec::Zero(c) => c.input_width,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            EncoderSpec::Fourier(c) => c.encoding_dim,
            EncoderSpec::Sine1D(c) | EncoderSpec::SineConcat(c) => c.encoding_dim,
            EncoderSpec::MdSine(c) => c.encoding_dim,
            EncoderSpec::Embed(c) => c.encoding_dim(),
            EncoderSpec::MlpOnly(c) => c.encoding_dim,
            EncoderSpec::Zero(c) => c.encoding_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EncoderParams {
    Fourier(FourierPEParams),
    Embed(EmbedTable),
    Mlp(MlpParams),
    None,
}

/// Which representation a similarity analysis looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Raw Fourier features before the MLP.
    Fourier,
    /// Final encoding.
    Full,
}

#[derive(Clone, Debug)]
pub enum EncoderTrace {
    Fourier(FourierTrace),
    /// Resolved table rows per position.
    Embed(Vec<Vec<usize>>),
    Mlp(MlpTrace),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub params: EncoderParams,
}

impl Encoder {
    pub fn init(spec: EncoderSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let params = match &spec {
            EncoderSpec::Fourier(c) => EncoderParams::Fourier(fourier::init_params(c, rng)?),
            EncoderSpec::Embed(c) => EncoderParams::Embed(EmbedTable::init(c, rng)?),
            EncoderSpec::MlpOnly(c) => EncoderParams::Mlp(MlpParams::init(
                c.coords_per_group,
                c.hidden_dim,
                c.encoding_dim / c.groups,
                c.use_layer_norm,
                rng,
            )?),
            _ => EncoderParams::None,
        };
        Ok(Encoder { spec, params })
    }

    /// Pairs a spec with existing parameters after checking their shapes.
    pub fn from_parts(spec: EncoderSpec, params: EncoderParams) -> Result<Self> {
        spec.validate()?;
        let ok = match (&spec, &params) {
            (EncoderSpec::Fourier(c), EncoderParams::Fourier(p)) => {
                p.mlp.check()?;
                p.w_r.shape() == [c.fourier_dim / 2, c.coords_per_group]
                    && p.mlp.in_dim() == c.fourier_dim
                    && p.mlp.hidden_dim() == c.hidden_dim
                    && p.mlp.out_dim() == c.group_dim()
                    && p.mlp.ln_in.is_some() == c.use_layer_norm
                    && p.trainable_fourier == c.trainable_fourier
            }
            (EncoderSpec::Embed(c), EncoderParams::Embed(t)) => {
                t.tables.len() == c.dims()
                    && t.tables
                        .iter()
                        .zip(c.vocab.iter().zip(&c.widths))
                        .all(|(t, (&v, &w))| t.shape() == [v, w])
            }
            (EncoderSpec::MlpOnly(c), EncoderParams::Mlp(p)) => {
                p.check()?;
                p.in_dim() == c.coords_per_group
                    && p.hidden_dim() == c.hidden_dim
                    && p.out_dim() == c.encoding_dim / c.groups
                    && p.ln_in.is_some() == c.use_layer_norm
            }
            (
                EncoderSpec::Sine1D(_) | EncoderSpec::SineConcat(_) | EncoderSpec::MdSine(_) | EncoderSpec::Zero(_),
                EncoderParams::None,
            ) => true,
            _ => false,
        };
        if ok {
            Ok(Encoder { spec, params })
        } else {
            Err(Error::shape(
                "Encoder",
                format!("parameters do not match a {} spec", spec.kind()),
            ))
        }
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Every stored tensor, including a frozen `w_r`.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        match &self.params {
            EncoderParams::Fourier(p) => {
                let mut out = vec![("w_r".to_string(), &p.w_r)];
                out.extend(p.mlp.named(""));
                out
            }
            EncoderParams::Embed(t) => t.params(),
            EncoderParams::Mlp(p) => p.named(""),
            EncoderParams::None => Vec::new(),
        }
    }

    fn check_positions(&self, positions: &Tensor) -> Result<()> {
        if positions.ndim() != 2 || positions.cols() != self.input_width() || positions.rows() == 0 {
            return Err(Error::shape(
                "encode",
                format!(
                    "{} encoder takes [N, {}] positions, got {:?}",
                    self.spec.kind(),
                    self.input_width(),
                    positions.shape()
                ),
            ));
        }
        Ok(())
    }

    /// `[N, width] → [N, D]`.
    pub fn encode(&self, positions: &Tensor, mode: &mut Mode<'_>) -> Result<Tensor> {
        self.encode_traced(positions, mode).map(|(pe, _)| pe)
    }

    pub fn encode_traced(&self, positions: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, EncoderTrace)> {
        self.check_positions(positions)?;
        let n = positions.rows();
        let rows = |f: &dyn Fn(&[f64]) -> Result<Tensor>| -> Result<Tensor> {
            let mut data = Vec::with_capacity(n * self.output_dim());
            for r in 0..n {
                data.extend_from_slice(f(positions.row(r))?.data());
            }
            Tensor::new(vec![n, self.output_dim()], data)
        };
        match (&self.spec, &self.params) {
            (EncoderSpec::Fourier(c), EncoderParams::Fourier(p)) => {
                let batch = PositionBatch::from_flat(positions, c.groups, c.coords_per_group)?;
                let (pe, t) = fourier::encode_traced(&batch, p, c, mode)?;
                Ok((pe, EncoderTrace::Fourier(t)))
            }
            (EncoderSpec::Sine1D(c) | EncoderSpec::SineConcat(c), EncoderParams::None) => {
                Ok((rows(&|x| c.encode_row(x))?, EncoderTrace::None))
            }
            (EncoderSpec::MdSine(c), EncoderParams::None) => Ok((rows(&|x| c.encode_row(x))?, EncoderTrace::None)),
            (EncoderSpec::Embed(c), EncoderParams::Embed(t)) => {
                let (pe, resolved) = embed_batch(positions, t, c.clamp)?;
                Ok((pe, EncoderTrace::Embed(resolved)))
            }
            (EncoderSpec::MlpOnly(c), EncoderParams::Mlp(p)) => {
                let x = positions.clone().reshape(&[n * c.groups, c.coords_per_group])?;
                let (y, t) = mlp_forward_traced(&x, p, c.dropout, mode)?;
                Ok((y.reshape(&[n, c.encoding_dim])?, EncoderTrace::Mlp(t)))
            }
            (EncoderSpec::Zero(c), EncoderParams::None) => {
                Ok((Tensor::zeros(&[n, c.encoding_dim]), EncoderTrace::None))
            }
            _ => Err(Error::shape("encode", "parameters do not match the spec")),
        }
    }

    /// The representation compared by similarity analyses. For Fourier
    /// encoders the `Fourier` stage concatenates the per-group feature
    /// vectors scaled by `1/√G`, so self-similarity stays ½; other
    /// encoders have no separate stage and return their encoding.
    pub fn representation(&self, positions: &Tensor, stage: Stage) -> Result<Tensor> {
        match (&self.spec, &self.params, stage) {
            (EncoderSpec::Fourier(c), EncoderParams::Fourier(p), Stage::Fourier) => {
                self.check_positions(positions)?;
                let batch = PositionBatch::from_flat(positions, c.groups, c.coords_per_group)?;
                let f = fourier::fourier_features(&batch, &p.w_r)?;
                let n = batch.len();
                f.reshape(&[n, c.groups * c.fourier_dim])?
                    .scale(1.0 / (c.groups as f64).sqrt())
            }
            _ => self.encode(positions, &mut Mode::Eval),
        }
    }
}

impl ParamSet for Encoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        match &self.params {
            EncoderParams::Fourier(p) => p.params(),
            EncoderParams::Embed(t) => t.params(),
            EncoderParams::Mlp(p) => p.named(""),
            EncoderParams::None => Vec::new(),
        }
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        match &mut self.params {
            EncoderParams::Fourier(p) => p.params_mut(),
            EncoderParams::Embed(t) => t.params_mut(),
            EncoderParams::Mlp(p) => p.named_mut(""),
            EncoderParams::None => Vec::new(),
        }
    }
}
