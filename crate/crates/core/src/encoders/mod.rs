//! Positional encoders: learnable Fourier features and the baselines they
//! are compared against.

mod checkpoint;
mod config;
mod embed;
pub mod fourier;
mod mlp;
mod positions;
pub mod sine;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{parse_spec, serialize_spec};
pub use embed::{embed_lookup, resolve_index, EmbedConfig, EmbedTable};
pub use fourier::{
    encode, fourier_features, init_params, mlp_modulate, FourierPEConfig, FourierPEParams, FourierTrace, WeightInit,
};
pub(crate) use mlp::LayerNormTrace;
pub use mlp::{mlp_forward_traced, LayerNormParams, MlpParams, MlpTrace, Mode, LAYER_NORM_EPS};
pub use positions::PositionBatch;
pub use sine::{md_sine, sine_1d, sine_concat_md, MdSineConfig, SineConfig};
pub use spec::{Encoder, EncoderParams, EncoderSpec, EncoderTrace, MlpOnlyConfig, Stage, ZeroConfig};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineMode {
    Add,
    Concat,
}

/// Joins content embeddings `[N, C]` with positional encodings `[N, D]`.
pub fn combine(content: &Tensor, pe: &Tensor, mode: CombineMode) -> Result<Tensor> {
    if content.ndim() != 2 || pe.ndim() != 2 || content.rows() != pe.rows() {
        return Err(Error::shape(
            "combine",
            format!("content {:?} with encodings {:?}", content.shape(), pe.shape()),
        ));
    }
    match mode {
        CombineMode::Add => content.add(pe),
        CombineMode::Concat => Tensor::concat_cols(&[content, pe]),
    }
}
