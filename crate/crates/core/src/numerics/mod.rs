//! Dense f64 tensors, seeded sampling and the elementwise functions the
//! encoders are built from.

mod ops;
mod params;
mod rng;
mod tensor;

pub use ops::{gelu, gelu_grad_scalar, gelu_scalar, layer_norm, normal_cdf, softmax, softmax_slice};
pub use params::ParamSet;
pub use rng::{sample, Dist, SeededRng};
pub(crate) use tensor::dot as dot_slices;
pub use tensor::Tensor;
