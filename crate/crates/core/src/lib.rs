//! Learnable Fourier feature positional encodings for multi-dimensional
//! spatial positions.
//!
//! A position `x ∈ R^M` is mapped to random-Fourier-style features
//! `r_x = [cos(x W_r^T) ‖ sin(x W_r^T)] / sqrt(|F|)`, whose pairwise dot
//! products depend only on `x - y`, and then modulated by a one-hidden-layer
//! GeLU perceptron. Positions may be split into `G` groups of `M`
//! coordinates that share the encoder weights; group outputs are
//! concatenated.
//!
//! The crate also contains the baseline encoders (sinusoidal, concatenated
//! sinusoidal, multi-dimensional sinusoidal, embedding tables, raw MLP),
//! kernel and similarity-heatmap diagnostics, a small analytic-gradient and
//! Adam training stack, and a toy attention task for comparing encoders on
//! seen and held-out positions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention_toy;
pub mod encoders;
mod error;
pub mod kernels;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{SeededRng, Tensor};
