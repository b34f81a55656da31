//! Analytic gradients, the finite-difference oracle, losses, Adam and
//! kernel fitting.

mod adam;
mod backward;
mod fit;
mod grads;
mod kl;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::backward_encode;
pub use fit::{fit_kernel_target, lattice_positions, write_trace_csv, FitResult, KernelFitConfig, TraceRow};
pub use grads::{finite_diff_grad, GradientStore};
pub use kl::{kl_loss, kl_terms, moments, total_loss, KlRegConfig, KlTerms};
