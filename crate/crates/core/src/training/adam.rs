use super::grads::GradientStore;
use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

/// Moment estimates keyed by parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<(String, Tensor, Tensor)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of every trainable tensor.
    pub fn step<P: ParamSet + ?Sized>(&mut self, params: &mut P, grads: &GradientStore) -> Result<()> {
        let c = self.config;
        if self.moments.is_empty() {
            self.moments = params
                .params()
                .into_iter()
                .map(|(n, t)| (n, Tensor::zeros(t.shape()), Tensor::zeros(t.shape())))
                .collect();
        }
        let mut ps = params.params_mut();
        if ps.len() != self.moments.len() {
            return Err(Error::shape("adam_step", "parameter set changed between steps"));
        }
        for ((name, p), (mname, m, _)) in ps.iter_mut().zip(&self.moments) {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::shape("adam_step", format!("no gradient for `{name}`")))?;
            if name != mname || g.shape() != p.shape() || m.shape() != p.shape() {
                return Err(Error::shape(
                    "adam_step",
                    format!("`{name}`: parameter {:?}, gradient {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite("adam_step gradient"));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (bc1, bc2) = (1.0 - c.beta1.powi(t), 1.0 - c.beta2.powi(t));
        for ((name, p), (_, m, v)) in ps.iter_mut().zip(self.moments.iter_mut()) {
            let g = grads.get(name).expect("checked above");
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                *w -= c.lr * (*mi / bc1) / ((*vi / bc2).sqrt() + c.eps);
            }
            if !p.is_finite() {
                return Err(Error::NonFinite("adam_step parameters"));
            }
        }
        Ok(())
    }
}

pub fn adam_step<P: ParamSet + ?Sized>(params: &mut P, grads: &GradientStore, state: &mut AdamState) -> Result<()> {
    state.step(params, grads)
}
