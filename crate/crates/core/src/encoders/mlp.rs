//! The GeLU perceptron that modulates positional features:
//! `Y = GeLU(LN?(X)·W1 + B1) ⟶ dropout? ⟶ LN?(·)·W2 + B2`.

use crate::error::{Error, Result};
use crate::numerics::{gelu_scalar, sample, Dist, SeededRng, Tensor};

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Forward mode. Dropout only fires in `Train`, drawing its mask from the
/// supplied stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut SeededRng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNormParams {
    pub fn identity(width: usize) -> Self {
        LayerNormParams {
            gain: Tensor::full(&[width], 1.0),
            bias: Tensor::zeros(&[width]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    /// Applied to the input before `w1`.
    pub ln_in: Option<LayerNormParams>,
    /// Applied to the hidden activations before `w2`.
    pub ln_hidden: Option<LayerNormParams>,
}

impl MlpParams {
    /// Fan-in scaled normal weights, zero biases, identity LayerNorms.
    pub fn init(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        layer_norm: bool,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
            return Err(Error::Config("MLP dimensions must be positive".into()));
        }
        let w1 = sample(
            rng,
            Dist::Normal {
                mean: 0.0,
                std: (1.0 / in_dim as f64).sqrt(),
            },
            &[in_dim, hidden_dim],
        )?;
        let w2 = sample(
            rng,
            Dist::Normal {
                mean: 0.0,
                std: (1.0 / hidden_dim as f64).sqrt(),
            },
            &[hidden_dim, out_dim],
        )?;
        Ok(MlpParams {
            w1,
            b1: Tensor::zeros(&[hidden_dim]),
            w2,
            b2: Tensor::zeros(&[out_dim]),
            ln_in: layer_norm.then(|| LayerNormParams::identity(in_dim)),
            ln_hidden: layer_norm.then(|| LayerNormParams::identity(hidden_dim)),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.w2.shape()[1]
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str) -> Vec<(String, &'a Tensor)> {
        let mut out = Vec::new();
        if let Some(ln) = &self.ln_in {
            out.push((format!("{prefix}ln_in.gain"), &ln.gain));
            out.push((format!("{prefix}ln_in.bias"), &ln.bias));
        }
        out.push((format!("{prefix}w1"), &self.w1));
        out.push((format!("{prefix}b1"), &self.b1));
        if let Some(ln) = &self.ln_hidden {
            out.push((format!("{prefix}ln_hidden.gain"), &ln.gain));
            out.push((format!("{prefix}ln_hidden.bias"), &ln.bias));
        }
        out.push((format!("{prefix}w2"), &self.w2));
        out.push((format!("{prefix}b2"), &self.b2));
        out
    }

    pub(crate) fn named_mut<'a>(&'a mut self, prefix: &str) -> Vec<(String, &'a mut Tensor)> {
        let mut out = Vec::new();
        if let Some(ln) = &mut self.ln_in {
            out.push((format!("{prefix}ln_in.gain"), &mut ln.gain));
            out.push((format!("{prefix}ln_in.bias"), &mut ln.bias));
        }
        out.push((format!("{prefix}w1"), &mut self.w1));
        out.push((format!("{prefix}b1"), &mut self.b1));
        if let Some(ln) = &mut self.ln_hidden {
            out.push((format!("{prefix}ln_hidden.gain"), &mut ln.gain));
            out.push((format!("{prefix}ln_hidden.bias"), &mut ln.bias));
        }
        out.push((format!("{prefix}w2"), &mut self.w2));
        out.push((format!("{prefix}b2"), &mut self.b2));
        out
    }

    /// Rebuilds parameters from named tensors (checkpoint loading).
    pub(crate) fn from_named(
        prefix: &str,
        mut take: impl FnMut(&str) -> Result<Tensor>,
        layer_norm: bool,
    ) -> Result<Self> {
        let mut ln = |part: &str| -> Result<Option<LayerNormParams>> {
            if !layer_norm {
                return Ok(None);
            }
            Ok(Some(LayerNormParams {
                gain: take(&format!("{prefix}{part}.gain"))?,
                bias: take(&format!("{prefix}{part}.bias"))?,
            }))
        };
        let ln_in = ln("ln_in")?;
        let ln_hidden = ln("ln_hidden")?;
        let p = MlpParams {
            w1: take(&format!("{prefix}w1"))?,
            b1: take(&format!("{prefix}b1"))?,
            w2: take(&format!("{prefix}w2"))?,
            b2: take(&format!("{prefix}b2"))?,
            ln_in,
            ln_hidden,
        };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let (i, h, o) = (self.in_dim(), self.hidden_dim(), self.out_dim());
        let ok = self.w1.ndim() == 2
            && self.w2.shape() == [h, o]
            && self.b1.shape() == [h]
            && self.b2.shape() == [o]
            && self
                .ln_in
                .as_ref()
                .is_none_or(|l| l.gain.shape() == [i] && l.bias.shape() == [i])
            && self
                .ln_hidden
                .as_ref()
                .is_none_or(|l| l.gain.shape() == [h] && l.bias.shape() == [h]);
        if ok {
            Ok(())
        } else {
            Err(Error::shape("MlpParams", "inconsistent parameter shapes"))
        }
    }
}

/// Per-row statistics kept for the LayerNorm backward pass.
#[derive(Clone, Debug)]
pub(crate) struct LayerNormTrace {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
}

fn layer_norm_traced(x: &Tensor, p: &LayerNormParams) -> Result<(Tensor, LayerNormTrace)> {
    let d = x.cols();
    if p.gain.len() != d {
        return Err(Error::shape(
            "layer_norm",
            format!("gain {} for width {d}", p.gain.len()),
        ));
    }
    let mut xhat = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = xhat.row_mut(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.iter_mut().for_each(|v| *v = (*v - mean) * inv);
        inv_std.push(inv);
    }
    let mut y = xhat.clone();
    for r in 0..y.rows() {
        for ((v, g), b) in y.row_mut(r).iter_mut().zip(p.gain.data()).zip(p.bias.data()) {
            *v = *v * g + b;
        }
    }
    Ok((y.finite("layer_norm")?, LayerNormTrace { xhat, inv_std }))
}

/// Intermediate values of one MLP forward pass over `R` rows.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    pub(crate) ln_in: Option<LayerNormTrace>,
    /// Input to `w1` (after the optional input LayerNorm).
    pub(crate) first_in: Tensor,
    /// Pre-activation `first_in·W1 + B1`.
    pub(crate) pre: Tensor,
    /// Dropout scale per hidden entry (0 or 1/(1-p)); `None` when inactive.
    pub(crate) mask: Option<Vec<f64>>,
    pub(crate) ln_hidden: Option<LayerNormTrace>,
    /// Input to `w2`.
    pub(crate) second_in: Tensor,
}

/// Runs the MLP over rows of `x` (`[R, in]` or any `[..., in]`), returning
/// `[R, out]` and the trace needed for backpropagation.
pub fn mlp_forward_traced(
    x: &Tensor,
    params: &MlpParams,
    dropout: f64,
    mode: &mut Mode<'_>,
) -> Result<(Tensor, MlpTrace)> {
    if x.cols() != params.in_dim() {
        return Err(Error::shape(
            "mlp",
            format!("input width {} for W1 of {:?}", x.cols(), params.w1.shape()),
        ));
    }
    let x = x.clone().reshape(&[x.rows(), x.cols()])?;
    let (first_in, ln_in) = match &params.ln_in {
        Some(p) => {
            let (y, t) = layer_norm_traced(&x, p)?;
            (y, Some(t))
        }
        None => (x, None),
    };
    let pre = first_in.matmul(&params.w1)?.add_row(&params.b1)?;
    let mut hidden = pre.map(gelu_scalar);
    let mask = match mode {
        Mode::Train(rng) if dropout > 0.0 => {
            let keep = 1.0 - dropout;
            let m: Vec<f64> = (0..hidden.len())
                .map(|_| if rng.uniform(0.0, 1.0) < keep { 1.0 / keep } else { 0.0 })
                .collect();
            for (h, s) in hidden.data_mut().iter_mut().zip(&m) {
                *h *= s;
            }
            Some(m)
        }
        _ => None,
    };
    let (second_in, ln_hidden) = match &params.ln_hidden {
        Some(p) => {
            let (y, t) = layer_norm_traced(&hidden, p)?;
            (y, Some(t))
        }
        None => (hidden, None),
    };
    let out = second_in.matmul(&params.w2)?.add_row(&params.b2)?;
    Ok((
        out,
        MlpTrace {
            ln_in,
            first_in,
            pre,
            mask,
            ln_hidden,
            second_in,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal_cdf;

    #[test]
    fn zero_first_layer_outputs_bias() {
        let mut rng = SeededRng::new(1);
        let mut p = MlpParams::init(4, 3, 2, false, &mut rng).unwrap();
        p.w1 = Tensor::zeros(&[4, 3]);
        p.b2 = Tensor::vector(vec![0.25, -1.5]).unwrap();
        let x = sample(&mut rng, Dist::Normal { mean: 0.0, std: 1.0 }, &[5, 4]).unwrap();
        let (y, _) = mlp_forward_traced(&x, &p, 0.0, &mut Mode::Eval).unwrap();
        for r in 0..5 {
            assert_eq!(y.row(r), &[0.25, -1.5]);
        }
    }

    #[test]
    fn single_hidden_unit_matches_scalar_pipeline() {
        let p = MlpParams {
            w1: Tensor::new(vec![2, 1], vec![0.7, -1.3]).unwrap(),
            b1: Tensor::vector(vec![0.2]).unwrap(),
            w2: Tensor::new(vec![1, 1], vec![1.9]).unwrap(),
            b2: Tensor::vector(vec![-0.4]).unwrap(),
            ln_in: None,
            ln_hidden: None,
        };
        let x = Tensor::new(vec![1, 2], vec![0.5, 0.25]).unwrap();
        let (y, _) = mlp_forward_traced(&x, &p, 0.0, &mut Mode::Eval).unwrap();
        let a: f64 = 0.5 * 0.7 + 0.25 * -1.3 + 0.2;
        let expected = a * normal_cdf(a) * 1.9 - 0.4;
        assert!((y.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn dropout_only_in_train_mode() {
        let mut rng = SeededRng::new(2);
        let p = MlpParams::init(3, 64, 2, false, &mut rng).unwrap();
        let x = sample(&mut rng, Dist::Normal { mean: 0.0, std: 1.0 }, &[4, 3]).unwrap();
        let (a, ta) = mlp_forward_traced(&x, &p, 0.2, &mut Mode::Eval).unwrap();
        assert!(ta.mask.is_none());
        let mut drng = SeededRng::new(3);
        let (b, tb) = mlp_forward_traced(&x, &p, 0.2, &mut Mode::Train(&mut drng)).unwrap();
        let mask = tb.mask.unwrap();
        let dropped = mask.iter().filter(|&&m| m == 0.0).count();
        assert!(dropped > 0 && dropped < mask.len());
        assert_ne!(a, b);
    }
}
