//! Reverse-mode gradients through every encoder family.

use super::grads::GradientStore;
use crate::encoders::{
    Encoder, EncoderParams, EncoderSpec, EncoderTrace, FourierTrace, LayerNormParams, LayerNormTrace, MlpParams,
    MlpTrace,
};
use crate::error::{Error, Result};
use crate::numerics::{gelu_grad_scalar, Tensor};

fn layer_norm_backward(
    dy: &Tensor,
    p: &LayerNormParams,
    t: &LayerNormTrace,
    grads: &mut GradientStore,
    prefix: &str,
) -> Result<Tensor> {
    let d = dy.cols();
    let mut dgain = vec![0.0; d];
    let mut dbias = vec![0.0; d];
    let mut dx = Tensor::zeros(&[dy.rows(), d]);
    for r in 0..dy.rows() {
        let (g, xh) = (dy.row(r), t.xhat.row(r));
        let mut dxhat = vec![0.0; d];
        for k in 0..d {
            dgain[k] += g[k] * xh[k];
            dbias[k] += g[k];
            dxhat[k] = g[k] * p.gain.data()[k];
        }
        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        for (k, out) in dx.row_mut(r).iter_mut().enumerate() {
            *out = t.inv_std[r] * (dxhat[k] - mean_d - xh[k] * mean_dx);
        }
    }
    grads.add_named(&format!("{prefix}.gain"), &Tensor::vector(dgain)?, 1.0)?;
    grads.add_named(&format!("{prefix}.bias"), &Tensor::vector(dbias)?, 1.0)?;
    Ok(dx)
}

/// Backpropagates `dy: [R, out]` through one MLP pass, adding parameter
/// gradients into `grads` and returning the gradient of the input rows.
fn mlp_backward(dy: &Tensor, p: &MlpParams, t: &MlpTrace, grads: &mut GradientStore) -> Result<Tensor> {
    grads.add_named("w2", &t.second_in.t_matmul(dy)?, 1.0)?;
    grads.add_named("b2", &dy.sum_rows(), 1.0)?;
    let mut dh = dy.matmul_t(&p.w2)?;
    if let (Some(lp), Some(lt)) = (&p.ln_hidden, &t.ln_hidden) {
        dh = layer_norm_backward(&dh, lp, lt, grads, "ln_hidden")?;
    }
    if let Some(mask) = &t.mask {
        for (v, m) in dh.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }
    for (v, &a) in dh.data_mut().iter_mut().zip(t.pre.data()) {
        *v *= gelu_grad_scalar(a);
    }
    grads.add_named("w1", &t.first_in.t_matmul(&dh)?, 1.0)?;
    grads.add_named("b1", &dh.sum_rows(), 1.0)?;
    let mut dx = dh.matmul_t(&p.w1)?;
    if let (Some(lp), Some(lt)) = (&p.ln_in, &t.ln_in) {
        dx = layer_norm_backward(&dx, lp, lt, grads, "ln_in")?;
    }
    Ok(dx)
}

/// Gradient of `W_r` given the gradient of the Fourier features
/// `d_features: [N·G, |F|]`.
pub(crate) fn fourier_features_backward(t: &FourierTrace, d_features: &Tensor) -> Result<Tensor> {
    let u = &t.projections;
    let half = u.cols();
    let scale = 1.0 / ((2 * half) as f64).sqrt();
    let mut du = Tensor::zeros(u.shape());
    for r in 0..u.rows() {
        let df = d_features.row(r);
        for (k, out) in du.row_mut(r).iter_mut().enumerate() {
            let a = u.row(r)[k];
            *out = scale * (-a.sin() * df[k] + a.cos() * df[half + k]);
        }
    }
    du.t_matmul(&t.positions.group_rows())
}

/// Exact gradients of `⟨upstream, encode(x)⟩` for every trainable tensor,
/// using the trace recorded by the forward pass.
pub fn backward_encode(encoder: &Encoder, trace: &EncoderTrace, upstream: &Tensor) -> Result<GradientStore> {
    let n = match trace {
        EncoderTrace::Fourier(t) => t.positions.len(),
        EncoderTrace::Embed(rows) => rows.len(),
        EncoderTrace::Mlp(t) => t.pre.rows() / groups(&encoder.spec),
        EncoderTrace::None => upstream.rows(),
    };
    if upstream.shape() != [n, encoder.output_dim()] {
        return Err(Error::shape(
            "backward_encode",
            format!(
                "upstream {:?} for output [{n}, {}]",
                upstream.shape(),
                encoder.output_dim()
            ),
        ));
    }
    let mut grads = GradientStore::zeros_like(encoder);
    match (&encoder.spec, &encoder.params, trace) {
        (EncoderSpec::Fourier(c), EncoderParams::Fourier(p), EncoderTrace::Fourier(t)) => {
            let dy = upstream.clone().reshape(&[n * c.groups, c.group_dim()])?;
            let df = mlp_backward(&dy, &p.mlp, &t.mlp, &mut grads)?;
            if p.trainable_fourier {
                let dw = fourier_features_backward(t, &df)?;
                grads.add_named("w_r", &dw, 1.0)?;
            }
        }
        (EncoderSpec::Embed(_), EncoderParams::Embed(table), EncoderTrace::Embed(rows)) => {
            for (r, resolved) in rows.iter().enumerate() {
                let mut offset = 0;
                for (i, (&row, t)) in resolved.iter().zip(&table.tables).enumerate() {
                    let w = t.cols();
                    let g = grads.get_mut(&format!("table{i}")).expect("table gradient");
                    for (acc, &u) in g.row_mut(row).iter_mut().zip(&upstream.row(r)[offset..offset + w]) {
                        *acc += u;
                    }
                    offset += w;
                }
            }
        }
        (EncoderSpec::MlpOnly(c), EncoderParams::Mlp(p), EncoderTrace::Mlp(t)) => {
            let dy = upstream.clone().reshape(&[n * c.groups, c.encoding_dim / c.groups])?;
            mlp_backward(&dy, p, t, &mut grads)?;
        }
        (_, EncoderParams::None, EncoderTrace::None) => {}
        _ => return Err(Error::shape("backward_encode", "trace does not match the encoder")),
    }
    Ok(grads)
}

fn groups(spec: &EncoderSpec) -> usize {
    match spec {
        EncoderSpec::MlpOnly(c) => c.groups,
        _ => 1,
    }
}
