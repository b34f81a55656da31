use std::io::Write;

use super::task::{generate_retrieval_task, Instance, RetrievalDataset, RetrievalTask};
use super::{attention_weights, AttentionParams};
use crate::encoders::{Encoder, EncoderSpec, Mode};
use crate::error::{Error, Result};
use crate::numerics::{dot_slices, sample, softmax_slice, Dist, ParamSet, SeededRng, Tensor};
use crate::training::{backward_encode, AdamConfig, AdamState, GradientStore};

#[derive(Clone, Debug, PartialEq)]
pub struct ToyConfig {
    pub steps: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    /// Query/key and value width.
    pub d_k: usize,
    /// Standard deviation of the random part of each content vector.
    pub content_noise: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            steps: 1500,
            batch: 32,
            adam: AdamConfig::with_lr(1e-2),
            d_k: 16,
            content_noise: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyResult {
    pub encoder: Encoder,
    pub seen_accuracy: f64,
    /// Zero when the encoder refused the held-out positions.
    pub unseen_accuracy: f64,
    /// Why the held-out split could not be encoded, if it could not.
    pub unseen_error: Option<String>,
    /// Mean cross-entropy per training step.
    pub trace: Vec<f64>,
    pub dataset: RetrievalDataset,
}

/// Positional encoder, attention over the items from the query token, and a
/// linear head scoring each item slot.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ToyModel {
    pub encoder: Encoder,
    pub attn: AttentionParams,
    pub head_w: Tensor,
    pub head_b: Tensor,
}

impl ParamSet for ToyModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<_> = self
            .encoder
            .params()
            .into_iter()
            .map(|(n, t)| (format!("pe.{n}"), t))
            .collect();
        out.extend(self.attn.params().into_iter().map(|(n, t)| (format!("attn.{n}"), t)));
        out.push(("head.w".into(), &self.head_w));
        out.push(("head.b".into(), &self.head_b));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<_> = self
            .encoder
            .params_mut()
            .into_iter()
            .map(|(n, t)| (format!("pe.{n}"), t))
            .collect();
        out.extend(
            self.attn
                .params_mut()
                .into_iter()
                .map(|(n, t)| (format!("attn.{n}"), t)),
        );
        out.push(("head.w".into(), &mut self.head_w));
        out.push(("head.b".into(), &mut self.head_b));
        out
    }
}

/// Token rows per instance: the items in order, then the query.
fn token_positions(batch: &[&Instance]) -> Result<Tensor> {
    let rows: Vec<Vec<f64>> = batch
        .iter()
        .flat_map(|i| i.items.iter().chain(std::iter::once(&i.query)))
        .map(|p| vec![p[0] as f64, p[1] as f64])
        .collect();
    Tensor::from_rows(&rows)
}

/// Item `k` carries the one-hot of slot `k`, the query the one-hot of slot
/// `K`; the remaining coordinates are Gaussian noise.
fn content(batch: usize, items: usize, width: usize, noise: f64, rng: &mut SeededRng) -> Result<Tensor> {
    let mut c = if noise > 0.0 {
        sample(
            rng,
            Dist::Normal { mean: 0.0, std: noise },
            &[batch * (items + 1), width],
        )?
    } else {
        Tensor::zeros(&[batch * (items + 1), width])
    };
    for r in 0..c.rows() {
        let slot = r % (items + 1);
        let row = c.row_mut(r);
        row[..=items].fill(0.0);
        row[slot] = 1.0;
    }
    Ok(c)
}

pub(crate) struct BatchOutcome {
    pub loss: f64,
    pub correct: usize,
    pub grads: Option<GradientStore>,
}

/// Mean cross-entropy over `batch`, accuracy, and optionally gradients.
pub(crate) fn forward_backward(
    model: &ToyModel,
    batch: &[&Instance],
    content: &Tensor,
    mode: &mut Mode<'_>,
    want_grads: bool,
) -> Result<BatchOutcome> {
    let k = batch[0].items.len();
    let t = k + 1;
    let (pe, trace) = model.encoder.encode_traced(&token_positions(batch)?, mode)?;
    let e = content.add(&pe)?;
    let scale = 1.0 / (model.attn.m_q.cols() as f64).sqrt();
    let mut grads = want_grads.then(|| GradientStore::zeros_like(model));
    let mut d_e = Tensor::zeros(e.shape());
    let (mut loss, mut correct) = (0.0, 0);
    let inv_b = 1.0 / batch.len() as f64;
    for (b, inst) in batch.iter().enumerate() {
        let rows: Vec<usize> = (b * t..b * t + k).collect();
        let e_items = e.select_rows(&rows)?;
        let e_q = e.select_rows(&[b * t + k])?;
        let q = e_q.matmul(&model.attn.m_q)?;
        let keys = e_items.matmul(&model.attn.m_k)?;
        let values = e_items.matmul(&model.attn.m_v)?;
        let (o, a) = attention_weights(&q, &keys, &values)?;
        let mut p = o.matmul(&model.head_w)?.add_row(&model.head_b)?.into_data();
        let pred = (0..k).fold(0, |best, i| if p[i] > p[best] { i } else { best });
        correct += usize::from(pred == inst.label);
        softmax_slice(&mut p);
        loss -= p[inst.label].max(f64::MIN_POSITIVE).ln() * inv_b;
        let Some(g) = grads.as_mut() else { continue };

        let mut dz = p;
        dz[inst.label] -= 1.0;
        dz.iter_mut().for_each(|v| *v *= inv_b);
        let dz = Tensor::new(vec![1, k], dz)?;
        g.add_named("head.w", &o.t_matmul(&dz)?, 1.0)?;
        g.add_named("head.b", &dz.clone().reshape(&[k])?, 1.0)?;
        let d_o = dz.matmul_t(&model.head_w)?;
        let a = a.data();
        let d_a: Vec<f64> = (0..k).map(|i| dot_slices(d_o.data(), values.row(i))).collect();
        let mean_da: f64 = a.iter().zip(&d_a).map(|(x, y)| x * y).sum();
        let d_s: Vec<f64> = (0..k).map(|i| a[i] * (d_a[i] - mean_da) * scale).collect();
        let d_s = Tensor::new(vec![1, k], d_s)?;
        let d_values = Tensor::new(vec![k, 1], a.to_vec())?.matmul(&d_o)?;
        let d_q = d_s.matmul(&keys)?;
        let d_keys = d_s.t_matmul(&q)?;
        g.add_named("attn.m_q", &e_q.t_matmul(&d_q)?, 1.0)?;
        g.add_named("attn.m_k", &e_items.t_matmul(&d_keys)?, 1.0)?;
        g.add_named("attn.m_v", &e_items.t_matmul(&d_values)?, 1.0)?;
        let d_items = d_keys
            .matmul_t(&model.attn.m_k)?
            .add(&d_values.matmul_t(&model.attn.m_v)?)?;
        for (i, &r) in rows.iter().enumerate() {
            d_e.row_mut(r).copy_from_slice(d_items.row(i));
        }
        d_e.row_mut(b * t + k)
            .copy_from_slice(d_q.matmul_t(&model.attn.m_q)?.data());
    }
    if let Some(g) = grads.as_mut() {
        let pe_grads = backward_encode(&model.encoder, &trace, &d_e)?;
        for (name, t) in pe_grads.entries() {
            g.add_named(&format!("pe.{name}"), t, 1.0)?;
        }
    }
    Ok(BatchOutcome { loss, correct, grads })
}

fn accuracy(model: &ToyModel, split: &[Instance], width: usize, noise: f64, rng: &mut SeededRng) -> Result<f64> {
    let mut correct = 0;
    for chunk in split.chunks(256) {
        let refs: Vec<&Instance> = chunk.iter().collect();
        let c = content(refs.len(), refs[0].items.len(), width, noise, rng)?;
        correct += forward_backward(model, &refs, &c, &mut Mode::Eval, false)?.correct;
    }
    Ok(correct as f64 / split.len() as f64)
}

/// Trains encoder, attention and head jointly with Adam on the training
/// split, then reports accuracy on the seen and held-out test splits.
pub fn train_and_eval(spec: EncoderSpec, task: &RetrievalTask, cfg: &ToyConfig, rng: &SeededRng) -> Result<ToyResult> {
    let data = generate_retrieval_task(task, &mut rng.fork(1))?;
    let width = spec.output_dim();
    if spec.input_width() != 2 {
        return Err(Error::Config(format!(
            "retrieval positions are 2-D, encoder takes {}",
            spec.input_width()
        )));
    }
    if width < task.items + 1 {
        return Err(Error::Config(format!(
            "encoding width {width} cannot hold {} content slots",
            task.items + 1
        )));
    }
    if cfg.batch == 0 || cfg.d_k == 0 {
        return Err(Error::Config("batch and d_k must be positive".into()));
    }
    let mut init = rng.fork(2);
    let mut model = ToyModel {
        encoder: Encoder::init(spec, &mut init)?,
        attn: AttentionParams::init(width, cfg.d_k, cfg.d_k, &mut init)?,
        head_w: sample(
            &mut init,
            Dist::Normal {
                mean: 0.0,
                std: (1.0 / cfg.d_k as f64).sqrt(),
            },
            &[cfg.d_k, task.items],
        )?,
        head_b: Tensor::zeros(&[task.items]),
    };
    let mut adam = AdamState::new(cfg.adam);
    let mut batch_rng = rng.fork(3);
    let mut dropout_rng = rng.fork(4);
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<&Instance> = (0..cfg.batch)
            .map(|_| &data.train[batch_rng.below(data.train.len())])
            .collect();
        let c = content(batch.len(), task.items, width, cfg.content_noise, &mut batch_rng)?;
        let out = forward_backward(&model, &batch, &c, &mut Mode::Train(&mut dropout_rng), true)?;
        if !out.loss.is_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("loss {}", out.loss),
            });
        }
        trace.push(out.loss);
        let grads = out.grads.expect("requested");
        adam.step(&mut model, &grads).map_err(|e| Error::Diverged {
            step,
            detail: e.to_string(),
        })?;
    }
    let mut eval_rng = rng.fork(5);
    let seen_accuracy = accuracy(&model, &data.seen_test, width, cfg.content_noise, &mut eval_rng)?;
    let (unseen_accuracy, unseen_error) =
        match accuracy(&model, &data.unseen_test, width, cfg.content_noise, &mut eval_rng) {
            Ok(a) => (a, None),
            Err(e @ Error::UnseenIndex { .. }) => (0.0, Some(e.to_string())),
            Err(e) => return Err(e),
        };
    Ok(ToyResult {
        encoder: model.encoder,
        seen_accuracy,
        unseen_accuracy,
        unseen_error,
        trace,
        dataset: data,
    })
}

/// `encoder,seed,seen_acc,unseen_acc` with a header row.
pub fn write_results_csv(rows: &[(String, u64, f64, f64)], mut w: impl Write) -> Result<()> {
    writeln!(w, "encoder,seed,seen_acc,unseen_acc")?;
    for (name, seed, seen, unseen) in rows {
        writeln!(w, "{name},{seed},{seen},{unseen}")?;
    }
    Ok(())
}
