//! Single-head scaled dot-product attention and a synthetic nearest-item
//! retrieval task for comparing encoders on seen and held-out positions.

mod model;
mod task;

pub use model::{train_and_eval, write_results_csv, ToyConfig, ToyResult};
pub use task::{generate_retrieval_task, nearest_item, write_instances_csv, Instance, RetrievalDataset, RetrievalTask};

use crate::error::{Error, Result};
use crate::numerics::{sample, softmax, Dist, ParamSet, SeededRng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    /// `[E, d_k]`.
    pub m_q: Tensor,
    /// `[E, d_k]`.
    pub m_k: Tensor,
    /// `[E, d_v]`.
    pub m_v: Tensor,
}

impl AttentionParams {
    /// Entries drawn from `N(0, 1/E)`.
    pub fn init(width: usize, d_k: usize, d_v: usize, rng: &mut SeededRng) -> Result<Self> {
        if width == 0 || d_k == 0 || d_v == 0 {
            return Err(Error::Config("attention widths must be positive".into()));
        }
        let d = Dist::Normal {
            mean: 0.0,
            std: (1.0 / width as f64).sqrt(),
        };
        Ok(AttentionParams {
            m_q: sample(rng, d, &[width, d_k])?,
            m_k: sample(rng, d, &[width, d_k])?,
            m_v: sample(rng, d, &[width, d_v])?,
        })
    }

    pub fn identity(width: usize) -> Self {
        AttentionParams {
            m_q: Tensor::eye(width),
            m_k: Tensor::eye(width),
            m_v: Tensor::eye(width),
        }
    }
}

impl ParamSet for AttentionParams {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("m_q".into(), &self.m_q),
            ("m_k".into(), &self.m_k),
            ("m_v".into(), &self.m_v),
        ]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("m_q".into(), &mut self.m_q),
            ("m_k".into(), &mut self.m_k),
            ("m_v".into(), &mut self.m_v),
        ]
    }
}

/// `softmax(Q Kᵀ / √d_k) V`, returning the output and the attention weights.
pub fn attention_weights(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<(Tensor, Tensor)> {
    if q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2 || q.cols() != k.cols() || k.rows() != v.rows() || k.rows() == 0
    {
        return Err(Error::shape(
            "attention",
            format!("Q {:?}, K {:?}, V {:?}", q.shape(), k.shape(), v.shape()),
        ));
    }
    let scores = q.matmul_t(k)?.scale(1.0 / (q.cols() as f64).sqrt())?;
    let a = softmax(&scores);
    Ok((a.matmul(v)?, a))
}

pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    attention_weights(q, k, v).map(|(out, _)| out)
}

/// `(E M_Q, E M_K, E M_V)`.
pub fn qkv_project(e: &Tensor, params: &AttentionParams) -> Result<(Tensor, Tensor, Tensor)> {
    Ok((e.matmul(&params.m_q)?, e.matmul(&params.m_k)?, e.matmul(&params.m_v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn singleton_returns_value_row() {
        let out = attention(
            &t(&[vec![0.3, -2.0]]),
            &t(&[vec![1.0, 5.0]]),
            &t(&[vec![7.0, 8.0, 9.0]]),
        )
        .unwrap();
        assert_eq!(out.data(), &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn identical_keys_average_values() {
        let k = t(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        let v = t(&[vec![1.0, 0.0], vec![2.0, 3.0], vec![6.0, 0.0]]);
        let out = attention(&t(&[vec![0.5, 0.5]]), &k, &v).unwrap();
        assert!((out.data()[0] - 3.0).abs() < 1e-12);
        assert!((out.data()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_hand_oracle() {
        let q = t(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        let k = t(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let v = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = attention(&q, &k, &v).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // Row 0 scores (1, 0)/√2; row 1 scores (2, 2)/√2.
        let w0 = 1.0 / (1.0 + (-s).exp());
        assert!((out.at2(0, 0) - (w0 * 1.0 + (1.0 - w0) * 3.0)).abs() < 1e-12);
        assert!((out.at2(0, 1) - (w0 * 2.0 + (1.0 - w0) * 4.0)).abs() < 1e-12);
        assert!((out.at2(1, 0) - 2.0).abs() < 1e-12);
        assert!((out.at2(1, 1) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn projections() {
        let mut rng = SeededRng::new(1);
        let e = sample(&mut rng, Dist::Normal { mean: 0.0, std: 1.0 }, &[5, 16]).unwrap();
        let (q, k, v) = qkv_project(&e, &AttentionParams::identity(16)).unwrap();
        assert_eq!((&q, &k, &v), (&e, &e, &e));
        let p = AttentionParams::init(16, 8, 4, &mut rng).unwrap();
        let (q, k, v) = qkv_project(&e, &p).unwrap();
        assert_eq!(
            (q.shape(), k.shape(), v.shape()),
            (&[5, 8][..], &[5, 8][..], &[5, 4][..])
        );
        let (q, _, _) = qkv_project(&Tensor::zeros(&[5, 16]), &p).unwrap();
        assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let a = Tensor::zeros(&[2, 3]);
        assert!(attention(&a, &Tensor::zeros(&[2, 4]), &a).is_err());
        assert!(attention(&a, &a, &Tensor::zeros(&[3, 3])).is_err());
    }
}
