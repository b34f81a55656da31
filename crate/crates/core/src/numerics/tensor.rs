use std::fmt;

use crate::error::{Error, Result};

/// Row-major dense tensor of `f64`.
///
/// Every constructor and fallible operation checks that `shape` and `data`
/// agree and that all entries are finite.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?} ", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, "{:?}", self.data)
        } else {
            write!(f, "[{} values]", self.data.len())
        }
    }
}

fn product(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if product(&shape) != data.len() {
            return Err(Error::shape(
                "Tensor::new",
                format!("shape {:?} needs {} values, got {}", shape, product(&shape), data.len()),
            ));
        }
        Tensor { shape, data }.finite("Tensor::new")
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; product(shape)],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    /// Builds a 2-D tensor from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("Tensor::from_rows", "ragged rows"));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the payload. Callers are responsible for keeping
    /// values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Size of the last axis.
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Number of last-axis rows, i.e. the product of all leading dimensions.
    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols()).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if product(shape) != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape, shape),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonFinite(op))
        }
    }

    fn require_2d(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            s => Err(Error::shape(op, format!("expected a matrix, got shape {s:?}"))),
        }
    }

    /// `self[..., k] × other[k, n] → [..., n]`. Leading axes of `self` are
    /// treated as rows. Sums run over `k` left to right.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (k, n) = other.require_2d("matmul")?;
        if self.ndim() == 0 || self.cols() != k {
            return Err(Error::shape("matmul", format!("{:?} × {:?}", self.shape, other.shape)));
        }
        let m = self.rows();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a = self.row(i);
            let o = &mut out[i * n..(i + 1) * n];
            for (p, &av) in a.iter().enumerate() {
                let b = &other.data[p * n..(p + 1) * n];
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().expect("ndim checked") = n;
        Tensor { shape, data: out }.finite("matmul")
    }

    /// `self[..., k] × other[n, k]^T → [..., n]`.
    pub fn matmul_t(&self, other: &Tensor) -> Result<Tensor> {
        let (n, k) = other.require_2d("matmul_t")?;
        if self.ndim() == 0 || self.cols() != k {
            return Err(Error::shape(
                "matmul_t",
                format!("{:?} × {:?}ᵀ", self.shape, other.shape),
            ));
        }
        let m = self.rows();
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out.push(dot(a, other.row(j)));
            }
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().expect("ndim checked") = n;
        Tensor { shape, data: out }.finite("matmul_t")
    }

    /// `self[m, k]^T × other[m, n] → [k, n]`, with `self` and `other` viewed
    /// as row matrices over their leading axes.
    pub fn t_matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rows() != other.rows() {
            return Err(Error::shape(
                "t_matmul",
                format!("{:?}ᵀ × {:?}", self.shape, other.shape),
            ));
        }
        let (k, n) = (self.cols(), other.cols());
        let mut out = vec![0.0; k * n];
        for r in 0..self.rows() {
            let a = self.row(r);
            let b = other.row(r);
            for (p, &av) in a.iter().enumerate() {
                let o = &mut out[p * n..(p + 1) * n];
                for (ov, &bv) in o.iter_mut().zip(b) {
                    *ov += av * bv;
                }
            }
        }
        Tensor {
            shape: vec![k, n],
            data: out,
        }
        .finite("t_matmul")
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.require_2d("transpose")?;
        let mut data = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                data.push(self.data[i * c + j]);
            }
        }
        Ok(Tensor {
            shape: vec![c, r],
            data,
        })
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::shape(op, format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Tensor {
            shape: self.shape.clone(),
            data,
        }
        .finite(op)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    /// In-place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("axpy", format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("axpy"))
        }
    }

    pub fn scale(&self, s: f64) -> Result<Tensor> {
        self.map(|v| v * s).finite("scale")
    }

    /// Elementwise map. The result is not checked for finiteness.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `bias[cols]` to every last-axis row.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor> {
        if bias.len() != self.cols() {
            return Err(Error::shape(
                "add_row",
                format!("bias of {} values for rows of {}", bias.len(), self.cols()),
            ));
        }
        let mut out = self.clone();
        let c = self.cols();
        for chunk in out.data.chunks_mut(c.max(1)) {
            for (v, &b) in chunk.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        out.finite("add_row")
    }

    /// Column sums over all leading axes, shape `[cols]`.
    pub fn sum_rows(&self) -> Tensor {
        let c = self.cols();
        let mut out = vec![0.0; c];
        for r in 0..self.rows() {
            for (o, &v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        Tensor {
            shape: vec![c],
            data: out,
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape("dot", format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Concatenates 2-D tensors with equal row counts along the last axis.
    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let rows = parts.first().map_or(0, |t| t.rows());
        if parts.iter().any(|t| t.ndim() != 2 || t.rows() != rows) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let cols: usize = parts.iter().map(|t| t.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for t in parts {
                data.extend_from_slice(t.row(r));
            }
        }
        Ok(Tensor {
            shape: vec![rows, cols],
            data,
        })
    }

    /// Selects rows of a 2-D view in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Tensor> {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= self.rows() {
                return Err(Error::shape("select_rows", format!("row {i} of {}", self.rows())));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Tensor {
            shape: vec![idx.len(), c],
            data,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
