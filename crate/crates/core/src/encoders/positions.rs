use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// `N` positions, each split into `G` groups of `M` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionBatch {
    values: Tensor,
}

impl PositionBatch {
    /// Wraps a `[N, G, M]` tensor.
    pub fn new(values: Tensor) -> Result<Self> {
        match values.shape() {
            &[n, g, m] if n >= 1 && g >= 1 && m >= 1 => Ok(PositionBatch { values }),
            s => Err(Error::shape(
                "PositionBatch",
                format!("expected [N, G, M] with all extents >= 1, got {s:?}"),
            )),
        }
    }

    /// Builds a batch from flat rows of `G·M` coordinates.
    pub fn from_flat(rows: &Tensor, groups: usize, coords_per_group: usize) -> Result<Self> {
        if rows.ndim() != 2 || rows.cols() != groups * coords_per_group {
            return Err(Error::shape(
                "PositionBatch::from_flat",
                format!(
                    "rows of {:?} cannot be split into {groups} groups of {coords_per_group}",
                    rows.shape()
                ),
            ));
        }
        Self::new(rows.clone().reshape(&[rows.rows(), groups, coords_per_group])?)
    }

    pub fn from_rows(rows: &[Vec<f64>], groups: usize, coords_per_group: usize) -> Result<Self> {
        Self::from_flat(&Tensor::from_rows(rows)?, groups, coords_per_group)
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn groups(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn coords_per_group(&self) -> usize {
        self.values.shape()[2]
    }

    /// `[N·G, M]` view: one row per group instance.
    pub fn group_rows(&self) -> Tensor {
        let (n, g, m) = (self.len(), self.groups(), self.coords_per_group());
        self.values.clone().reshape(&[n * g, m]).expect("same element count")
    }

    /// `[N, G·M]` view.
    pub fn flat(&self) -> Tensor {
        let n = self.len();
        let w = self.groups() * self.coords_per_group();
        self.values.clone().reshape(&[n, w]).expect("same element count")
    }

    /// Maps integer grid coordinates into `(0, 1)` with pixel-center
    /// convention, `(v + 0.5) / extent`, one extent per flat coordinate.
    pub fn normalized(&self, extents: &[f64]) -> Result<Self> {
        let w = self.groups() * self.coords_per_group();
        if extents.len() != w || extents.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config(format!(
                "normalization needs {w} positive extents, got {extents:?}"
            )));
        }
        let mut values = self.values.clone();
        for (i, v) in values.data_mut().iter_mut().enumerate() {
            *v = (*v + 0.5) / extents[i % w];
        }
        Ok(PositionBatch {
            values: values.finite("normalized")?,
        })
    }

    pub fn shifted(&self, offset: &[f64]) -> Result<Self> {
        let w = self.groups() * self.coords_per_group();
        if offset.len() != w {
            return Err(Error::shape(
                "shifted",
                format!("offset of {} for width {w}", offset.len()),
            ));
        }
        let mut values = self.values.clone();
        for (i, v) in values.data_mut().iter_mut().enumerate() {
            *v += offset[i % w];
        }
        Ok(PositionBatch {
            values: values.finite("shifted")?,
        })
    }
}
