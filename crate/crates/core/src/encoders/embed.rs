//! Trainable lookup tables, one per embedded coordinate, concatenated.

use crate::error::{Error, Result};
use crate::numerics::{sample, Dist, ParamSet, SeededRng, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedConfig {
    /// Vocabulary size per embedded dimension.
    pub vocab: Vec<usize>,
    /// Embedding width per dimension; the widths sum to `D`.
    pub widths: Vec<usize>,
    pub init_std: f64,
    /// Clamp out-of-range indices to the nearest row instead of failing.
    pub clamp: bool,
}

impl EmbedConfig {
    pub fn new(vocab: Vec<usize>, widths: Vec<usize>, init_std: f64) -> Result<Self> {
        let c = EmbedConfig {
            vocab,
            widths,
            init_std,
            clamp: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab.is_empty() || self.vocab.len() != self.widths.len() {
            return Err(Error::Config(format!(
                "embedding needs one width per vocabulary, got {} and {}",
                self.vocab.len(),
                self.widths.len()
            )));
        }
        if self.vocab.iter().chain(&self.widths).any(|&v| v == 0) {
            return Err(Error::Config("vocabulary sizes and widths must be positive".into()));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::Config(format!(
                "init_std must be positive, got {}",
                self.init_std
            )));
        }
        Ok(())
    }

    pub fn encoding_dim(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn dims(&self) -> usize {
        self.vocab.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedTable {
    /// `tables[i]` has shape `[vocab_i, width_i]`.
    pub tables: Vec<Tensor>,
}

impl EmbedTable {
    pub fn init(config: &EmbedConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let tables = config
            .vocab
            .iter()
            .zip(&config.widths)
            .map(|(&v, &w)| {
                sample(
                    rng,
                    Dist::Normal {
                        mean: 0.0,
                        std: config.init_std,
                    },
                    &[v, w],
                )
            })
            .collect::<Result<_>>()?;
        Ok(EmbedTable { tables })
    }

    pub fn encoding_dim(&self) -> usize {
        self.tables.iter().map(|t| t.cols()).sum()
    }
}

impl ParamSet for EmbedTable {
    fn params(&self) -> Vec<(String, &Tensor)> {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("table{i}"), t))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.tables
            .iter_mut()
            .enumerate()
            .map(|(i, t)| (format!("table{i}"), t))
            .collect()
    }
}

/// Resolves one index against a vocabulary. Out-of-range indices are an
/// error unless `clamp` is set.
pub fn resolve_index(dim: usize, index: i64, vocab: usize, clamp: bool) -> Result<usize> {
    if (0..vocab as i64).contains(&index) {
        Ok(index as usize)
    } else if clamp {
        Ok(index.clamp(0, vocab as i64 - 1) as usize)
    } else {
        Err(Error::UnseenIndex { dim, index, vocab })
    }
}

/// Concatenation of `table_i[indices[i]]`.
pub fn embed_lookup(indices: &[i64], table: &EmbedTable, clamp: bool) -> Result<Tensor> {
    if indices.len() != table.tables.len() {
        return Err(Error::shape(
            "embed_lookup",
            format!("{} indices for {} tables", indices.len(), table.tables.len()),
        ));
    }
    let mut out = Vec::with_capacity(table.encoding_dim());
    for (dim, (&ix, t)) in indices.iter().zip(&table.tables).enumerate() {
        let row = resolve_index(dim, ix, t.rows(), clamp)?;
        out.extend_from_slice(t.row(row));
    }
    Tensor::vector(out)
}

/// Converts a coordinate to a discrete index; coordinates must be integral.
pub(crate) fn coordinate_index(v: f64) -> Result<i64> {
    if v.fract() != 0.0 || !v.is_finite() || v.abs() > i64::MAX as f64 / 2.0 {
        return Err(Error::Config(format!(
            "embedding lookup needs integer coordinates, got {v}"
        )));
    }
    Ok(v as i64)
}

/// Looks up every row of `positions: [N, dims]`; returns `[N, D]` and the
/// resolved row indices for backpropagation.
pub(crate) fn embed_batch(positions: &Tensor, table: &EmbedTable, clamp: bool) -> Result<(Tensor, Vec<Vec<usize>>)> {
    if positions.cols() != table.tables.len() {
        return Err(Error::shape(
            "embed",
            format!(
                "positions of width {} for {} tables",
                positions.cols(),
                table.tables.len()
            ),
        ));
    }
    let d = table.encoding_dim();
    let mut data = Vec::with_capacity(positions.rows() * d);
    let mut resolved = Vec::with_capacity(positions.rows());
    for r in 0..positions.rows() {
        let mut rows = Vec::with_capacity(table.tables.len());
        for (dim, (&v, t)) in positions.row(r).iter().zip(&table.tables).enumerate() {
            let row = resolve_index(dim, coordinate_index(v)?, t.rows(), clamp)?;
            data.extend_from_slice(t.row(row));
            rows.push(row);
        }
        resolved.push(rows);
    }
    Ok((Tensor::new(vec![positions.rows(), d], data)?, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_preset_widths() {
        let cfg = EmbedConfig::new(vec![64, 64], vec![384, 384], 0.02).unwrap();
        let t = EmbedTable::init(&cfg, &mut SeededRng::new(1)).unwrap();
        assert_eq!(embed_lookup(&[3, 63], &t, false).unwrap().len(), 768);
    }

    #[test]
    fn flattened_preset_table_shape() {
        let cfg = EmbedConfig::new(vec![64 * 64], vec![768], 0.02).unwrap();
        let t = EmbedTable::init(&cfg, &mut SeededRng::new(1)).unwrap();
        assert_eq!(t.tables[0].shape(), &[4096, 768]);
    }

    #[test]
    fn zero_row_gives_zero_block() {
        let cfg = EmbedConfig::new(vec![4, 3], vec![2, 5], 1.0).unwrap();
        let mut t = EmbedTable::init(&cfg, &mut SeededRng::new(2)).unwrap();
        t.tables[0].row_mut(0).fill(0.0);
        let e = embed_lookup(&[0, 1], &t, false).unwrap();
        assert_eq!(&e.data()[..2], &[0.0, 0.0]);
        assert_eq!(&e.data()[2..], t.tables[1].row(1));
    }

    #[test]
    fn unseen_index_fails_unless_clamped() {
        let cfg = EmbedConfig::new(vec![4], vec![3], 1.0).unwrap();
        let t = EmbedTable::init(&cfg, &mut SeededRng::new(3)).unwrap();
        let err = embed_lookup(&[4], &t, false).unwrap_err();
        assert!(matches!(
            err,
            Error::UnseenIndex {
                dim: 0,
                index: 4,
                vocab: 4
            }
        ));
        assert!(embed_lookup(&[-1], &t, false).is_err());
        assert_eq!(embed_lookup(&[9], &t, true).unwrap().data(), t.tables[0].row(3));
        assert_eq!(embed_lookup(&[-2], &t, true).unwrap().data(), t.tables[0].row(0));
    }

    #[test]
    fn non_integer_coordinates_rejected() {
        let cfg = EmbedConfig::new(vec![4], vec![3], 1.0).unwrap();
        let t = EmbedTable::init(&cfg, &mut SeededRng::new(3)).unwrap();
        let p = Tensor::new(vec![1, 1], vec![1.5]).unwrap();
        assert!(embed_batch(&p, &t, false).is_err());
    }
}
