use rayon::prelude::*;

use crate::encoders::{Encoder, Stage};
use crate::error::{Error, Result};
use crate::numerics::{dot_slices, Tensor};

/// A `height × width` lattice of integer positions, optionally offset and
/// normalized into `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    /// Added to `(i, j)` before encoding.
    pub origin: [f64; 2],
    /// Maps each coordinate `v` to `(v + 0.5) / extent`.
    pub normalize: bool,
}

impl Grid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config("grid extents must be positive".into()));
        }
        Ok(Grid {
            height,
            width,
            origin: [0.0; 2],
            normalize: false,
        })
    }

    pub fn with_origin(mut self, origin: [f64; 2]) -> Self {
        self.origin = origin;
        self
    }

    pub fn normalized(mut self, on: bool) -> Self {
        self.normalize = on;
        self
    }

    /// Encoder input for cell `(i, j)`. A one-coordinate encoder sees the
    /// raster index `i·width + j`; wider encoders see `(i, j)` repeated to
    /// fill their input.
    pub fn point(&self, i: usize, j: usize, input_width: usize) -> Vec<f64> {
        let (y, x) = (i as f64 + self.origin[0], j as f64 + self.origin[1]);
        if input_width == 1 {
            let idx = y * self.width as f64 + x;
            let v = if self.normalize {
                (idx + 0.5) / (self.height * self.width) as f64
            } else {
                idx
            };
            return vec![v];
        }
        (0..input_width)
            .map(|k| {
                let (v, extent) = if k % 2 == 0 { (y, self.height) } else { (x, self.width) };
                if self.normalize {
                    (v + 0.5) / extent as f64
                } else {
                    v
                }
            })
            .collect()
    }

    fn row_positions(&self, i: usize, input_width: usize) -> Result<Tensor> {
        let rows: Vec<Vec<f64>> = (0..self.width).map(|j| self.point(i, j, input_width)).collect();
        Tensor::from_rows(&rows)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeatmapGrid {
    pub height: usize,
    pub width: usize,
    pub anchor: (usize, usize),
    /// `[height, width]` raw dot products against the anchor.
    pub values: Tensor,
}

impl HeatmapGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values.at2(i, j)
    }

    /// Cell-wise mean of heatmaps sharing extents and anchor.
    pub fn mean(maps: &[HeatmapGrid]) -> Result<HeatmapGrid> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Config("no heatmaps to average".into()))?;
        let mut acc = Tensor::zeros(first.values.shape());
        for m in maps {
            if (m.height, m.width, m.anchor) != (first.height, first.width, first.anchor) {
                return Err(Error::shape(
                    "HeatmapGrid::mean",
                    "heatmaps differ in extents or anchor",
                ));
            }
            acc.axpy(1.0, &m.values)?;
        }
        Ok(HeatmapGrid {
            values: acc.scale(1.0 / maps.len() as f64)?,
            ..first.clone()
        })
    }

    /// Cell holding the largest value (first in raster order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.data().iter().enumerate() {
            if v > self.values.data()[best] {
                best = k;
            }
        }
        (best / self.width, best % self.width)
    }

    fn bilinear(&self, y: f64, x: f64) -> f64 {
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = self.at(y0, x0) * (1.0 - fx) + self.at(y0, x1) * fx;
        let bottom = self.at(y1, x0) * (1.0 - fx) + self.at(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// `values[i][j] = repr(anchor) · repr((i, j))` for the chosen stage.
pub fn similarity_heatmap(encoder: &Encoder, grid: &Grid, anchor: (usize, usize), stage: Stage) -> Result<HeatmapGrid> {
    if anchor.0 >= grid.height || anchor.1 >= grid.width {
        return Err(Error::Config(format!(
            "anchor {anchor:?} outside a {}x{} grid",
            grid.height, grid.width
        )));
    }
    let w = encoder.input_width();
    let a = Tensor::from_rows(&[grid.point(anchor.0, anchor.1, w)])?;
    let a = encoder.representation(&a, stage)?;
    let rows = (0..grid.height)
        .into_par_iter()
        .map(|i| {
            let reps = encoder.representation(&grid.row_positions(i, w)?, stage)?;
            Ok((0..grid.width)
                .map(|j| dot_slices(a.data(), reps.row(j)))
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HeatmapGrid {
        height: grid.height,
        width: grid.width,
        anchor,
        values: Tensor::new(vec![grid.height, grid.width], rows.concat())?,
    })
}

/// Mean similarity at the four axis-aligned offsets of length `radius`
/// divided by the mean at the four diagonal offsets of the same length.
/// Off-lattice points are bilinearly interpolated.
pub fn anisotropy_ratio(h: &HeatmapGrid, radius: f64) -> Result<f64> {
    let (ay, ax) = (h.anchor.0 as f64, h.anchor.1 as f64);
    let fits = radius > 0.0
        && radius.is_finite()
        && ay - radius >= 0.0
        && ax - radius >= 0.0
        && ay + radius <= (h.height - 1) as f64
        && ax + radius <= (h.width - 1) as f64;
    if !fits {
        return Err(Error::Degenerate(format!(
            "radius {radius} does not fit around anchor {:?} in a {}x{} grid",
            h.anchor, h.height, h.width
        )));
    }
    let d = radius / 2f64.sqrt();
    let axis = [(radius, 0.0), (-radius, 0.0), (0.0, radius), (0.0, -radius)];
    let diag = [(d, d), (d, -d), (-d, d), (-d, -d)];
    let mean = |offs: &[(f64, f64)]| offs.iter().map(|(dy, dx)| h.bilinear(ay + dy, ax + dx)).sum::<f64>() / 4.0;
    let (a, g) = (mean(&axis), mean(&diag));
    if !(g > 0.0) {
        return Err(Error::Degenerate(format!("diagonal similarity {g} is not positive")));
    }
    Ok(a / g)
}

/// Top-left, top-right, center, bottom-left and bottom-right probe cells.
pub fn default_probes(height: usize, width: usize) -> Vec<(&'static str, (usize, usize))> {
    let (my, mx) = (height / 8, width / 8);
    vec![
        ("top-left", (my, mx)),
        ("top-right", (my, width - 1 - mx)),
        ("center", ((height - 1) / 2, (width - 1) / 2)),
        ("bottom-left", (height - 1 - my, mx)),
        ("bottom-right", (height - 1 - my, width - 1 - mx)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderSpec, FourierPEConfig, SineConfig};
    use crate::numerics::SeededRng;

    fn radial(h: usize, w: usize, anchor: (usize, usize), f: impl Fn(f64) -> f64) -> HeatmapGrid {
        let mut v = Vec::new();
        for i in 0..h {
            for j in 0..w {
                let dy = i as f64 - anchor.0 as f64;
                let dx = j as f64 - anchor.1 as f64;
                v.push(f((dy * dy + dx * dx).sqrt()));
            }
        }
        HeatmapGrid {
            height: h,
            width: w,
            anchor,
            values: Tensor::new(vec![h, w], v).unwrap(),
        }
    }

    #[test]
    fn radial_profile_is_isotropic() {
        let h = radial(33, 33, (16, 16), |r| 100.0 - r);
        let ratio = anisotropy_ratio(&h, 8.0).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
        let flat = radial(9, 9, (4, 4), |_| 2.0);
        assert_eq!(anisotropy_ratio(&flat, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn radius_must_fit() {
        let h = radial(9, 9, (4, 4), |r| 1.0 - r / 10.0);
        assert!(anisotropy_ratio(&h, 5.0).is_err());
        assert!(anisotropy_ratio(&h, 0.0).is_err());
    }

    #[test]
    fn fourier_stage_peaks_at_anchor() {
        let spec = EncoderSpec::Fourier(FourierPEConfig::new(1, 2, 64, 8, 8, 4.0).unwrap());
        let enc = Encoder::init(spec, &mut SeededRng::new(2)).unwrap();
        let grid = Grid::new(16, 16).unwrap();
        let h = similarity_heatmap(&enc, &grid, (5, 9), Stage::Fourier).unwrap();
        assert!((h.at(5, 9) - 0.5).abs() < 1e-12);
        assert_eq!(h.argmax(), (5, 9));
        assert!(similarity_heatmap(&enc, &grid, (16, 0), Stage::Fourier).is_err());
    }

    #[test]
    fn translation_leaves_fourier_stage_unchanged() {
        let spec = EncoderSpec::Fourier(FourierPEConfig::new(1, 2, 32, 8, 8, 2.0).unwrap());
        let enc = Encoder::init(spec, &mut SeededRng::new(4)).unwrap();
        let grid = Grid::new(8, 8).unwrap();
        let a = similarity_heatmap(&enc, &grid, (3, 3), Stage::Fourier).unwrap();
        let b = similarity_heatmap(&enc, &grid.with_origin([17.0, -5.0]), (3, 3), Stage::Fourier).unwrap();
        assert!(a.values.sub(&b.values).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn one_coordinate_encoders_see_raster_index() {
        let grid = Grid::new(4, 6).unwrap();
        assert_eq!(grid.point(2, 3, 1), vec![15.0]);
        assert_eq!(grid.point(2, 3, 4), vec![2.0, 3.0, 2.0, 3.0]);
        let n = grid.normalized(true);
        assert_eq!(n.point(0, 0, 2), vec![0.125, 0.5 / 6.0]);
        let enc = Encoder::init(
            EncoderSpec::Sine1D(SineConfig::new(8, 1).unwrap()),
            &mut SeededRng::new(0),
        )
        .unwrap();
        let h = similarity_heatmap(&enc, &Grid::new(4, 6).unwrap(), (1, 1), Stage::Full).unwrap();
        assert!((h.at(1, 1) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn probes_are_inside_and_distinct() {
        for (h, w) in [(64, 64), (42, 42), (9, 5)] {
            let p = default_probes(h, w);
            assert_eq!(p.len(), 5);
            for (_, (i, j)) in &p {
                assert!(*i < h && *j < w);
            }
        }
        assert_eq!(default_probes(64, 64)[2].1, (31, 31));
    }
}
