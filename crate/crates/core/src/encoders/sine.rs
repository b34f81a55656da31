//! Parameter-free sinusoidal baselines.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DEFAULT_BASE: f64 = 10_000.0;
/// Per-axis wavelength bases of the two-dimensional combined sinusoid.
pub const MD_SINE_BASES: [f64; 2] = [10_000.0, 5_000.0];

/// `PE[2d] = sin(p / base^(2d/D))`, `PE[2d+1] = cos(p / base^(2d/D))`.
pub fn sine_1d_with_base(p: f64, dim: usize, base: f64) -> Result<Tensor> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "sinusoidal encoding needs an even width, got {dim}"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    for d in 0..dim / 2 {
        let angle = p / base.powf((2 * d) as f64 / dim as f64);
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Tensor::vector(out)
}

pub fn sine_1d(p: f64, dim: usize) -> Result<Tensor> {
    sine_1d_with_base(p, dim, DEFAULT_BASE)
}

/// Each coordinate encoded by `sine_1d` into `D/M` values, blocks
/// concatenated in coordinate order.
pub fn sine_concat_md_with_base(x: &[f64], dim: usize, base: f64) -> Result<Tensor> {
    let m = x.len();
    if m == 0 || !dim.is_multiple_of(m) || !(dim / m).is_multiple_of(2) || dim == 0 {
        return Err(Error::Config(format!(
            "width {dim} cannot be split into {m} even per-coordinate blocks"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    for &c in x {
        out.extend_from_slice(sine_1d_with_base(c, dim / m, base)?.data());
    }
    Tensor::vector(out)
}

pub fn sine_concat_md(x: &[f64], dim: usize) -> Result<Tensor> {
    sine_concat_md_with_base(x, dim, DEFAULT_BASE)
}

/// `PE[2d] = sin(x / b_x^(2d/D) + y / b_y^(2d/D))`, cosine at `2d+1`.
pub fn md_sine(x: &[f64], dim: usize, bases: [f64; 2]) -> Result<Tensor> {
    if x.len() != 2 {
        return Err(Error::Config(format!(
            "combined sinusoid is defined for 2-D positions, got {} coordinates",
            x.len()
        )));
    }
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "sinusoidal encoding needs an even width, got {dim}"
        )));
    }
    let mut out = Vec::with_capacity(dim);
    for d in 0..dim / 2 {
        let e = (2 * d) as f64 / dim as f64;
        let angle = x[0] / bases[0].powf(e) + x[1] / bases[1].powf(e);
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Tensor::vector(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SineConfig {
    pub encoding_dim: usize,
    /// Number of coordinates; 1 for the flattened-sequence variant.
    pub coords: usize,
    pub base: f64,
    /// Multiplies raw coordinates before encoding.
    pub scale: f64,
}

impl SineConfig {
    pub fn new(encoding_dim: usize, coords: usize) -> Result<Self> {
        let c = SineConfig {
            encoding_dim,
            coords,
            base: DEFAULT_BASE,
            scale: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.encoding_dim;
        if self.coords == 0 || d == 0 || !d.is_multiple_of(self.coords) || !(d / self.coords).is_multiple_of(2) {
            return Err(Error::Config(format!(
                "width {d} cannot be split into {} even per-coordinate blocks",
                self.coords
            )));
        }
        if !(self.base > 1.0 && self.base.is_finite()) || !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::Config(
                "sinusoid base must exceed 1 and scale must be nonzero".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn encode_row(&self, x: &[f64]) -> Result<Tensor> {
        let scaled: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        sine_concat_md_with_base(&scaled, self.encoding_dim, self.base)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdSineConfig {
    pub encoding_dim: usize,
    pub bases: [f64; 2],
    pub scale: f64,
}

impl MdSineConfig {
    pub fn new(encoding_dim: usize) -> Result<Self> {
        let c = MdSineConfig {
            encoding_dim,
            bases: MD_SINE_BASES,
            scale: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoding_dim == 0 || !self.encoding_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "md-sine width {} must be even",
                self.encoding_dim
            )));
        }
        if self.bases.iter().any(|b| !(*b > 1.0 && b.is_finite())) || !(self.scale.is_finite() && self.scale != 0.0) {
            return Err(Error::Config(
                "md-sine bases must exceed 1 and scale must be nonzero".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn encode_row(&self, x: &[f64]) -> Result<Tensor> {
        let scaled: Vec<f64> = x.iter().map(|v| v * self.scale).collect();
        md_sine(&scaled, self.encoding_dim, self.bases)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_alternates_zero_one() {
        let pe = sine_1d(0.0, 8).unwrap();
        assert_eq!(pe.data(), &[0., 1., 0., 1., 0., 1., 0., 1.]);
        let md = md_sine(&[0.0, 0.0], 6, MD_SINE_BASES).unwrap();
        assert_eq!(md.data(), &[0., 1., 0., 1., 0., 1.]);
    }

    #[test]
    fn first_pair_is_unscaled_trig() {
        let pe = sine_1d(1.0, 16).unwrap();
        assert!((pe.data()[0] - 0.841471).abs() < 1e-6);
        assert!((pe.data()[1] - 0.540302).abs() < 1e-6);
    }

    #[test]
    fn wavelength_endpoint() {
        // 2d/D = 1 sits one past the last pair, so check p = base^(2d/D)
        // on the last pair of a width-4 encoding (2d/D = 1/2, p = 100).
        let pe = sine_1d(100.0, 4).unwrap();
        assert!((pe.data()[2] - 1f64.sin()).abs() < 1e-12);
        assert!((pe.data()[3] - 1f64.cos()).abs() < 1e-12);
        let angle: f64 = 10_000.0 / DEFAULT_BASE.powf(1.0);
        assert_eq!((angle.sin(), angle.cos()), (1f64.sin(), 1f64.cos()));
    }

    #[test]
    fn md_sine_first_pair_sums_coordinates() {
        let pe = md_sine(&[1.0, 1.0], 8, MD_SINE_BASES).unwrap();
        assert!((pe.data()[0] - 0.909297).abs() < 1e-6);
        assert!((pe.data()[1] + 0.416147).abs() < 1e-6);
        let pe = md_sine(&[0.3, -1.2], 8, MD_SINE_BASES).unwrap();
        assert!((pe.data()[0] - (0.3f64 - 1.2).sin()).abs() < 1e-15);
    }

    #[test]
    fn concat_self_dot_is_half_width() {
        let x = [3.0, -17.5];
        let pe = sine_concat_md(&x, 64).unwrap();
        assert!((pe.dot(&pe).unwrap() - 32.0).abs() < 1e-12);
        let zero = sine_concat_md(&[0.0, 0.0], 8).unwrap();
        let block = sine_1d(0.0, 4).unwrap();
        assert_eq!(&zero.data()[..4], block.data());
        assert_eq!(&zero.data()[4..], block.data());
    }

    #[test]
    fn invalid_widths_rejected() {
        assert!(sine_1d(0.0, 7).is_err());
        assert!(sine_concat_md(&[0.0, 0.0], 6).is_err());
        assert!(sine_concat_md(&[0.0, 0.0, 0.0], 8).is_err());
        assert!(md_sine(&[0.0, 0.0, 0.0], 8, MD_SINE_BASES).is_err());
    }
}
