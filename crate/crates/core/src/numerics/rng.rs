use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::Tensor;
use crate::error::{Error, Result};

/// Seeded ChaCha8 stream.
///
/// `fork` derives an independent child stream from the seed and a label
/// without consuming anything from the parent, so work can be split across
/// threads or subsystems while staying reproducible.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&self, stream: u64) -> SeededRng {
        SeededRng::new(splitmix64(self.seed ^ splitmix64(stream.wrapping_add(1))))
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dist {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

/// Draws i.i.d. samples from `dist` into a tensor of the given shape.
pub fn sample(rng: &mut SeededRng, dist: Dist, shape: &[usize]) -> Result<Tensor> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = match dist {
        Dist::Normal { mean, std } => {
            if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
                return Err(Error::Distribution(format!("Normal({mean}, {std})")));
            }
            let d = Normal::new(mean, std).map_err(|e| Error::Distribution(e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
        Dist::Uniform { lo, hi } => {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Distribution(format!("Uniform({lo}, {hi})")));
            }
            let d = Uniform::new(lo, hi).map_err(|e| Error::Distribution(e.to_string()))?;
            (0..n).map(|_| d.sample(rng)).collect()
        }
    };
    Tensor::new(shape.to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(t: &Tensor) -> (f64, f64) {
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    #[test]
    fn normal_moments_million_samples() {
        let gamma = 1.0;
        let t = sample(
            &mut SeededRng::new(11),
            Dist::Normal {
                mean: 0.0,
                std: 1.0 / gamma,
            },
            &[1_000_000],
        )
        .unwrap();
        let (mean, std) = moments(&t);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((std - 1.0).abs() < 0.01, "std {std}");
    }

    #[test]
    fn uniform_mean_million_samples() {
        let t = sample(
            &mut SeededRng::new(12),
            Dist::Uniform { lo: 0.0, hi: 1.0 },
            &[1_000_000],
        )
        .unwrap();
        assert!((moments(&t).0 - 0.5).abs() < 0.01);
        assert!(t.data().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn same_seed_same_tensor() {
        let d = Dist::Normal { mean: 0.0, std: 2.0 };
        let a = sample(&mut SeededRng::new(5), d, &[4, 7]).unwrap();
        let b = sample(&mut SeededRng::new(5), d, &[4, 7]).unwrap();
        assert_eq!(a, b);
        let c = sample(&mut SeededRng::new(6), d, &[4, 7]).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut rng = SeededRng::new(0);
        assert!(sample(&mut rng, Dist::Normal { mean: 0.0, std: 0.0 }, &[2]).is_err());
        assert!(sample(&mut rng, Dist::Normal { mean: 0.0, std: -1.0 }, &[2]).is_err());
        assert!(sample(&mut rng, Dist::Uniform { lo: 1.0, hi: 1.0 }, &[2]).is_err());
    }

    #[test]
    fn forks_are_independent_of_parent_consumption() {
        let mut a = SeededRng::new(9);
        let b = SeededRng::new(9);
        let _ = a.standard_normal();
        let (mut fa, mut fb) = (a.fork(3), b.fork(3));
        assert_eq!(fa.next_u64(), fb.next_u64());
        assert_ne!(b.fork(3).next_u64(), b.fork(4).next_u64());
    }
}
