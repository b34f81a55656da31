use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Tensor;
use crate::error::{Error, Result};

/// Standard normal CDF, `Φ(x) = erfc(-x/√2)/2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Exact GeLU, `x·Φ(x)`.
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

/// `d/dx [x·Φ(x)] = Φ(x) + x·φ(x)`.
pub fn gelu_grad_scalar(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

pub fn gelu(x: &Tensor) -> Tensor {
    x.map(gelu_scalar)
}

/// Normalizes the last axis to zero mean and unit (population) variance,
/// then applies `gain` and `bias`.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let d = x.cols();
    if d == 0 || gain.len() != d || bias.len() != d {
        return Err(Error::shape(
            "layer_norm",
            format!("width {d}, gain {}, bias {}", gain.len(), bias.len()),
        ));
    }
    let mut out = x.clone();
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for ((v, g), b) in row.iter_mut().zip(gain.data()).zip(bias.data()) {
            *v = (*v - mean) * inv * g + b;
        }
    }
    out.finite("layer_norm")
}

/// In-place softmax of one slice with max subtraction.
pub fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Softmax over the last axis.
pub fn softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..x.rows() {
        softmax_slice(out.row_mut(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[f64]) -> Tensor {
        Tensor::vector(data.to_vec()).unwrap()
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu_scalar(0.0), 0.0);
        assert!((gelu_scalar(10.0) - 10.0).abs() < 1e-9);
        // Φ(1) = (1 + erf(1/√2))/2 = 0.8413447460685429
        assert!((gelu_scalar(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((gelu_scalar(1.0) - 0.841345).abs() < 1e-6);
    }

    #[test]
    fn gelu_is_monotone_on_each_side_of_its_minimum() {
        // Exact GeLU dips to about -0.17 at x ≈ -0.7518: nonincreasing
        // before that point, nondecreasing after it.
        let xs: Vec<f64> = (0..=4000).map(|i| -10.0 + i as f64 * 0.005).collect();
        let x_min = -0.751_791_524_693_564_5;
        for w in xs.windows(2) {
            let (a, b) = (gelu_scalar(w[0]), gelu_scalar(w[1]));
            if w[0] >= x_min {
                assert!(b >= a, "increasing branch at {}", w[0]);
            } else if w[1] <= x_min {
                assert!(b <= a, "decreasing branch at {}", w[0]);
            }
        }
        let h = 1e-6;
        assert!(gelu_grad_scalar(x_min).abs() < h);
    }

    #[test]
    fn gelu_derivative_matches_central_difference() {
        for &x in &[-3.0, -0.75, 0.0, 0.3, 2.5] {
            let h = 1e-6;
            let fd = (gelu_scalar(x + h) - gelu_scalar(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad_scalar(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn layer_norm_cases() {
        let ones = v(&[1.0, 1.0, 1.0]);
        let zeros = v(&[0.0, 0.0, 0.0]);
        let out = layer_norm(&v(&[4.0, 4.0, 4.0]), &ones, &zeros, 1e-5).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));

        let out = layer_norm(&v(&[1.0, -1.0]), &v(&[1.0, 1.0]), &v(&[0.0, 0.0]), 0.0).unwrap();
        assert_eq!(out.data(), &[1.0, -1.0]);

        // mean 2, population variance 2/3, (x-2)/sqrt(2/3) = ±1.2247448713915890
        let out = layer_norm(&v(&[1.0, 2.0, 3.0]), &ones, &zeros, 1e-12).unwrap();
        for (a, b) in out.data().iter().zip([-1.224745, 0.0, 1.224745]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_rejects_wrong_gain() {
        assert!(layer_norm(&v(&[1.0, 2.0]), &v(&[1.0]), &v(&[0.0]), 1e-5).is_err());
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax(&v(&[3.0; 4])).data(), &[0.25; 4]);
        assert_eq!(softmax(&v(&[-7.0])).data(), &[1.0]);
        let a = softmax(&v(&[0.1, -2.0, 3.0]));
        let b = softmax(&v(&[100.1, 98.0, 103.0]));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_sums_to_one_for_bounded_inputs() {
        let mut rng = crate::numerics::SeededRng::new(3);
        for _ in 0..200 {
            let row: Vec<f64> = (0..17).map(|_| rng.uniform(-100.0, 100.0)).collect();
            let s = softmax(&v(&row));
            assert!((s.sum() - 1.0).abs() < 1e-12);
            assert!(s.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
