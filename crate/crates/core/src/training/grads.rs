use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tensor};

/// Named gradient tensors mirroring a parameter set's trainable tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientStore {
    entries: Vec<(String, Tensor)>,
}

impl GradientStore {
    pub fn zeros_like<P: ParamSet + ?Sized>(params: &P) -> Self {
        GradientStore {
            entries: params
                .params()
                .into_iter()
                .map(|(n, t)| (n, Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Adds `scale · g` into the entry `name`, ignoring names that are not
    /// tracked (frozen parameters).
    pub(crate) fn add_named(&mut self, name: &str, g: &Tensor, scale: f64) -> Result<()> {
        match self.get_mut(name) {
            Some(t) => t.axpy(scale, g),
            None => Ok(()),
        }
    }

    pub fn zero(&mut self) {
        for (_, t) in &mut self.entries {
            t.data_mut().fill(0.0);
        }
    }

    /// `self += scale · other`, entry by entry.
    pub fn accumulate(&mut self, other: &GradientStore, scale: f64) -> Result<()> {
        self.check_matches(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            a.axpy(scale, b)?;
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|(_, t)| t.max_abs()).fold(0.0, f64::max)
    }

    fn check_matches(&self, other: &GradientStore) -> Result<()> {
        let same = self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((n, a), (m, b))| n == m && a.shape() == b.shape());
        if same {
            Ok(())
        } else {
            Err(Error::shape("GradientStore", "stores track different parameters"))
        }
    }

    /// Per-tensor `‖a − b‖ / max(‖a‖, ‖b‖, 1e-8)`.
    pub fn relative_errors(&self, other: &GradientStore) -> Result<Vec<(String, f64)>> {
        self.check_matches(other)?;
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|((n, a), (_, b))| {
                let diff = a.sub(b)?.norm();
                Ok((n.clone(), diff / a.norm().max(b.norm()).max(1e-8)))
            })
            .collect()
    }
}

/// Central differences `(L(p+h) − L(p−h)) / 2h` for every trainable scalar.
pub fn finite_diff_grad<P: ParamSet + Clone>(
    loss_fn: impl Fn(&P) -> Result<f64>,
    params: &P,
    step: f64,
) -> Result<GradientStore> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut work = params.clone();
    let mut out = GradientStore::zeros_like(params);
    let eval = |p: &P| -> Result<f64> {
        let l = loss_fn(p)?;
        if l.is_finite() {
            Ok(l)
        } else {
            Err(Error::NonFinite("finite_diff_grad loss"))
        }
    };
    for t in 0..out.entries.len() {
        for e in 0..out.entries[t].1.len() {
            let orig = work.params()[t].1.data()[e];
            set_scalar(&mut work, t, e, orig + step);
            let up = eval(&work)?;
            set_scalar(&mut work, t, e, orig - step);
            let down = eval(&work)?;
            set_scalar(&mut work, t, e, orig);
            out.entries[t].1.data_mut()[e] = (up - down) / (2.0 * step);
        }
    }
    Ok(out)
}

fn set_scalar<P: ParamSet>(p: &mut P, tensor: usize, index: usize, value: f64) {
    p.params_mut()[tensor].1.data_mut()[index] = value;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_exact() {
        let p = Tensor::vector(vec![3.0]).unwrap();
        let g = finite_diff_grad(|p: &Tensor| Ok(p.data()[0] * p.data()[0]), &p, 1e-3).unwrap();
        assert!((g.get("value").unwrap().data()[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn zero_loss_zero_gradient() {
        let p = Tensor::vector(vec![1.0, -2.0, 0.5]).unwrap();
        let g = finite_diff_grad(|_: &Tensor| Ok(0.0), &p, 1e-5).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn non_finite_loss_reported() {
        let p = Tensor::vector(vec![1.0]).unwrap();
        assert!(finite_diff_grad(|_: &Tensor| Ok(f64::NAN), &p, 1e-5).is_err());
        assert!(finite_diff_grad(|_: &Tensor| Ok(1.0), &p, 0.0).is_err());
    }

    #[test]
    fn relative_error_of_identical_stores_is_zero() {
        let p = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let g = GradientStore::zeros_like(&p);
        assert_eq!(g.relative_errors(&g).unwrap()[0].1, 0.0);
    }
}
