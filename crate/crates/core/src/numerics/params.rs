use super::Tensor;

/// A collection of trainable tensors addressed by stable names.
///
/// Both methods must list the same names in the same order. Tensors that
/// are frozen (for example `w_r` of a fixed Fourier encoder) are left out.
pub trait ParamSet {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }
}

impl ParamSet for Tensor {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("value".to_string(), self)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![("value".to_string(), self)]
    }
}
