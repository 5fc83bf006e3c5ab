use super::params::ParamStore;
use super::real::Real;
use super::tensor::SignalTensor;
use crate::error::Result;

/// Batch-norm behavior switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Running statistics, nothing mutated.
    Inference,
}

/// A differentiable stage with a single input.
///
/// `forward` keeps whatever the backward pass needs. `backward` takes the
/// forward output with `grad` holding dL/dy, accumulates parameter
/// gradients into the store, and returns the forward input with `grad`
/// holding dL/dx.
pub trait Layer<T: Real> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>>;

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>>;

    /// Inference-mode forward without caching.
    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>>;
}

/// Input kept by a layer between forward and backward.
#[derive(Clone, Debug)]
pub(crate) struct Cache<T>(Option<SignalTensor<T>>);

impl<T: Real> Default for Cache<T> {
    fn default() -> Self {
        Cache(None)
    }
}

impl<T: Real> Cache<T> {
    pub(crate) fn store(&mut self, x: &SignalTensor<T>) {
        let mut kept = x.clone();
        kept.zero_grad();
        self.0 = Some(kept);
    }

    pub(crate) fn take(&mut self) -> Result<SignalTensor<T>> {
        self.0
            .take()
            .ok_or_else(|| crate::Error::validation("backward called without a preceding forward"))
    }
}
