use std::fmt::{Debug, Display};

use num_traits::{Float, NumAssign};

/// Scalar type the engine computes in. Training runs in `f32`; gradient
/// checks run in `f64`.
pub trait Real: Float + NumAssign + Default + Debug + Display + Send + Sync + 'static {
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
