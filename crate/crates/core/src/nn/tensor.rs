use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub length: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, length: usize) -> Self {
        Shape {
            batch,
            channels,
            length,
        }
    }

    pub const fn numel(&self) -> usize {
        self.batch * self.channels * self.length
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.batch, self.channels, self.length)
    }
}

/// A `(batch, channels, length)` buffer with a gradient buffer of the same shape.
///
/// Channel count 0 is allowed so that concatenation has an identity; batch
/// and length must be at least 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTensor<T> {
    shape: Shape,
    pub values: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> SignalTensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        let n = shape.numel();
        SignalTensor {
            shape,
            values: vec![T::zero(); n],
            grad: vec![T::zero(); n],
        }
    }

    pub fn from_vec(shape: Shape, values: Vec<T>) -> Result<Self> {
        if shape.batch == 0 || shape.length == 0 {
            return Err(Error::shape(format!(
                "batch and length must be >= 1, got {shape}"
            )));
        }
        if values.len() != shape.numel() {
            return Err(Error::shape(format!(
                "{} values do not fill shape {shape}",
                values.len()
            )));
        }
        let grad = vec![T::zero(); values.len()];
        Ok(SignalTensor {
            shape,
            values,
            grad,
        })
    }

    /// Stacks equal-length rows into a `(rows, 1, length)` tensor.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let length = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != length) {
            return Err(Error::shape("rows must share a length"));
        }
        let values = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| T::lit(v)))
            .collect();
        Self::from_vec(Shape::new(rows.len(), 1, length), values)
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.shape.batch
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.shape.length
    }

    #[inline]
    pub fn offset(&self, b: usize, c: usize) -> usize {
        (b * self.shape.channels + c) * self.shape.length
    }

    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let o = self.offset(b, c);
        &self.values[o..o + self.shape.length]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let o = self.offset(b, c);
        let l = self.shape.length;
        &mut self.values[o..o + l]
    }

    pub fn grad_row(&self, b: usize, c: usize) -> &[T] {
        let o = self.offset(b, c);
        &self.grad[o..o + self.shape.length]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Replaces the gradient buffer; the length must match.
    pub fn with_grad(mut self, grad: Vec<T>) -> Self {
        debug_assert_eq!(grad.len(), self.values.len());
        self.grad = grad;
        self
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        SignalTensor {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
            grad: vec![T::zero(); self.values.len()],
        }
    }

    pub fn cast<U: Real>(&self) -> SignalTensor<U> {
        SignalTensor {
            shape: self.shape,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            grad: self.grad.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.as_f64()).collect()
    }
}
