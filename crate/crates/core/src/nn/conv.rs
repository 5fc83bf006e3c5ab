use std::ops::Range;

use rand::Rng;

use super::init::xavier_uniform;
use super::layer::{Cache, Layer, Mode};
use super::params::{Param, ParamId, ParamStore};
use super::real::Real;
use super::tensor::{Shape, SignalTensor};
use crate::error::{Error, Result};

/// Geometry of a 1-D (transposed) convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub transposed: bool,
}

impl ConvSpec {
    /// Stride-1 convolution with `(kernel - 1) / 2` padding.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: (kernel - 1) / 2,
            transposed: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel == 0 || self.stride == 0 {
            return Err(Error::validation(format!(
                "channels, kernel and stride must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Output length for an input of length `len`.
    pub fn output_len(&self, len: usize) -> Result<usize> {
        let out = if self.transposed {
            ((len as isize - 1) * self.stride as isize + self.kernel as isize
                - 2 * self.padding as isize)
                .max(0)
        } else {
            let padded = len + 2 * self.padding;
            if padded < self.kernel {
                0
            } else {
                ((padded - self.kernel) / self.stride + 1) as isize
            }
        };
        if out < 1 || len == 0 {
            return Err(Error::shape(format!(
                "input length {len} gives no output for {self:?}"
            )));
        }
        Ok(out as usize)
    }

    /// Weight dims: `(out, in, k)` for convolution, `(in, out, k)` for the
    /// transposed operator so both share one buffer layout per adjoint pair.
    pub fn weight_dims(&self) -> Vec<usize> {
        if self.transposed {
            vec![self.in_channels, self.out_channels, self.kernel]
        } else {
            vec![self.out_channels, self.in_channels, self.kernel]
        }
    }

    /// Xavier fans: `in * k` and `out * k`, also for the transposed case.
    pub fn fans(&self) -> (usize, usize) {
        (
            self.in_channels * self.kernel,
            self.out_channels * self.kernel,
        )
    }
}

/// Values of `t` in `0..n_t` for which `t * stride + k - pad` lands in `0..n_idx`.
#[inline]
fn tap_range(k: usize, pad: usize, stride: usize, n_idx: usize, n_t: usize) -> Range<usize> {
    let lo = if k >= pad {
        0
    } else {
        (pad - k).div_ceil(stride)
    };
    let hi = if n_idx + pad > k {
        ((n_idx - 1 + pad - k) / stride + 1).min(n_t)
    } else {
        0
    };
    lo..hi.max(lo)
}

fn check_params<T: Real>(spec: &ConvSpec, weight: &Param<T>, bias: &Param<T>) -> Result<()> {
    spec.validate()?;
    if weight.dims != spec.weight_dims() {
        return Err(Error::shape(format!(
            "weight dims {:?} do not match {:?}",
            weight.dims,
            spec.weight_dims()
        )));
    }
    if bias.len() != spec.out_channels {
        return Err(Error::shape(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            spec.out_channels
        )));
    }
    Ok(())
}

fn check_input<T: Real>(x: &SignalTensor<T>, spec: &ConvSpec) -> Result<()> {
    if x.channels() != spec.in_channels {
        return Err(Error::shape(format!(
            "input has {} channels, convolution expects {}",
            x.channels(),
            spec.in_channels
        )));
    }
    Ok(())
}

/// Cross-correlation with zero padding:
/// `y[b, o, t] = bias[o] + sum_{i, k} w[o, i, k] * x[b, i, t*s + k - p]`.
pub fn conv1d<T: Real>(
    x: &SignalTensor<T>,
    weight: &Param<T>,
    bias: &Param<T>,
    spec: &ConvSpec,
) -> Result<SignalTensor<T>> {
    if spec.transposed {
        return Err(Error::validation("conv1d called with a transposed spec"));
    }
    check_params(spec, weight, bias)?;
    check_input(x, spec)?;
    let l_in = x.length();
    let l_out = spec.output_len(l_in)?;
    let (cin, cout, kw, s, p) = (
        spec.in_channels,
        spec.out_channels,
        spec.kernel,
        spec.stride,
        spec.padding,
    );
    let mut y = SignalTensor::zeros(Shape::new(x.batch(), cout, l_out));
    let w = &weight.value;
    for b in 0..x.batch() {
        for o in 0..cout {
            let yo = y.offset(b, o);
            let y_row = &mut y.values[yo..yo + l_out];
            y_row.iter_mut().for_each(|v| *v = bias.value[o]);
            for i in 0..cin {
                let x_row = x.row(b, i);
                for k in 0..kw {
                    let wk = w[(o * cin + i) * kw + k];
                    let r = tap_range(k, p, s, l_in, l_out);
                    if r.is_empty() {
                        continue;
                    }
                    let x0 = r.start * s + k - p;
                    if s == 1 {
                        let xs = &x_row[x0..x0 + r.len()];
                        for (yv, &xv) in y_row[r].iter_mut().zip(xs) {
                            *yv += wk * xv;
                        }
                    } else {
                        for (j, t) in r.enumerate() {
                            y_row[t] += wk * x_row[x0 + j * s];
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Accumulates the gradients of [`conv1d`] into `gx`, `gw`, `gb`.
#[allow(clippy::needless_range_loop)]
pub fn conv1d_backward<T: Real>(
    x: &SignalTensor<T>,
    weight: &[T],
    spec: &ConvSpec,
    gy: &SignalTensor<T>,
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let l_in = x.length();
    let l_out = gy.length();
    let (cin, cout, kw, s, p) = (
        spec.in_channels,
        spec.out_channels,
        spec.kernel,
        spec.stride,
        spec.padding,
    );
    for b in 0..x.batch() {
        for o in 0..cout {
            let g_row = gy.grad_row(b, o);
            gb[o] += g_row.iter().fold(T::zero(), |a, &v| a + v);
            for i in 0..cin {
                let x_row = x.row(b, i);
                let xo = x.offset(b, i);
                for k in 0..kw {
                    let widx = (o * cin + i) * kw + k;
                    let wk = weight[widx];
                    let r = tap_range(k, p, s, l_in, l_out);
                    if r.is_empty() {
                        continue;
                    }
                    let x0 = r.start * s + k - p;
                    let mut acc = T::zero();
                    if s == 1 {
                        let n = r.len();
                        let gs = &g_row[r];
                        for ((&g, &xv), gxv) in gs
                            .iter()
                            .zip(&x_row[x0..x0 + n])
                            .zip(&mut gx[xo + x0..xo + x0 + n])
                        {
                            acc += g * xv;
                            *gxv += wk * g;
                        }
                    } else {
                        for (j, t) in r.enumerate() {
                            let xi = x0 + j * s;
                            acc += g_row[t] * x_row[xi];
                            gx[xo + xi] += wk * g_row[t];
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
}

/// Transposed convolution, the adjoint of [`conv1d`] plus a bias:
/// `y[b, o, t*s + k - p] += w[i, o, k] * x[b, i, t]`.
pub fn conv_transpose1d<T: Real>(
    x: &SignalTensor<T>,
    weight: &Param<T>,
    bias: &Param<T>,
    spec: &ConvSpec,
) -> Result<SignalTensor<T>> {
    if !spec.transposed {
        return Err(Error::validation(
            "conv_transpose1d called with a non-transposed spec",
        ));
    }
    let l_out = spec.output_len(x.length())?;
    conv_transpose1d_with_len(x, weight, bias, spec, l_out)
}

/// [`conv_transpose1d`] with an explicit output length. Lengths beyond the
/// formula act as output padding; with `out_len` equal to the input length
/// of the matching forward convolution this is its exact adjoint.
pub fn conv_transpose1d_with_len<T: Real>(
    x: &SignalTensor<T>,
    weight: &Param<T>,
    bias: &Param<T>,
    spec: &ConvSpec,
    l_out: usize,
) -> Result<SignalTensor<T>> {
    check_params(spec, weight, bias)?;
    check_input(x, spec)?;
    if l_out == 0 {
        return Err(Error::shape(
            "transposed convolution output length must be >= 1",
        ));
    }
    let l_in = x.length();
    let (cin, cout, kw, s, p) = (
        spec.in_channels,
        spec.out_channels,
        spec.kernel,
        spec.stride,
        spec.padding,
    );
    let mut y = SignalTensor::zeros(Shape::new(x.batch(), cout, l_out));
    let w = &weight.value;
    for b in 0..x.batch() {
        for o in 0..cout {
            let yo = y.offset(b, o);
            let y_row = &mut y.values[yo..yo + l_out];
            y_row.iter_mut().for_each(|v| *v = bias.value[o]);
            for i in 0..cin {
                let x_row = x.row(b, i);
                for k in 0..kw {
                    let wk = w[(i * cout + o) * kw + k];
                    for t in tap_range(k, p, s, l_out, l_in) {
                        y_row[t * s + k - p] += wk * x_row[t];
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Accumulates the gradients of [`conv_transpose1d`].
#[allow(clippy::needless_range_loop)]
pub fn conv_transpose1d_backward<T: Real>(
    x: &SignalTensor<T>,
    weight: &[T],
    spec: &ConvSpec,
    gy: &SignalTensor<T>,
    gx: &mut [T],
    gw: &mut [T],
    gb: &mut [T],
) {
    let l_in = x.length();
    let l_out = gy.length();
    let (cin, cout, kw, s, p) = (
        spec.in_channels,
        spec.out_channels,
        spec.kernel,
        spec.stride,
        spec.padding,
    );
    for b in 0..x.batch() {
        for o in 0..cout {
            let g_row = gy.grad_row(b, o);
            gb[o] += g_row.iter().fold(T::zero(), |a, &v| a + v);
            for i in 0..cin {
                let x_row = x.row(b, i);
                let xo = x.offset(b, i);
                for k in 0..kw {
                    let widx = (i * cout + o) * kw + k;
                    let wk = weight[widx];
                    let mut acc = T::zero();
                    for t in tap_range(k, p, s, l_out, l_in) {
                        let g = g_row[t * s + k - p];
                        acc += g * x_row[t];
                        gx[xo + t] += wk * g;
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
}

/// Convolution layer owning a weight and, usually, a bias in the parameter store.
#[derive(Clone, Debug)]
pub struct Conv1d<T> {
    pub spec: ConvSpec,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    cache: Cache<T>,
}

impl<T: Real> Conv1d<T> {
    /// Registers `{name}.weight` (Xavier uniform) and `{name}.bias` (zeros).
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: ConvSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let mut conv = Self::without_bias(store, name, spec, rng)?;
        conv.bias = Some(store.insert(
            format!("{name}.bias"),
            Param::zeros(vec![spec.out_channels]),
        )?);
        Ok(conv)
    }

    /// Weight only; for convolutions feeding a batch norm, whose mean
    /// subtraction would cancel any bias.
    pub fn without_bias<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: ConvSpec,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let dims = spec.weight_dims();
        let (fan_in, fan_out) = spec.fans();
        let n = dims.iter().product();
        let weight = store.insert(
            format!("{name}.weight"),
            Param::new(dims, xavier_uniform(n, fan_in, fan_out, rng)),
        )?;
        Ok(Conv1d {
            spec,
            weight,
            bias: None,
            cache: Cache::default(),
        })
    }

    fn apply(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        let w = params.get(self.weight);
        let zero;
        let b = match self.bias {
            Some(id) => params.get(id),
            None => {
                zero = Param::zeros(vec![self.spec.out_channels]);
                &zero
            }
        };
        if self.spec.transposed {
            conv_transpose1d(x, w, b, &self.spec)
        } else {
            conv1d(x, w, b, &self.spec)
        }
    }
}

impl<T: Real> Layer<T> for Conv1d<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        _mode: Mode,
    ) -> Result<SignalTensor<T>> {
        let y = self.apply(x, params)?;
        self.cache.store(x);
        Ok(y)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let x = self.cache.take()?;
        let mut gx = vec![T::zero(); x.values.len()];
        let weight = params.get(self.weight).value.clone();
        let mut gw = std::mem::take(&mut params.get_mut(self.weight).grad);
        let mut gb = match self.bias {
            Some(id) => std::mem::take(&mut params.get_mut(id).grad),
            None => vec![T::zero(); self.spec.out_channels],
        };
        if self.spec.transposed {
            conv_transpose1d_backward(&x, &weight, &self.spec, out, &mut gx, &mut gw, &mut gb);
        } else {
            conv1d_backward(&x, &weight, &self.spec, out, &mut gx, &mut gw, &mut gb);
        }
        params.get_mut(self.weight).grad = gw;
        if let Some(id) = self.bias {
            params.get_mut(id).grad = gb;
        }
        Ok(x.with_grad(gx))
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        self.apply(x, params)
    }
}
