//! Channel concatenation, length fitting and linear resizing.

use super::real::Real;
use super::tensor::{Shape, SignalTensor};
use crate::error::{Error, Result};

/// Stacks tensors along the channel axis.
pub fn concat_channels<T: Real>(parts: &[&SignalTensor<T>]) -> Result<SignalTensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concatenation of zero tensors"))?;
    let (batch, length) = (first.batch(), first.length());
    for p in parts {
        if p.batch() != batch || p.length() != length {
            return Err(Error::shape(format!(
                "cannot concatenate {} with {}",
                first.shape(),
                p.shape()
            )));
        }
    }
    let channels: usize = parts.iter().map(|p| p.channels()).sum();
    let mut out = SignalTensor::zeros(Shape::new(batch, channels, length));
    for b in 0..batch {
        let mut c0 = 0;
        for p in parts {
            for c in 0..p.channels() {
                out.row_mut(b, c0 + c).copy_from_slice(p.row(b, c));
            }
            c0 += p.channels();
        }
    }
    Ok(out)
}

/// Routes the gradient of a concatenation back to pieces with the given
/// channel counts.
pub fn split_channel_grads<T: Real>(out: &SignalTensor<T>, channels: &[usize]) -> Vec<Vec<T>> {
    let (batch, length) = (out.batch(), out.length());
    let mut grads: Vec<Vec<T>> = channels
        .iter()
        .map(|&c| vec![T::zero(); batch * c * length])
        .collect();
    for b in 0..batch {
        let mut c0 = 0;
        for (g, &c_n) in grads.iter_mut().zip(channels) {
            for c in 0..c_n {
                let dst = (b * c_n + c) * length;
                g[dst..dst + length].copy_from_slice(out.grad_row(b, c0 + c));
            }
            c0 += c_n;
        }
    }
    grads
}

/// Where a fitted row comes from: `src` offset and number of copied samples,
/// written at `dst` offset.
fn fit_plan(len: usize, target: usize) -> (usize, usize, usize) {
    if len >= target {
        ((len - target) / 2, 0, target)
    } else {
        (0, 0, len)
    }
}

/// Center-crops or right-zero-pads every row to `target` samples.
pub fn fit_length<T: Real>(x: &SignalTensor<T>, target: usize) -> Result<SignalTensor<T>> {
    if target == 0 {
        return Err(Error::shape("target length must be >= 1"));
    }
    let (src, dst, n) = fit_plan(x.length(), target);
    let mut out = SignalTensor::zeros(Shape::new(x.batch(), x.channels(), target));
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            out.row_mut(b, c)[dst..dst + n].copy_from_slice(&x.row(b, c)[src..src + n]);
        }
    }
    Ok(out)
}

/// Gradient of [`fit_length`] with respect to an input of length `len`.
pub fn fit_length_backward<T: Real>(out: &SignalTensor<T>, len: usize) -> Vec<T> {
    let (src, dst, n) = fit_plan(len, out.length());
    let mut gx = vec![T::zero(); out.batch() * out.channels() * len];
    for b in 0..out.batch() {
        for c in 0..out.channels() {
            let o = (b * out.channels() + c) * len;
            gx[o + src..o + src + n].copy_from_slice(&out.grad_row(b, c)[dst..dst + n]);
        }
    }
    gx
}

/// Interpolation taps: output `i` = `(1 - frac) * x[lo] + frac * x[hi]`.
fn resize_taps(len: usize, target: usize) -> Vec<(usize, usize, f64)> {
    let step = len as f64 / target as f64;
    let last = len - 1;
    (0..target)
        .map(|i| {
            let pos = (i as f64 * step).min(last as f64);
            let lo = pos.floor() as usize;
            (lo, (lo + 1).min(last), pos - lo as f64)
        })
        .collect()
}

/// Linear-interpolation resize of every row to `target` samples; identity
/// when the length already matches.
pub fn resize_linear<T: Real>(x: &SignalTensor<T>, target: usize) -> Result<SignalTensor<T>> {
    if target == 0 {
        return Err(Error::shape("target length must be >= 1"));
    }
    if target == x.length() {
        let mut out = x.clone();
        out.zero_grad();
        return Ok(out);
    }
    let taps = resize_taps(x.length(), target);
    let mut out = SignalTensor::zeros(Shape::new(x.batch(), x.channels(), target));
    for b in 0..x.batch() {
        for c in 0..x.channels() {
            let row = x.row(b, c);
            let o = out.offset(b, c);
            for (i, &(lo, hi, frac)) in taps.iter().enumerate() {
                let f = T::lit(frac);
                out.values[o + i] = row[lo] * (T::one() - f) + row[hi] * f;
            }
        }
    }
    Ok(out)
}

/// Gradient of [`resize_linear`] with respect to an input of length `len`.
pub fn resize_linear_backward<T: Real>(out: &SignalTensor<T>, len: usize) -> Vec<T> {
    if out.length() == len {
        return out.grad.clone();
    }
    let taps = resize_taps(len, out.length());
    let mut gx = vec![T::zero(); out.batch() * out.channels() * len];
    for b in 0..out.batch() {
        for c in 0..out.channels() {
            let o = (b * out.channels() + c) * len;
            for (i, &(lo, hi, frac)) in taps.iter().enumerate() {
                let g = out.grad_row(b, c)[i];
                let f = T::lit(frac);
                gx[o + lo] += g * (T::one() - f);
                gx[o + hi] += g * f;
            }
        }
    }
    gx
}
