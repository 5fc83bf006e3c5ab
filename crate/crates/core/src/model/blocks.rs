//! Building blocks of the encoder-decoder network.
//!
//! Blocks own their layers; parameters live in the shared store. Each block
//! follows the [`Layer`] protocol except [`ExpandingBlock`], which has a
//! second (skip) input and therefore its own forward/backward signatures.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, fit_length, fit_length_backward, resize_linear, resize_linear_backward,
    split_channel_grads, BatchNorm1d, Conv1d, ConvSpec, Layer, LeakyRelu, Mode, ParamStore, Real,
    Shape, SignalTensor,
};

/// Tensor of the given shape carrying only a gradient; conv and activation
/// backward passes read their own cached inputs, so the values are unused.
fn grad_only<T: Real>(shape: Shape, grad: Vec<T>) -> SignalTensor<T> {
    SignalTensor::zeros(shape).with_grad(grad)
}

fn add_into<T: Real>(acc: &mut [T], other: &[T]) {
    for (a, &b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// Channel split for `branches` parallel convolutions over `channels` outputs:
/// `channels / branches` each, remainder given one-by-one to the first branches.
pub fn branch_widths(channels: usize, branches: usize) -> Vec<usize> {
    let base = channels / branches;
    let rem = channels % branches;
    (0..branches).map(|j| base + usize::from(j < rem)).collect()
}

/// Parallel same-padded convolutions concatenated on channels, added to the
/// input and passed through a leaky ReLU.
#[derive(Clone, Debug)]
pub struct InceptionResidual<T> {
    branches: Vec<Conv1d<T>>,
    widths: Vec<usize>,
    act: LeakyRelu<T>,
    channels: usize,
}

impl<T: Real> InceptionResidual<T> {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        kernels: &[usize],
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut branches = Vec::new();
        let mut widths = Vec::new();
        for (j, (&k, w)) in kernels
            .iter()
            .zip(branch_widths(channels, kernels.len()))
            .enumerate()
        {
            if w == 0 {
                continue;
            }
            let spec = ConvSpec::same(channels, w, k);
            branches.push(Conv1d::new(store, &format!("{name}.b{j}"), spec, rng)?);
            widths.push(w);
        }
        Ok(InceptionResidual {
            branches,
            widths,
            act: LeakyRelu::new(T::lit(slope)),
            channels,
        })
    }

    /// Output width of each non-empty branch.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    fn residual_sum(
        &self,
        x: &SignalTensor<T>,
        outs: &[SignalTensor<T>],
    ) -> Result<SignalTensor<T>> {
        if x.channels() != self.channels {
            return Err(Error::shape(format!(
                "inception expects {} channels, got {}",
                self.channels,
                x.channels()
            )));
        }
        let mut z = if outs.is_empty() {
            SignalTensor::zeros(x.shape())
        } else {
            concat_channels(&outs.iter().collect::<Vec<_>>())?
        };
        add_into(&mut z.values, &x.values);
        Ok(z)
    }
}

impl<T: Real> Layer<T> for InceptionResidual<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        let outs = self
            .branches
            .iter_mut()
            .map(|b| b.forward(x, params, mode))
            .collect::<Result<Vec<_>>>()?;
        let z = self.residual_sum(x, &outs)?;
        self.act.forward(&z, params, mode)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let z = self.act.backward(out, params)?;
        let mut gx = z.grad.clone();
        let parts = split_channel_grads(&z, &self.widths);
        for ((branch, &w), g) in self.branches.iter_mut().zip(&self.widths).zip(parts) {
            let shape = Shape::new(z.batch(), w, z.length());
            let xb = branch.backward(&grad_only(shape, g), params)?;
            add_into(&mut gx, &xb.grad);
        }
        Ok(SignalTensor::zeros(z.shape()).with_grad(gx))
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        let outs = self
            .branches
            .iter()
            .map(|b| b.infer(x, params))
            .collect::<Result<Vec<_>>>()?;
        let z = self.residual_sum(x, &outs)?;
        self.act.infer(&z, params)
    }
}

/// Single-channel input to `width` channels: a wide same-padded convolution
/// followed by a pointwise channel mix, with no activation.
#[derive(Clone, Debug)]
pub struct EnsembleBlock<T> {
    entry: Conv1d<T>,
    mix: Conv1d<T>,
}

impl<T: Real> EnsembleBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        width: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(EnsembleBlock {
            entry: Conv1d::new(
                store,
                &format!("{name}.entry"),
                ConvSpec::same(1, width, kernel),
                rng,
            )?,
            mix: Conv1d::new(
                store,
                &format!("{name}.mix"),
                ConvSpec::same(width, width, 1),
                rng,
            )?,
        })
    }
}

impl<T: Real> Layer<T> for EnsembleBlock<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        let h = self.entry.forward(x, params, mode)?;
        self.mix.forward(&h, params, mode)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let h = self.mix.backward(out, params)?;
        self.entry.backward(&h, params)
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        self.mix.infer(&self.entry.infer(x, params)?, params)
    }
}

/// Shared hyperparameters for contracting and expanding blocks.
#[derive(Clone, Debug)]
pub struct BlockSpec<'a> {
    pub kernel_p: usize,
    pub kernel_resample: usize,
    pub stride: usize,
    pub inception_kernels: &'a [usize],
    pub slope: f64,
}

/// Doubles the channels, normalizes, downsamples by the stride and refines
/// with an inception-residual layer.
#[derive(Clone, Debug)]
pub struct ContractingBlock<T> {
    conv: Conv1d<T>,
    pub bn: BatchNorm1d<T>,
    act: LeakyRelu<T>,
    down: Conv1d<T>,
    inception: InceptionResidual<T>,
}

impl<T: Real> ContractingBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        spec: &BlockSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let c = 2 * in_channels;
        let down = ConvSpec {
            in_channels: c,
            out_channels: c,
            kernel: spec.kernel_resample,
            stride: spec.stride,
            padding: (spec.kernel_resample - 1) / 2,
            transposed: false,
        };
        Ok(ContractingBlock {
            conv: Conv1d::without_bias(
                store,
                &format!("{name}.conv"),
                ConvSpec::same(in_channels, c, spec.kernel_p),
                rng,
            )?,
            bn: BatchNorm1d::new(store, &format!("{name}.bn"), c)?,
            act: LeakyRelu::new(T::lit(spec.slope)),
            down: Conv1d::new(store, &format!("{name}.down"), down, rng)?,
            inception: InceptionResidual::new(
                store,
                &format!("{name}.inception"),
                c,
                spec.inception_kernels,
                spec.slope,
                rng,
            )?,
        })
    }
}

impl<T: Real> Layer<T> for ContractingBlock<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        let h = self.conv.forward(x, params, mode)?;
        let h = self.bn.forward(&h, params, mode)?;
        let h = self.act.forward(&h, params, mode)?;
        let h = self.down.forward(&h, params, mode)?;
        self.inception.forward(&h, params, mode)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let g = self.inception.backward(out, params)?;
        let g = self.down.backward(&g, params)?;
        let g = self.act.backward(&g, params)?;
        let g = self.bn.backward(&g, params)?;
        self.conv.backward(&g, params)
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        let h = self.conv.infer(x, params)?;
        let h = self.bn.infer(&h, params)?;
        let h = self.act.infer(&h, params)?;
        let h = self.down.infer(&h, params)?;
        self.inception.infer(&h, params)
    }
}

/// Optionally fuses a skip connection, halves the channels, upsamples by the
/// stride (quartering the channels overall), fits the result to the target
/// length and refines with an inception-residual layer.
#[derive(Clone, Debug)]
pub struct ExpandingBlock<T> {
    skip: Option<Conv1d<T>>,
    conv: Conv1d<T>,
    pub bn: BatchNorm1d<T>,
    act: LeakyRelu<T>,
    up: Conv1d<T>,
    inception: InceptionResidual<T>,
    in_channels: usize,
    target_len: usize,
    // lengths seen by the last forward: (skip projection, upsampled)
    lens: Option<(usize, usize)>,
}

impl<T: Real> ExpandingBlock<T> {
    /// `in_channels` is the width of the decoder input; with a skip of
    /// `skip_channels` the fused width is twice that.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        skip_channels: Option<usize>,
        target_len: usize,
        spec: &BlockSpec,
        rng: &mut R,
    ) -> Result<Self> {
        let skip = match skip_channels {
            Some(sc) => Some(Conv1d::new(
                store,
                &format!("{name}.skip"),
                ConvSpec::same(sc, in_channels, 1),
                rng,
            )?),
            None => None,
        };
        let fused = if skip.is_some() {
            2 * in_channels
        } else {
            in_channels
        };
        if fused % 4 != 0 {
            return Err(Error::config(
                "model.first_channels",
                format!("expanding block width {fused} is not divisible by 4"),
            ));
        }
        let half = fused / 2;
        let up = ConvSpec {
            in_channels: half,
            out_channels: half / 2,
            kernel: spec.kernel_resample,
            stride: spec.stride,
            padding: (spec.kernel_resample - 1) / 2,
            transposed: true,
        };
        Ok(ExpandingBlock {
            skip,
            conv: Conv1d::without_bias(
                store,
                &format!("{name}.conv"),
                ConvSpec::same(fused, half, spec.kernel_p),
                rng,
            )?,
            bn: BatchNorm1d::new(store, &format!("{name}.bn"), half)?,
            act: LeakyRelu::new(T::lit(spec.slope)),
            up: Conv1d::new(store, &format!("{name}.up"), up, rng)?,
            inception: InceptionResidual::new(
                store,
                &format!("{name}.inception"),
                half / 2,
                spec.inception_kernels,
                spec.slope,
                rng,
            )?,
            in_channels,
            target_len,
            lens: None,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.up.spec.out_channels
    }

    pub fn has_skip(&self) -> bool {
        self.skip.is_some()
    }

    fn check(&self, x: &SignalTensor<T>, skip: Option<&SignalTensor<T>>) -> Result<()> {
        if x.channels() != self.in_channels {
            return Err(Error::shape(format!(
                "expanding block expects {} channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        if skip.is_some() != self.skip.is_some() {
            return Err(Error::shape("skip input does not match block construction"));
        }
        Ok(())
    }

    pub fn forward(
        &mut self,
        x: &SignalTensor<T>,
        skip: Option<&SignalTensor<T>>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        self.check(x, skip)?;
        let mut skip_len = 0;
        let fused = match (&mut self.skip, skip) {
            (Some(proj), Some(s)) => {
                let p = proj.forward(s, params, mode)?;
                skip_len = p.length();
                concat_channels(&[x, &fit_length(&p, x.length())?])?
            }
            _ => x.clone(),
        };
        let h = self.conv.forward(&fused, params, mode)?;
        let h = self.bn.forward(&h, params, mode)?;
        let h = self.act.forward(&h, params, mode)?;
        let u = self.up.forward(&h, params, mode)?;
        self.lens = Some((skip_len, u.length()));
        self.inception
            .forward(&fit_length(&u, self.target_len)?, params, mode)
    }

    /// Returns the gradient for the decoder input and, if present, the skip input.
    pub fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<(SignalTensor<T>, Option<SignalTensor<T>>)> {
        let (skip_len, up_len) = self
            .lens
            .take()
            .ok_or_else(|| Error::validation("expanding block backward without forward"))?;
        let g = self.inception.backward(out, params)?;
        let gu = fit_length_backward(&g, up_len);
        let u = grad_only(Shape::new(g.batch(), g.channels(), up_len), gu);
        let g = self.up.backward(&u, params)?;
        let g = self.act.backward(&g, params)?;
        let g = self.bn.backward(&g, params)?;
        let fused = self.conv.backward(&g, params)?;
        let Some(proj) = &mut self.skip else {
            return Ok((fused, None));
        };
        let c = self.in_channels;
        let mut parts = split_channel_grads(&fused, &[c, c]).into_iter();
        let (gx, gp) = (parts.next().unwrap(), parts.next().unwrap());
        let (b, l) = (fused.batch(), fused.length());
        let gp = grad_only(Shape::new(b, c, l), gp);
        let gp = fit_length_backward(&gp, skip_len);
        let gs = proj.backward(&grad_only(Shape::new(b, c, skip_len), gp), params)?;
        Ok((grad_only(Shape::new(b, c, l), gx), Some(gs)))
    }

    pub fn infer(
        &self,
        x: &SignalTensor<T>,
        skip: Option<&SignalTensor<T>>,
        params: &ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        self.check(x, skip)?;
        let fused = match (&self.skip, skip) {
            (Some(proj), Some(s)) => {
                let p = proj.infer(s, params)?;
                concat_channels(&[x, &fit_length(&p, x.length())?])?
            }
            _ => x.clone(),
        };
        let h = self.conv.infer(&fused, params)?;
        let h = self.bn.infer(&h, params)?;
        let h = self.act.infer(&h, params)?;
        let u = self.up.infer(&h, params)?;
        self.inception
            .infer(&fit_length(&u, self.target_len)?, params)
    }
}

/// Linear resize to the output length, then two same-padded convolutions
/// with a leaky ReLU between them, ending at one channel.
#[derive(Clone, Debug)]
pub struct DenoiseBlock<T> {
    conv1: Conv1d<T>,
    act: LeakyRelu<T>,
    conv2: Conv1d<T>,
    out_len: usize,
    in_len: Option<usize>,
}

impl<T: Real> DenoiseBlock<T> {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        out_len: usize,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(DenoiseBlock {
            conv1: Conv1d::new(
                store,
                &format!("{name}.conv1"),
                ConvSpec::same(channels, channels, 3),
                rng,
            )?,
            act: LeakyRelu::new(T::lit(slope)),
            conv2: Conv1d::new(
                store,
                &format!("{name}.conv2"),
                ConvSpec::same(channels, 1, 3),
                rng,
            )?,
            out_len,
            in_len: None,
        })
    }
}

impl<T: Real> Layer<T> for DenoiseBlock<T> {
    fn forward(
        &mut self,
        x: &SignalTensor<T>,
        params: &ParamStore<T>,
        mode: Mode,
    ) -> Result<SignalTensor<T>> {
        self.in_len = Some(x.length());
        let r = resize_linear(x, self.out_len)?;
        let h = self.conv1.forward(&r, params, mode)?;
        let h = self.act.forward(&h, params, mode)?;
        self.conv2.forward(&h, params, mode)
    }

    fn backward(
        &mut self,
        out: &SignalTensor<T>,
        params: &mut ParamStore<T>,
    ) -> Result<SignalTensor<T>> {
        let in_len = self
            .in_len
            .take()
            .ok_or_else(|| Error::validation("denoise backward without forward"))?;
        let g = self.conv2.backward(out, params)?;
        let g = self.act.backward(&g, params)?;
        let r = self.conv1.backward(&g, params)?;
        let gx = resize_linear_backward(&r, in_len);
        Ok(grad_only(Shape::new(r.batch(), r.channels(), in_len), gx))
    }

    fn infer(&self, x: &SignalTensor<T>, params: &ParamStore<T>) -> Result<SignalTensor<T>> {
        let r = resize_linear(x, self.out_len)?;
        let h = self.conv1.infer(&r, params)?;
        let h = self.act.infer(&h, params)?;
        self.conv2.infer(&h, params)
    }
}
