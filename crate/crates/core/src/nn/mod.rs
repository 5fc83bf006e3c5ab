//! A small reverse-mode layer kit for 1-D convolutional networks.
//!
//! There is no general tape: each layer caches its input on `forward` and
//! turns an output gradient into an input gradient on `backward`,
//! accumulating parameter gradients into a [`ParamStore`].

mod activation;
mod batchnorm;
mod conv;
pub mod gradcheck;
mod init;
mod layer;
mod loss;
mod optim;
mod params;
mod real;
mod shape_ops;
mod tensor;

pub use activation::{leaky_relu, leaky_relu_grad, LeakyRelu, DEFAULT_LEAKY_SLOPE};
pub use batchnorm::{batchnorm1d, BatchNorm1d, BatchNormStats, DEFAULT_EPS, DEFAULT_MOMENTUM};
pub use conv::{
    conv1d, conv1d_backward, conv_transpose1d, conv_transpose1d_backward,
    conv_transpose1d_with_len, Conv1d, ConvSpec,
};
pub use gradcheck::{check_layer, grad_check, GradCheckReport};
pub use init::{xavier_bound, xavier_uniform, xavier_uniform_init};
pub use layer::{Layer, Mode};
pub use loss::{smooth_l1, smooth_l1_grad, smooth_l1_loss, Reduction};
pub use optim::{lr_schedule, sgd_step};
pub use params::{Param, ParamId, ParamStore};
pub use real::Real;
pub use shape_ops::{
    concat_channels, fit_length, fit_length_backward, resize_linear, resize_linear_backward,
    split_channel_grads,
};
pub use tensor::{Shape, SignalTensor};
