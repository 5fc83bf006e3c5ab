//! R-peak detection from seismocardiogram windows.
//!
//! The pipeline maps an SCG window to the distance transform of its ECG
//! R-peak train with a 1-D convolutional encoder-decoder, reads the peaks
//! back as valleys of the prediction, and scores them (sensitivity, PPV,
//! time-domain HRV, Bland-Altman agreement).
//!
//! * [`signal`] - records, synthesis, windowing, targets
//! * [`nn`] - the small reverse-mode layer kit the network is built from
//! * [`model`] - the network and its checkpoint format
//! * [`train`] - SGD training with a step learning-rate schedule
//! * [`eval`] - valley detection, peak matching, HRV and agreement statistics

pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
