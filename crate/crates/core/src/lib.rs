//! Spiking neural network training engine for hyperspectral image
//! classification: LIF dynamics, arcsine surrogate gradients, spiking mixed
//! convolutions and width-mixed residual blocks, trained by backpropagation
//! through time.

pub mod bptt;
pub mod data;
pub mod error;
pub mod layers;
pub mod network;
pub mod neuron;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
