//! Light-field compression with a two-lane convolutional autoencoder.
//!
//! A 9×9 grid of RGB views is stacked into one 243-channel image. The encoder
//! lane reduces it to a `2048×16×16` latent tensor while the center view is
//! carried alongside unchanged; the decoder lane upsamples the latent code,
//! appends the center view and merges everything back into 243 channels.

pub mod codec;
pub mod data;
mod error;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{build_model, compression_ratio, EncodedLightField, Mode, Model, ModelConfig};
pub use tensor::{Dims, Scalar, Tensor};
