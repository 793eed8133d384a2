//! Layer primitives with hand-paired backward passes.

mod activation;
mod batchnorm;
mod concat;
mod conv;

pub use activation::{relu, relu_backward};
pub use batchnorm::{
    batchnorm_backward, batchnorm_batch_stats, batchnorm_eval, batchnorm_train, BatchNormCache,
    BatchNormGrads, BatchNormParams, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
pub use concat::{concat_channels, split_channels};
pub use conv::{
    conv2d, conv2d_backward, conv_output_size, conv_transpose2d, conv_transpose2d_backward,
    conv_transpose_output_size, ConvGrads, ConvParams,
};
