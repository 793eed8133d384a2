//! Light-field containers, PNG dataset loading and augmentation.

mod augment;
mod io;
mod lightfield;

pub use augment::{
    adjust_brightness, adjust_saturation, bilinear_resize, crop_resize, flip_horizontal,
    random_crop_resize, sample_augmented, AugmentConfig, AugmentParams, CropWindow,
};
pub use io::{load_light_field, quantize, save_light_field, DatasetLayout, DEFAULT_PATTERN};
pub use lightfield::{
    center_index, center_view, stack_views, stacked_channel, unstack_sample, unstack_views, Image,
    LightField,
};
