//! Photometric and geometric augmentation of whole light fields.
//!
//! Every transform applies the same parameters to all views so that the
//! angular structure (disparity between views) stays consistent.

use rand::Rng;

use super::lightfield::{Image, LightField};
use crate::error::{Error, Result};

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub brightness_range: (f32, f32),
    pub saturation_range: (f32, f32),
    pub min_crop: usize,
    pub flip_probability: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            brightness_range: (-0.2, 0.2),
            saturation_range: (0.6, 1.6),
            min_crop: 256,
            flip_probability: 0.5,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// A configuration whose samples are the unmodified input.
    pub fn identity(size: usize) -> Self {
        Self {
            brightness_range: (0.0, 0.0),
            saturation_range: (1.0, 1.0),
            min_crop: size,
            flip_probability: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        let (blo, bhi) = self.brightness_range;
        let (slo, shi) = self.saturation_range;
        // Written so that NaN bounds fail as well.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        let disordered = !(blo <= bhi) || !(slo <= shi);
        if disordered {
            return Err(Error::Config(format!(
                "augmentation ranges must satisfy lo <= hi (brightness {blo}..{bhi}, saturation {slo}..{shi})"
            )));
        }
        if blo < -1.0 || bhi > 1.0 || slo < 0.0 {
            return Err(Error::Config(
                "brightness must stay within [-1, 1] and saturation >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(Error::Config(format!(
                "flip probability {} outside [0, 1]",
                self.flip_probability
            )));
        }
        if self.min_crop == 0 || self.min_crop > size {
            return Err(Error::Config(format!(
                "min_crop {} must be in 1..={size}",
                self.min_crop
            )));
        }
        Ok(())
    }
}

/// Square crop window, shared by every view.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropWindow {
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

/// One draw of augmentation parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub brightness: f32,
    pub saturation: f32,
    pub crop: CropWindow,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f32, f32)) -> f32 {
    if lo < hi {
        rng.gen_range(lo as f64..hi as f64) as f32
    } else {
        lo
    }
}

impl CropWindow {
    /// Side uniform in `[min_crop, size]`, then a uniform position.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, size: usize, min_crop: usize) -> Self {
        let side = rng.gen_range(min_crop..=size);
        let top = rng.gen_range(0..=size - side);
        let left = rng.gen_range(0..=size - side);
        Self {
            top,
            left,
            size: side,
        }
    }
}

impl AugmentParams {
    /// Draws flip, brightness, saturation and crop, in that order.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, cfg: &AugmentConfig, size: usize) -> Self {
        let flip = cfg.flip_probability > 0.0 && rng.gen_bool(cfg.flip_probability);
        let brightness = uniform(rng, cfg.brightness_range);
        let saturation = uniform(rng, cfg.saturation_range);
        let crop = CropWindow::draw(rng, size, cfg.min_crop);
        Self {
            flip,
            brightness,
            saturation,
            crop,
        }
    }

    /// Applies flip → brightness → saturation → crop-resize.
    pub fn apply(&self, lf: &LightField) -> LightField {
        let flipped;
        let base = if self.flip {
            flipped = flip_horizontal(lf);
            &flipped
        } else {
            lf
        };
        let lit = adjust_brightness(base, self.brightness);
        let saturated = adjust_saturation(&lit, self.saturation);
        crop_resize(&saturated, self.crop)
    }
}

/// Mirrors every view left-right and reverses the grid column order.
pub fn flip_horizontal(lf: &LightField) -> LightField {
    let (rows, cols) = (lf.rows(), lf.cols());
    let mut views = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in (0..cols).rev() {
            views.push(lf.view(r, c).mirrored());
        }
    }
    LightField::new(rows, cols, views).expect("flip preserves geometry")
}

/// `clamp(x + delta, 0, 1)` on every value.
pub fn adjust_brightness(lf: &LightField, delta: f32) -> LightField {
    lf.map_views(|v| {
        let mut out = v.clone();
        for x in out.data_mut() {
            *x = (*x + delta).clamp(0.0, 1.0);
        }
        out
    })
}

/// Blends each pixel with its Rec.601 gray: `clamp(factor·x + (1 − factor)·gray, 0, 1)`.
pub fn adjust_saturation(lf: &LightField, factor: f32) -> LightField {
    lf.map_views(|v| {
        let mut out = v.clone();
        for px in out.pixels_mut() {
            let gray = LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2];
            for x in px.iter_mut() {
                *x = (factor * *x + (1.0 - factor) * gray).clamp(0.0, 1.0);
            }
        }
        out
    })
}

/// Crops `window` from every view and resizes it back to the original size.
pub fn crop_resize(lf: &LightField, window: CropWindow) -> LightField {
    let size = lf.size();
    lf.map_views(|v| {
        let cropped = v.crop(window.top, window.left, window.size);
        bilinear_resize(&cropped, size, size)
    })
}

pub fn random_crop_resize<R: Rng + ?Sized>(lf: &LightField, rng: &mut R, min_crop: usize) -> LightField {
    let window = CropWindow::draw(rng, lf.size(), min_crop.min(lf.size()));
    crop_resize(lf, window)
}

/// Draws parameters from `rng` and applies them; see [`AugmentParams`].
pub fn sample_augmented<R: Rng + ?Sized>(
    lf: &LightField,
    rng: &mut R,
    cfg: &AugmentConfig,
) -> LightField {
    AugmentParams::draw(rng, cfg, lf.size()).apply(lf)
}

/// Corner-aligned bilinear interpolation: output pixel `i` samples source
/// coordinate `i·(in − 1)/(out − 1)`.
pub fn bilinear_resize(image: &Image, out_h: usize, out_w: usize) -> Image {
    assert!(out_h > 0 && out_w > 0, "resize target must be non-empty");
    let (in_h, in_w) = (image.height(), image.width());
    if (in_h, in_w) == (out_h, out_w) {
        return image.clone();
    }
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        (0..n_out)
            .map(|i| {
                let src = if n_out > 1 {
                    (i * (n_in - 1)) as f64 / (n_out - 1) as f64
                } else {
                    0.0
                };
                let lo = (src.floor() as usize).min(n_in - 1);
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, (src - lo as f64) as f32)
            })
            .collect()
    };
    let ys = taps(in_h, out_h);
    let xs = taps(in_w, out_w);
    let lerp = |a: f32, b: f32, t: f32| a + (b - a) * t;
    Image::from_fn(out_h, out_w, |y, x, c| {
        let (y0, y1, ty) = ys[y];
        let (x0, x1, tx) = xs[x];
        let top = lerp(image.get(y0, x0, c), image.get(y0, x1, c), tx);
        let bottom = lerp(image.get(y1, x0, c), image.get(y1, x1, c), tx);
        lerp(top, bottom, ty)
    })
}
