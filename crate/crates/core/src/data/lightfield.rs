use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// An RGB image stored row-major with interleaved channels
/// (`data[(y * width + x) * 3 + c]`). Values are nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::shape("Image::new", &[height, width, 3], &[data.len()]));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn pixels_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.data.chunks_exact_mut(3)
    }

    /// One colour channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f32> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    pub fn mirrored(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                let i = (y * self.width + x) * 3;
                data.extend_from_slice(&self.data[i..i + 3]);
            }
        }
        Self {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Square window of side `size` with its top-left corner at `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, size: usize) -> Self {
        assert!(top + size <= self.height && left + size <= self.width);
        let mut data = Vec::with_capacity(size * size * 3);
        for y in top..top + size {
            let start = (y * self.width + left) * 3;
            data.extend_from_slice(&self.data[start..start + size * 3]);
        }
        Self {
            height: size,
            width: size,
            data,
        }
    }
}

/// A `rows × cols` grid of square RGB views, stored row-major.
///
/// Grid row/column correspond to the vertical/horizontal viewpoint axes and
/// pixel row/column to the image axes.
#[derive(Clone, Debug, PartialEq)]
pub struct LightField {
    rows: usize,
    cols: usize,
    views: Vec<Image>,
}

impl LightField {
    pub fn new(rows: usize, cols: usize, views: Vec<Image>) -> Result<Self> {
        if rows == 0 || cols == 0 || views.len() != rows * cols {
            return Err(Error::shape("LightField::new", &[rows, cols], &[views.len()]));
        }
        let (h, w) = (views[0].height, views[0].width);
        if h != w {
            return Err(Error::Config(format!("views must be square, got {h}x{w}")));
        }
        if let Some(bad) = views.iter().find(|v| v.height != h || v.width != w) {
            return Err(Error::shape(
                "LightField::new",
                &[h, w],
                &[bad.height, bad.width],
            ));
        }
        Ok(Self { rows, cols, views })
    }

    /// Every view filled with the same colour.
    pub fn constant(rows: usize, cols: usize, size: usize, rgb: [f32; 3]) -> Self {
        let view = Image::filled(size, size, rgb);
        Self {
            rows,
            cols,
            views: vec![view; rows * cols],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        size: usize,
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> f32,
    ) -> Self {
        let mut views = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                views.push(Image::from_fn(size, size, |y, x, ch| f(r, c, y, x, ch)));
            }
        }
        Self { rows, cols, views }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Side length of every (square) view.
    pub fn size(&self) -> usize {
        self.views[0].height
    }

    pub fn view(&self, row: usize, col: usize) -> &Image {
        &self.views[row * self.cols + col]
    }

    pub fn views(&self) -> &[Image] {
        &self.views
    }

    pub fn views_mut(&mut self) -> &mut [Image] {
        &mut self.views
    }

    pub fn map_views(&self, f: impl Fn(&Image) -> Image) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            views: self.views.iter().map(f).collect(),
        }
    }

    pub fn channel_count(&self) -> usize {
        self.rows * self.cols * 3
    }

    /// Flat iterator over every pixel value of every view.
    pub fn values(&self) -> impl Iterator<Item = f32> + '_ {
        self.views.iter().flat_map(|v| v.data.iter().copied())
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.views {
            for x in &mut v.data {
                *x = x.clamp(0.0, 1.0);
            }
        }
        self
    }
}

/// Channel of view `(row, col)`, colour `rgb` in the stacked tensor.
pub fn stacked_channel(cols: usize, row: usize, col: usize, rgb: usize) -> usize {
    (row * cols + col) * 3 + rgb
}

/// Stacks every view along the channel axis: `Tensor[1, rows·cols·3, H, W]`.
pub fn stack_views<T: Scalar>(lf: &LightField) -> Tensor<T> {
    let size = lf.size();
    let plane = size * size;
    let mut t = Tensor::zeros([1, lf.channel_count(), size, size]);
    let data = t.data_mut();
    for (k, view) in lf.views.iter().enumerate() {
        for (p, px) in view.data.chunks_exact(3).enumerate() {
            for (rgb, &v) in px.iter().enumerate() {
                data[(k * 3 + rgb) * plane + p] = T::from_f64_lossy(v as f64);
            }
        }
    }
    t
}

/// Inverse of [`stack_views`] for sample `batch` of a stacked tensor.
pub fn unstack_sample<T: Scalar>(t: &Tensor<T>, batch: usize) -> Result<LightField> {
    let d = t.dims();
    let grid = grid_side(d.channels).ok_or_else(|| {
        Error::shape("unstack_views", &d.as_array(), &[3, 0])
    })?;
    if d.height != d.width || batch >= d.batch {
        return Err(Error::shape("unstack_views", &d.as_array(), &[batch]));
    }
    let plane = d.plane();
    let sample = t.sample(batch);
    let views = (0..grid * grid)
        .map(|k| {
            let mut data = Vec::with_capacity(plane * 3);
            for p in 0..plane {
                for rgb in 0..3 {
                    data.push(sample[(k * 3 + rgb) * plane + p].to_f64_lossy() as f32);
                }
            }
            Image {
                height: d.height,
                width: d.width,
                data,
            }
        })
        .collect();
    Ok(LightField {
        rows: grid,
        cols: grid,
        views,
    })
}

pub fn unstack_views<T: Scalar>(t: &Tensor<T>) -> Result<LightField> {
    if t.dims().batch != 1 {
        return Err(Error::shape("unstack_views", &t.shape(), &[1]));
    }
    unstack_sample(t, 0)
}

/// `n` such that `channels == 3·n²`.
fn grid_side(channels: usize) -> Option<usize> {
    if channels == 0 || !channels.is_multiple_of(3) {
        return None;
    }
    let views = channels / 3;
    let n = (views as f64).sqrt().round() as usize;
    (n * n == views).then_some(n)
}

/// Grid position of the center view; requires odd grid dimensions.
pub fn center_index(rows: usize, cols: usize) -> Result<(usize, usize)> {
    if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
        return Err(Error::UnsupportedGrid {
            rows,
            cols,
            reason: "center view needs odd grid dimensions",
        });
    }
    Ok((rows / 2, cols / 2))
}

pub fn center_view(lf: &LightField) -> Result<&Image> {
    let (r, c) = center_index(lf.rows, lf.cols)?;
    Ok(lf.view(r, c))
}
