//! Directory-of-PNG light-field storage.
//!
//! A light field named `name` lives in `root/name/`, one 8-bit RGB PNG per
//! view. View `k` sits at grid position `(k / cols, k % cols)`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};

use super::lightfield::{Image, LightField};
use crate::error::{Error, Result};

pub const DEFAULT_PATTERN: &str = "input_Cam{index:03}.png";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    /// File name with an `{index}` or `{index:0N}` placeholder.
    pub pattern: String,
    /// Views per grid side.
    pub grid: usize,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            pattern: DEFAULT_PATTERN.to_string(),
            grid: 9,
        }
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_pattern(mut self, pattern: impl Into<String>) -> Self {
        self.pattern = pattern.into();
        self
    }

    pub fn view_count(&self) -> usize {
        self.grid * self.grid
    }

    pub fn file_name(&self, index: usize) -> Result<String> {
        format_index(&self.pattern, index)
    }

    pub fn view_path(&self, name: &str, index: usize) -> Result<PathBuf> {
        Ok(self.root.join(name).join(self.file_name(index)?))
    }

    /// Names of the light-field subdirectories under `root`, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let entries = fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            if entry.path().is_dir() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        Ok(names)
    }
}

fn format_index(pattern: &str, index: usize) -> Result<String> {
    let start = pattern
        .find("{index")
        .ok_or_else(|| Error::Config(format!("pattern {pattern:?} has no {{index}} placeholder")))?;
    let end = start
        + pattern[start..]
            .find('}')
            .ok_or_else(|| Error::Config(format!("unterminated placeholder in {pattern:?}")))?;
    let spec = &pattern[start + "{index".len()..end];
    let formatted = match spec {
        "" => index.to_string(),
        s if s.starts_with(":0") => {
            let width: usize = s[2..]
                .parse()
                .map_err(|_| Error::Config(format!("bad width in pattern {pattern:?}")))?;
            format!("{index:0width$}")
        }
        _ => return Err(Error::Config(format!("unsupported placeholder in {pattern:?}"))),
    };
    Ok(format!("{}{}{}", &pattern[..start], formatted, &pattern[end + 1..]))
}

/// Loads `root/name/`, scaling 8-bit values to `[0, 1]` by `/ 255`.
pub fn load_light_field(layout: &DatasetLayout, name: &str) -> Result<LightField> {
    let mut views = Vec::with_capacity(layout.view_count());
    let mut size = None;
    for index in 0..layout.view_count() {
        let path = layout.view_path(name, index)?;
        if !path.is_file() {
            return Err(Error::MissingView {
                field: name.to_string(),
                index,
                path,
            });
        }
        let img = image::open(&path)
            .map_err(|source| Error::Image {
                path: path.clone(),
                source,
            })?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        if w != h {
            return Err(Error::BadView {
                field: name.to_string(),
                index,
                reason: format!("view is {w}x{h}, views must be square"),
            });
        }
        match size {
            None => size = Some(w),
            Some(s) if s != w => {
                return Err(Error::BadView {
                    field: name.to_string(),
                    index,
                    reason: format!("view is {w}x{h}, expected {s}x{s}"),
                })
            }
            _ => {}
        }
        let data = img.into_raw().into_iter().map(|b| b as f32 / 255.0).collect();
        views.push(Image::new(h, w, data)?);
    }
    LightField::new(layout.grid, layout.grid, views)
}

/// `round(clamp(v, 0, 1) · 255)` with ties to even.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Writes every view of `lf` as a PNG into `dir`, creating it if needed.
pub fn save_light_field(lf: &LightField, dir: &Path, pattern: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (index, view) in lf.views().iter().enumerate() {
        let path = dir.join(format_index(pattern, index)?);
        let bytes = view.data().iter().map(|&v| quantize(v)).collect();
        let img = RgbImage::from_raw(view.width() as u32, view.height() as u32, bytes)
            .expect("buffer length matches view dims");
        img.save_with_format(&path, ImageFormat::Png)
            .map_err(|source| Error::Image { path, source })?;
    }
    Ok(())
}
