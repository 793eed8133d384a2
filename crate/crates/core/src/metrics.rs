//! MSE, PSNR and SSIM over light fields, plus tabular quality reports.
//!
//! SSIM follows the usual conventions: an 11×11 Gaussian window with
//! σ = 1.5 evaluated at every fully-contained position (no padding),
//! `C1 = (0.01·L)²`, `C2 = (0.03·L)²` with dynamic range `L = 1`. Each colour
//! channel is scored separately and the channel scores are averaged; a light
//! field's SSIM is the mean over all of its views.

use std::fmt::Write as _;

use crate::data::{Image, LightField};
use crate::error::{Error, Result};
use crate::model::{Mode, Model};
use crate::tensor::Scalar;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

fn check_same(op: &'static str, a: &LightField, b: &LightField) -> Result<()> {
    let da = [a.rows(), a.cols(), a.size()];
    let db = [b.rows(), b.cols(), b.size()];
    if da != db {
        return Err(Error::shape(op, &da, &db));
    }
    Ok(())
}

/// Mean squared difference over every view, pixel and channel.
pub fn mse(a: &LightField, b: &LightField) -> Result<f64> {
    check_same("mse", a, b)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (x, y) in a.values().zip(b.values()) {
        let d = x as f64 - y as f64;
        sum += d * d;
        n += 1;
    }
    Ok(sum / n as f64)
}

/// `10·log10(peak² / mse)` in dB; `+∞` when `mse == 0`.
pub fn psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (peak * peak / mse).log10()
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Separable valid-mode filtering of a row-major plane.
fn filter_valid(plane: &[f64], height: usize, width: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; height * ow];
    for y in 0..height {
        let line = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = line[x..x + SSIM_WINDOW].iter().zip(w).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| rows[(y + k) * ow + x] * w[k]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], height: usize, width: usize) -> f64 {
    let w = gaussian_window();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let mu_a = filter_valid(a, height, width, &w);
    let mu_b = filter_valid(b, height, width, &w);
    let e_aa = filter_valid(&prod(a, a), height, width, &w);
    let e_bb = filter_valid(&prod(b, b), height, width, &w);
    let e_ab = filter_valid(&prod(a, b), height, width, &w);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + C1) * (2.0 * cov + C2);
        let den = (ma * ma + mb * mb + C1) * (var_a + var_b + C2);
        total += num / den;
    }
    total / n as f64
}

/// SSIM of two RGB images, averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if (a.height(), a.width()) != (b.height(), b.width()) {
        return Err(Error::shape("ssim", &[a.height(), a.width()], &[b.height(), b.width()]));
    }
    if a.height() < SSIM_WINDOW || a.width() < SSIM_WINDOW {
        return Err(Error::WindowTooLarge {
            height: a.height(),
            width: a.width(),
            window: SSIM_WINDOW,
        });
    }
    let to_f64 = |v: Vec<f32>| -> Vec<f64> { v.into_iter().map(f64::from).collect() };
    let score = (0..3)
        .map(|c| {
            ssim_plane(
                &to_f64(a.channel(c)),
                &to_f64(b.channel(c)),
                a.height(),
                a.width(),
            )
        })
        .sum::<f64>();
    Ok(score / 3.0)
}

/// Mean SSIM over all views.
pub fn ssim_light_field(a: &LightField, b: &LightField) -> Result<f64> {
    check_same("ssim", a, b)?;
    let mut total = 0.0;
    for (x, y) in a.views().iter().zip(b.views()) {
        total += ssim(x, y)?;
    }
    Ok(total / a.views().len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityRow {
    pub name: String,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl QualityRow {
    pub fn measure(name: impl Into<String>, original: &LightField, reconstructed: &LightField) -> Result<Self> {
        let mse = mse(original, reconstructed)?;
        Ok(Self {
            name: name.into(),
            mse,
            psnr_db: psnr(mse, 1.0),
            ssim: ssim_light_field(original, reconstructed)?,
        })
    }
}

/// Per-sample rows plus a `Mean` row of column means.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub rows: Vec<QualityRow>,
    pub mean: QualityRow,
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.5}")
    }
}

impl QualityReport {
    pub fn from_rows(rows: Vec<QualityRow>) -> Self {
        let n = rows.len().max(1) as f64;
        let mean_of = |f: fn(&QualityRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let mean = QualityRow {
            name: "Mean".to_string(),
            mse: mean_of(|r| r.mse),
            psnr_db: mean_of(|r| r.psnr_db),
            ssim: mean_of(|r| r.ssim),
        };
        Self { rows, mean }
    }

    fn all_rows(&self) -> impl Iterator<Item = &QualityRow> {
        self.rows.iter().chain(std::iter::once(&self.mean))
    }

    /// `sample,mse,psnr_db,ssim` with full precision; infinite PSNR as `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample,mse,psnr_db,ssim\n");
        for r in self.all_rows() {
            let psnr = if r.psnr_db.is_infinite() {
                "inf".to_string()
            } else {
                r.psnr_db.to_string()
            };
            let _ = writeln!(out, "{},{},{},{}", r.name, r.mse, psnr, r.ssim);
        }
        out
    }

    /// Aligned text table with `Sample | MSE | PSNR | SSIM` columns.
    pub fn to_table(&self) -> String {
        let width = self
            .all_rows()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(0)
            .max("Sample".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$} | {:>10} | {:>9} | {:>9}", "Sample", "MSE", "PSNR", "SSIM");
        let _ = writeln!(out, "{}", "-".repeat(width + 39));
        for r in self.all_rows() {
            let _ = writeln!(
                out,
                "{:<width$} | {:>10.7} | {:>9} | {:>9.7}",
                r.name,
                r.mse,
                format_db(r.psnr_db),
                r.ssim
            );
        }
        out
    }
}

/// Reconstructs each field with `model` (which must be in eval mode) and
/// scores it against the original.
pub fn evaluate<T: Scalar>(model: &Model<T>, fields: &[(String, LightField)]) -> Result<QualityReport> {
    if model.mode() != Mode::Eval {
        return Err(Error::Config("evaluation requires an eval-mode model".into()));
    }
    let rows = fields
        .iter()
        .map(|(name, lf)| QualityRow::measure(name.clone(), lf, &model.forward(lf)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(QualityReport::from_rows(rows))
}
