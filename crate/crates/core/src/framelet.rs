//! One-level 2-D piecewise-linear B-spline framelet with periodic boundaries.
//!
//! The 1-D filters are
//!
//! ```text
//! h0 = (1, 2, 1) / 4
//! h1 = (sqrt(2) / 4) (1, 0, -1)
//! h2 = (-1, 2, -1) / 4
//! ```
//!
//! and the nine 2-D bands are the tensor products `h_a (columns) x h_b (rows)`,
//! band index `3 * a + b`. Band 0 is the lowpass band. The system is a tight
//! frame: `reconstruct(decompose(u)) == u`.

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const BAND_COUNT: usize = 9;

const SQRT2_4: f64 = std::f64::consts::SQRT_2 / 4.0;
const FILTERS: [[f64; 3]; 3] = [
    [0.25, 0.5, 0.25],
    [SQRT2_4, 0.0, -SQRT2_4],
    [-0.25, 0.5, -0.25],
];

/// Whether soft shrinkage touches the lowpass band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LowpassPolicy {
    /// Threshold detail bands only.
    #[default]
    Exempt,
    /// Threshold every band, lowpass included.
    Shrink,
}

/// Stack of framelet bands for one image. Also used for the Bregman variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameletCoeffs {
    width: usize,
    height: usize,
    bands: Vec<Vec<f64>>,
}

impl FrameletCoeffs {
    pub fn zeros(width: usize, height: usize) -> Self {
        FrameletCoeffs {
            width,
            height,
            bands: vec![vec![0.0; width * height]; BAND_COUNT],
        }
    }

    pub fn from_bands(width: usize, height: usize, bands: Vec<Vec<f64>>) -> Result<Self> {
        if bands.len() != BAND_COUNT {
            return Err(Error::invalid(
                "bands",
                format!("expected {BAND_COUNT} bands, got {}", bands.len()),
            ));
        }
        if let Some(bad) = bands.iter().find(|b| b.len() != width * height) {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: format!("band has {} samples", bad.len()),
            });
        }
        Ok(FrameletCoeffs {
            width,
            height,
            bands,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub fn bands(&self) -> &[Vec<f64>] {
        &self.bands
    }

    pub fn band(&self, index: usize) -> &[f64] {
        &self.bands[index]
    }

    pub fn energy(&self) -> f64 {
        self.bands.iter().flatten().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &FrameletCoeffs) -> f64 {
        self.bands
            .iter()
            .flatten()
            .zip(other.bands.iter().flatten())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &FrameletCoeffs) -> FrameletCoeffs {
        self.zip_with(other, |a, b| a + b)
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &FrameletCoeffs) -> FrameletCoeffs {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> FrameletCoeffs {
        FrameletCoeffs {
            width: self.width,
            height: self.height,
            bands: self
                .bands
                .iter()
                .map(|b| b.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &FrameletCoeffs) -> f64 {
        self.bands
            .iter()
            .flatten()
            .zip(other.bands.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &FrameletCoeffs, f: impl Fn(f64, f64) -> f64) -> FrameletCoeffs {
        debug_assert_eq!(self.dims(), other.dims());
        FrameletCoeffs {
            width: self.width,
            height: self.height,
            bands: self
                .bands
                .iter()
                .zip(&other.bands)
                .map(|(x, y)| x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect())
                .collect(),
        }
    }
}

/// Periodic correlation along rows: `out[y][x] = sum_k h[k] u[y][x + k - 1]`.
fn filter_rows(src: &[f64], width: usize, h: &[f64; 3], out: &mut [f64]) {
    for (row_in, row_out) in src.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        for x in 0..width {
            let left = row_in[(x + width - 1) % width];
            let right = row_in[(x + 1) % width];
            row_out[x] = h[0] * left + h[1] * row_in[x] + h[2] * right;
        }
    }
}

/// Adjoint of [`filter_rows`]: `out[y][x] = sum_k h[k] u[y][x - k + 1]`.
fn filter_rows_adjoint(src: &[f64], width: usize, h: &[f64; 3], out: &mut [f64]) {
    let flipped = [h[2], h[1], h[0]];
    filter_rows(src, width, &flipped, out);
}

fn filter_cols(src: &[f64], width: usize, height: usize, h: &[f64; 3], out: &mut [f64]) {
    for y in 0..height {
        let up = &src[((y + height - 1) % height) * width..][..width];
        let mid = &src[y * width..][..width];
        let down = &src[((y + 1) % height) * width..][..width];
        let row_out = &mut out[y * width..][..width];
        for x in 0..width {
            row_out[x] = h[0] * up[x] + h[1] * mid[x] + h[2] * down[x];
        }
    }
}

fn filter_cols_adjoint(src: &[f64], width: usize, height: usize, h: &[f64; 3], out: &mut [f64]) {
    let flipped = [h[2], h[1], h[0]];
    filter_cols(src, width, height, &flipped, out);
}

pub fn decompose(image: &GrayImage) -> FrameletCoeffs {
    let (w, h) = image.dims();
    let n = w * h;
    let mut rows = vec![vec![0.0; n]; 3];
    for (b, out) in rows.iter_mut().enumerate() {
        filter_rows(image.data(), w, &FILTERS[b], out);
    }
    let mut bands = Vec::with_capacity(BAND_COUNT);
    for filter in &FILTERS {
        for row in &rows {
            let mut out = vec![0.0; n];
            filter_cols(row, w, h, filter, &mut out);
            bands.push(out);
        }
    }
    FrameletCoeffs {
        width: w,
        height: h,
        bands,
    }
}

pub fn reconstruct(coeffs: &FrameletCoeffs) -> GrayImage {
    let (w, h) = coeffs.dims();
    let n = w * h;
    let mut acc = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (a, fa) in FILTERS.iter().enumerate() {
        for (b, fb) in FILTERS.iter().enumerate() {
            filter_cols_adjoint(&coeffs.bands[3 * a + b], w, h, fa, &mut col);
            filter_rows_adjoint(&col, w, fb, &mut row);
            for (s, v) in acc.iter_mut().zip(&row) {
                *s += v;
            }
        }
    }
    GrayImage::from_raw(w, h, acc)
}

/// `sign(x) * max(0, |x| - threshold)`.
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    let mag = x.abs() - threshold;
    if mag > 0.0 {
        mag.copysign(x)
    } else {
        0.0
    }
}

/// Soft shrinkage of the detail bands; the lowpass band passes through.
pub fn shrink(coeffs: &FrameletCoeffs, threshold: f64) -> Result<FrameletCoeffs> {
    shrink_with(coeffs, threshold, LowpassPolicy::Exempt)
}

pub fn shrink_with(
    coeffs: &FrameletCoeffs,
    threshold: f64,
    policy: LowpassPolicy,
) -> Result<FrameletCoeffs> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::invalid(
            "threshold",
            format!("{threshold} must be finite and >= 0"),
        ));
    }
    let bands = coeffs
        .bands
        .iter()
        .enumerate()
        .map(|(i, band)| {
            if i == 0 && policy == LowpassPolicy::Exempt {
                band.clone()
            } else {
                band.iter().map(|&v| soft_threshold(v, threshold)).collect()
            }
        })
        .collect();
    Ok(FrameletCoeffs {
        width: coeffs.width,
        height: coeffs.height,
        bands,
    })
}
