//! 2-D DFT on row-major buffers, built from rustfft 1-D plans.
//!
//! The forward transform is unnormalized; the inverse divides by `width * height`
//! so that `inverse(forward(x)) == x`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::image::GrayImage;

/// Spectrum of a `width x height` grid in standard DFT layout (DC at index 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Complex64>,
}

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn forward_real(&self, image: &GrayImage) -> Spectrum {
        debug_assert_eq!(image.dims(), (self.width, self.height));
        let mut data: Vec<Complex64> = image
            .data()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.transform(&mut data, &self.row_fwd, &self.col_fwd);
        Spectrum {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &Spectrum) -> GrayImage {
        let mut data = spectrum.data.clone();
        self.transform(&mut data, &self.row_inv, &self.col_inv);
        let scale = 1.0 / (self.width * self.height) as f64;
        GrayImage::from_raw(
            self.width,
            self.height,
            data.into_iter().map(|c| c.re * scale).collect(),
        )
    }

    fn transform(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.width, self.height);
        let mut scratch = vec![
            Complex64::default();
            row.get_inplace_scratch_len()
                .max(col.get_inplace_scratch_len())
        ];
        for r in data.chunks_exact_mut(w) {
            row.process_with_scratch(r, &mut scratch);
        }
        let mut column = vec![Complex64::default(); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            col.process_with_scratch(&mut column, &mut scratch);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
    }
}

/// Signed DFT frequency of bin `i` on an axis of length `n`, in cycles per
/// sample, within [-0.5, 0.5).
pub fn signed_frequency(i: usize, n: usize) -> f64 {
    let k = if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    };
    k / n as f64
}
