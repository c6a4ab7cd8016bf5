//! Turbulence deblurring with the Fried short-exposure kernel, a framelet
//! split Bregman solver, and blind Cn² estimation by total variation.

pub mod blind;
pub mod deconv;
pub mod error;
pub mod fft;
pub mod framelet;
pub mod fried_kernel;
pub mod image;
pub mod imaging;

pub use blind::{
    blind_deconvolve, estimate_cn2, sample_tv_curve, BlindConfig, BlindResult, Cn2Estimate, TvCurve,
};
pub use deconv::{apply_blur, deconvolve, deconvolve_fried, SolverConfig, SplitBregman};
pub use error::{Error, Result};
pub use framelet::{FrameletCoeffs, LowpassPolicy};
pub use fried_kernel::{build_kernel, FriedKernel, OpticalParams, OpticalSystem};
pub use image::GrayImage;
pub use imaging::{load_image, psnr, save_image, Psnr};
