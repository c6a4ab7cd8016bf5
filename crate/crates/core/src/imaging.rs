//! Image files, synthetic degradation, quality metrics and test scenes.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::deconv::apply_blur;
use crate::error::{Error, Result};
use crate::fft::{signed_frequency, Fft2, Spectrum};
use crate::fried_kernel::{build_kernel, OpticalParams};
use crate::image::GrayImage;

const BUNDLED_SCENE: &[u8] = include_bytes!("../assets/scene256.pgm");

/// Seed and size used to generate the bundled scene.
pub const BUNDLED_SCENE_SEED: u64 = 3;
pub const BUNDLED_SCENE_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_from_extension(path: &Path) -> Option<Format> {
    match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
        "pgm" => Some(Format::Pgm),
        "png" => Some(Format::Png),
        _ => None,
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path)
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes, path)
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: "expected binary PGM (P5) or PNG".into(),
        })
    }
}

/// Clamps to [0, 1] and writes 8-bit grayscale, format chosen by extension.
pub fn save_image(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let format = format_from_extension(path).ok_or_else(|| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason: "output extension must be .pgm or .png".into(),
    })?;
    let pixels = quantize_u8(image);
    match format {
        Format::Pgm => fs::write(path, encode_pgm(image.width(), image.height(), &pixels))
            .map_err(|e| Error::io(path, e)),
        Format::Png => {
            image::GrayImage::from_raw(image.width() as u32, image.height() as u32, pixels)
                .expect("buffer size matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(|source| Error::Codec {
                    path: path.to_path_buf(),
                    source,
                })
        }
    }
}

/// Clamp to [0, 1], then round half away from zero onto 0..=255.
pub fn quantize_u8(image: &GrayImage) -> Vec<u8> {
    image
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Decodes a binary PGM. `maxval` up to 65535 is accepted (two bytes per
/// sample, big-endian, above 255).
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let err = |offset: usize, reason: &str| Error::Parse {
        path: path.to_path_buf(),
        offset,
        reason: reason.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(err(0, "missing P5 magic number"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each header field.
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if i == 0 && pos == start {
            return Err(err(pos, "expected whitespace after magic number"));
        }
        let digits_start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == digits_start {
            let name = ["width", "height", "maxval"][i];
            return Err(err(pos, &format!("expected decimal {name}")));
        }
        let text = std::str::from_utf8(&bytes[digits_start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| err(digits_start, "header value out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err(pos, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(err(pos, "maxval must be in 1..=65535"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(err(pos, "expected single whitespace before raster")),
    }
    let bytes_per_sample = if maxval > 255 { 2 } else { 1 };
    let needed = width * height * bytes_per_sample;
    let raster = &bytes[pos..];
    if raster.len() < needed {
        return Err(err(
            bytes.len(),
            &format!(
                "raster truncated: need {needed} bytes, found {}",
                raster.len()
            ),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let data = if bytes_per_sample == 1 {
        raster[..needed].iter().map(|&b| b as f64 * scale).collect()
    } else {
        raster[..needed]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 * scale)
            .collect()
    };
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let codec = |source| Error::Codec {
        path: path.to_path_buf(),
        source,
    };
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(codec)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        image::DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        image::DynamicImage::ImageLumaA8(buf) => {
            buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect()
        }
        image::DynamicImage::ImageLumaA16(buf) => {
            buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
        }
        other => {
            log::warn!(
                "{}: color image converted to grayscale by channel mean",
                path.display()
            );
            other
                .to_rgb32f()
                .pixels()
                .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
                .collect()
        }
    };
    GrayImage::new(w, h, data)
}

/// Fried blur followed by optional additive white Gaussian noise drawn from a
/// seeded ChaCha8 stream.
pub fn simulate_blur(
    image: &GrayImage,
    optics: &OpticalParams,
    noise_sigma: f64,
    seed: u64,
) -> Result<GrayImage> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(
            "noise_sigma",
            format!("{noise_sigma} must be finite and >= 0"),
        ));
    }
    let kernel = build_kernel(optics, image.width(), image.height())?;
    let blurred = apply_blur(image, &kernel)?;
    if noise_sigma == 0.0 {
        return Ok(blurred);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).expect("sigma validated");
    let (w, h) = blurred.dims();
    let data = blurred
        .into_data()
        .into_iter()
        .map(|v| v + normal.sample(&mut rng))
        .collect();
    Ok(GrayImage::from_raw(w, h, data))
}

/// Peak signal-to-noise ratio with peak value 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    /// The images are identical.
    Infinite,
}

impl Psnr {
    pub fn db(&self) -> f64 {
        match *self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.4} dB"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<Psnr> {
    a.ensure_same_dims(b)?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    if sse == 0.0 {
        return Ok(Psnr::Infinite);
    }
    let mse = sse / a.len() as f64;
    Ok(Psnr::Finite(-10.0 * mse.log10()))
}

/// The 256x256 textured scene shipped with the crate.
pub fn bundled_scene() -> GrayImage {
    decode_pgm(BUNDLED_SCENE, Path::new("<bundled scene256.pgm>")).expect("bundled asset is valid")
}

/// Procedural test scene: a vertical illumination gradient, a handful of
/// piecewise-constant discs and bars, and a 1/f^1.5 random texture.
/// Clamped to [0, 1]. The bundled scene is this function's output at
/// [`BUNDLED_SCENE_SEED`], quantized to 8 bits.
pub fn textured_scene(size: usize, seed: u64) -> Result<GrayImage> {
    if size < 8 {
        return Err(Error::InvalidDimensions {
            width: size,
            height: size,
            reason: "scene must be at least 8x8".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let n = size as f64;
    let mut img: Vec<f64> = (0..size * size)
        .map(|i| 0.3 + 0.4 * (i / size) as f64 / n)
        .collect();

    for _ in 0..8 {
        let cx = unit.sample(&mut rng);
        let cy = unit.sample(&mut rng);
        let r = (10.0 + 30.0 * unit.sample(&mut rng)) / n;
        let v = -0.35 + 0.7 * unit.sample(&mut rng);
        let shape = (unit.sample(&mut rng) * 3.0) as u32;
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 / n - cx;
                let dy = y as f64 / n - cy;
                let inside = match shape {
                    0 => dx * dx + dy * dy < r * r,
                    1 => dx.abs() < r && dy.abs() < 0.5 * r,
                    _ => dx.abs() < 0.3 * r && dy.abs() < 1.5 * r,
                };
                if inside {
                    img[y * size + x] += v;
                }
            }
        }
    }

    let texture = pink_texture(size, 1.5, &mut rng);
    let data = img
        .iter()
        .zip(texture.data())
        .map(|(v, t)| (v + 0.06 * t).clamp(0.0, 1.0))
        .collect();
    GrayImage::new(size, size, data)
}

/// Zero-mean, unit-variance random field with amplitude spectrum `1/f^beta`.
fn pink_texture(size: usize, beta: f64, rng: &mut ChaCha8Rng) -> GrayImage {
    let normal = Normal::new(0.0, 1.0).expect("valid sigma");
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let fx = signed_frequency(x, size);
            let fy = signed_frequency(y, size);
            let f = (fx * fx + fy * fy).sqrt();
            let re = normal.sample(rng);
            let im = normal.sample(rng);
            let amp = if f == 0.0 { 0.0 } else { f.powf(-beta) };
            data.push(rustfft::num_complex::Complex64::new(re * amp, im * amp));
        }
    }
    let field = Fft2::new(size, size).inverse_real(&Spectrum {
        width: size,
        height: size,
        data,
    });
    let mean = field.mean();
    let var = field
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / field.len() as f64;
    let inv_std = 1.0 / var.sqrt();
    field.map(|v| (v - mean) * inv_std)
}

/// Texture-free bar chart: three groups of three bars at decreasing pitch in
/// each orientation, bright on a dark background.
pub fn bar_chart(size: usize) -> Result<GrayImage> {
    if size < 32 {
        return Err(Error::InvalidDimensions {
            width: size,
            height: size,
            reason: "bar chart must be at least 32x32".into(),
        });
    }
    let mut img = vec![0.2; size * size];
    let s = size as f64 / 256.0;
    let groups = [(16.0, 12.0), (96.0, 8.0), (160.0, 5.0)];
    for &(origin, pitch) in &groups {
        let origin = (origin * s) as usize;
        let bar = ((pitch * s) as usize).max(1);
        let length = (5 * bar).max(4);
        for k in 0..3 {
            let start = origin + 2 * k * bar;
            // vertical bars in the upper half
            for y in (size / 8)..(size / 8 + length).min(size / 2) {
                for x in start..(start + bar).min(size) {
                    img[y * size + x] = 0.8;
                }
            }
            // horizontal bars in the lower half
            for y in (size / 2 + start / 2)..(size / 2 + start / 2 + bar).min(size) {
                for x in origin..(origin + length).min(size) {
                    img[y * size + x] = 0.8;
                }
            }
        }
    }
    GrayImage::new(size, size, img)
}
