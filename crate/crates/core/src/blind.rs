//! Blind Cn² estimation: sample the total-variation curve of deconvolved
//! images over a Cn² range, fit a least-squares polynomial, take its argmax.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::deconv::{deconvolve_fried, SolverConfig};
use crate::error::{Error, Result};
use crate::fried_kernel::{validate_cn2, OpticalSystem};
use crate::image::GrayImage;

/// Points used to locate the maximum of the fitted polynomial.
pub const ARGMAX_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlindConfig {
    pub cn2_min: f64,
    pub cn2_max: f64,
    pub n_samples: usize,
    pub poly_degree: usize,
    pub solver: SolverConfig,
}

impl Default for BlindConfig {
    fn default() -> Self {
        BlindConfig {
            cn2_min: 0.5e-14,
            cn2_max: 2.5e-13,
            n_samples: 10,
            poly_degree: 5,
            solver: SolverConfig::synthetic(),
        }
    }
}

impl BlindConfig {
    pub fn validate(&self) -> Result<()> {
        self.validate_sampling()?;
        if self.n_samples < self.poly_degree + 1 || self.poly_degree + 1 < 2 {
            return Err(Error::invalid(
                "n_samples",
                format!(
                    "need n_samples >= poly_degree + 1 >= 2, got n_samples = {}, poly_degree = {}",
                    self.n_samples, self.poly_degree
                ),
            ));
        }
        Ok(())
    }

    /// The subset of checks needed to sample a curve (no fit involved).
    fn validate_sampling(&self) -> Result<()> {
        validate_cn2(self.cn2_min)?;
        validate_cn2(self.cn2_max)?;
        if self.cn2_min >= self.cn2_max {
            return Err(Error::invalid(
                "cn2_min",
                format!(
                    "{:e} must be below cn2_max = {:e}",
                    self.cn2_min, self.cn2_max
                ),
            ));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid(
                "n_samples",
                "at least one sample is required",
            ));
        }
        self.solver.validate()
    }

    /// Equidistant Cn² values across the search range, ascending.
    pub fn sample_points(&self) -> Vec<f64> {
        if self.n_samples == 1 {
            return vec![self.cn2_min];
        }
        let step = (self.cn2_max - self.cn2_min) / (self.n_samples - 1) as f64;
        (0..self.n_samples)
            .map(|i| {
                if i + 1 == self.n_samples {
                    self.cn2_max
                } else {
                    self.cn2_min + step * i as f64
                }
            })
            .collect()
    }
}

/// Isotropic TV with forward differences; the difference past the last
/// row or column is zero.
pub fn total_variation(image: &GrayImage) -> f64 {
    let (w, h) = image.dims();
    let u = image.data();
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let here = u[y * w + x];
            let dx = if x + 1 < w {
                u[y * w + x + 1] - here
            } else {
                0.0
            };
            let dy = if y + 1 < h {
                u[(y + 1) * w + x] - here
            } else {
                0.0
            };
            total += (dx * dx + dy * dy).sqrt();
        }
    }
    total
}

/// Least-squares polynomial in a rescaled abscissa `t = (x - center) / half_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    /// Coefficients in ascending powers of `t`.
    pub coeffs: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
}

impl Polynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.center) / self.half_width
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = self.to_unit(x);
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }
}

/// Fits by the normal equations on abscissae rescaled to [-1, 1].
pub fn fit_polynomial(points: &[(f64, f64)], degree: usize) -> Result<Polynomial> {
    if points.len() < degree + 1 {
        return Err(Error::TooFewSamples {
            needed: degree + 1,
            got: points.len(),
        });
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < degree + 1 {
        return Err(Error::RankDeficient(format!(
            "{} distinct abscissae for degree {degree}",
            xs.len()
        )));
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let center = 0.5 * (lo + hi);
    let half_width = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };

    let n = degree + 1;
    let vander = DMatrix::from_fn(points.len(), n, |r, c| {
        ((points[r].0 - center) / half_width).powi(c as i32)
    });
    let y = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let gram = vander.transpose() * &vander;
    let rhs = vander.transpose() * y;
    let coeffs = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("normal matrix is not positive definite".into()))?
        .solve(&rhs);
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::RankDeficient("non-finite coefficients".into()));
    }
    Ok(Polynomial {
        coeffs: coeffs.iter().copied().collect(),
        center,
        half_width,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvCurve {
    /// `(cn2, tv)` pairs, ascending in cn2.
    pub samples: Vec<(f64, f64)>,
    /// Whether the tv values have been scaled to a maximum of 1.
    pub normalized: bool,
    /// Raw TV corresponding to a stored value of 1.
    pub tv_scale: f64,
    pub poly_degree: usize,
    /// Least-squares fit of the samples, when there are enough of them.
    pub poly: Option<Polynomial>,
    pub search_range: (f64, f64),
}

impl TvCurve {
    pub fn new(samples: Vec<(f64, f64)>, search_range: (f64, f64), poly_degree: usize) -> Self {
        let poly = fit_polynomial(&samples, poly_degree).ok();
        TvCurve {
            samples,
            normalized: false,
            tv_scale: 1.0,
            poly_degree,
            poly,
            search_range,
        }
    }

    pub fn max_tv(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Copy scaled so the largest tv is 1. Returns a clone when all values
    /// are zero.
    pub fn normalized(&self) -> TvCurve {
        let max = self.max_tv();
        if self.normalized || max.is_nan() || max <= 0.0 {
            return self.clone();
        }
        let samples = self.samples.iter().map(|&(c, t)| (c, t / max)).collect();
        let mut out = TvCurve::new(samples, self.search_range, self.poly_degree);
        out.normalized = true;
        out.tv_scale = self.tv_scale * max;
        out
    }

    /// Index of the largest sampled tv.
    pub fn sample_argmax(&self) -> Option<usize> {
        self.samples
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
    }

    /// Writes `cn2,tv_normalized,poly_fit`; the fit column is scaled by the
    /// same factor as the tv column and left empty when no fit exists.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let max = self.max_tv();
        let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
        writeln!(out, "cn2,tv_normalized,poly_fit")?;
        for &(c, t) in &self.samples {
            match &self.poly {
                Some(p) => writeln!(out, "{c:e},{:e},{:e}", t * scale, p.eval(c) * scale)?,
                None => writeln!(out, "{c:e},{:e},", t * scale)?,
            }
        }
        Ok(())
    }
}

/// Which end of the search range the estimate landed on, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Saturation {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cn2Estimate {
    pub cn2: f64,
    pub saturation: Option<Saturation>,
}

impl Cn2Estimate {
    pub fn saturated(&self) -> bool {
        self.saturation.is_some()
    }
}

pub fn sample_tv_curve(
    blurred: &GrayImage,
    system: &OpticalSystem,
    config: &BlindConfig,
) -> Result<TvCurve> {
    config.validate_sampling()?;
    let points = config.sample_points();
    let tvs: Vec<f64> = points
        .par_iter()
        .map(|&cn2| {
            let sample = || -> Result<f64> {
                let optics = system.with_cn2(cn2)?;
                let restored = deconvolve_fried(blurred, &optics, &config.solver)?;
                Ok(total_variation(&restored))
            };
            sample().map_err(|e| Error::SampleFailed {
                cn2,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let samples = points.into_iter().zip(tvs).collect();
    Ok(TvCurve::new(
        samples,
        (config.cn2_min, config.cn2_max),
        config.poly_degree,
    )
    .normalized())
}

/// Argmax of the fitted polynomial over a dense grid of the search range.
pub fn estimate_cn2(curve: &TvCurve) -> Result<Cn2Estimate> {
    let needed = curve.poly_degree + 1;
    if curve.samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: curve.samples.len(),
        });
    }
    if curve.samples.iter().any(|s| !s.1.is_finite()) {
        return Err(Error::UninformativeImage(
            "TV curve has non-finite samples".into(),
        ));
    }
    if curve.max_tv() <= 0.0 {
        return Err(Error::UninformativeImage(
            "TV is zero for every Cn² sample (constant image?)".into(),
        ));
    }
    let poly = match &curve.poly {
        Some(p) => p.clone(),
        None => fit_polynomial(&curve.samples, curve.poly_degree)?,
    };
    let (lo, hi) = curve.search_range;
    let last = ARGMAX_GRID_POINTS - 1;
    let grid = |i: usize| {
        if i == last {
            hi
        } else {
            lo + (hi - lo) * i as f64 / last as f64
        }
    };
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..ARGMAX_GRID_POINTS {
        let v = poly.eval(grid(i));
        if v > best.1 {
            best = (i, v);
        }
    }
    let saturation = match best.0 {
        0 => Some(Saturation::Lower),
        i if i == last => Some(Saturation::Upper),
        _ => None,
    };
    Ok(Cn2Estimate {
        cn2: grid(best.0),
        saturation,
    })
}

#[derive(Debug, Clone)]
pub struct BlindResult {
    pub restored: GrayImage,
    pub estimate: Cn2Estimate,
    pub curve: TvCurve,
}

pub fn blind_deconvolve(
    blurred: &GrayImage,
    system: &OpticalSystem,
    config: &BlindConfig,
) -> Result<BlindResult> {
    config.validate()?;
    let curve = sample_tv_curve(blurred, system, config)?;
    let estimate = estimate_cn2(&curve)?;
    let optics = system.with_cn2(estimate.cn2)?;
    let restored = deconvolve_fried(blurred, &optics, &config.solver)?;
    Ok(BlindResult {
        restored,
        estimate,
        curve,
    })
}
