//! Analytic Fried MTF: the diffraction-limited system MTF `M0` times the
//! short-exposure turbulence MTF `M_SA`, and its rasterization onto a DFT grid.
//!
//! Frequencies are normalized so that `omega = 1` is the diffraction cutoff.
//! On an image grid, `omega = 1` is placed at `cutoff_scale * Nyquist`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fft::signed_frequency;

/// Lower end of the physically plausible turbulence range, m^(-2/3).
pub const CN2_MIN: f64 = 1e-16;
/// Upper end of the physically plausible turbulence range, m^(-2/3).
pub const CN2_MAX: f64 = 1e-12;

/// Smallest grid edge accepted by [`build_kernel`].
pub const MIN_KERNEL_DIM: usize = 8;

/// Imaging system geometry, without the turbulence strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSystem {
    aperture_diameter_m: f64,
    path_length_m: f64,
    wavelength_m: f64,
    cutoff_scale: f64,
}

impl OpticalSystem {
    pub fn new(
        aperture_diameter_m: f64,
        path_length_m: f64,
        wavelength_m: f64,
        cutoff_scale: f64,
    ) -> Result<Self> {
        positive("aperture_diameter_m", aperture_diameter_m)?;
        positive("path_length_m", path_length_m)?;
        positive("wavelength_m", wavelength_m)?;
        if !(cutoff_scale > 0.0 && cutoff_scale <= 1.0) {
            return Err(Error::invalid(
                "cutoff_scale",
                format!("{cutoff_scale} is outside (0, 1]"),
            ));
        }
        Ok(OpticalSystem {
            aperture_diameter_m,
            path_length_m,
            wavelength_m,
            cutoff_scale,
        })
    }

    pub fn aperture_diameter_m(&self) -> f64 {
        self.aperture_diameter_m
    }

    pub fn path_length_m(&self) -> f64 {
        self.path_length_m
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn cutoff_scale(&self) -> f64 {
        self.cutoff_scale
    }

    pub fn with_cn2(&self, cn2: f64) -> Result<OpticalParams> {
        validate_cn2(cn2)?;
        Ok(OpticalParams { system: *self, cn2 })
    }
}

/// The four physical inputs of the Fried kernel plus the grid mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    system: OpticalSystem,
    cn2: f64,
}

impl OpticalParams {
    pub fn new(
        aperture_diameter_m: f64,
        path_length_m: f64,
        wavelength_m: f64,
        cn2: f64,
        cutoff_scale: f64,
    ) -> Result<Self> {
        OpticalSystem::new(
            aperture_diameter_m,
            path_length_m,
            wavelength_m,
            cutoff_scale,
        )?
        .with_cn2(cn2)
    }

    pub fn system(&self) -> &OpticalSystem {
        &self.system
    }

    pub fn aperture_diameter_m(&self) -> f64 {
        self.system.aperture_diameter_m
    }

    pub fn path_length_m(&self) -> f64 {
        self.system.path_length_m
    }

    pub fn wavelength_m(&self) -> f64 {
        self.system.wavelength_m
    }

    pub fn cutoff_scale(&self) -> f64 {
        self.system.cutoff_scale
    }

    pub fn cn2(&self) -> f64 {
        self.cn2
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be finite and > 0")))
    }
}

pub fn validate_cn2(cn2: f64) -> Result<()> {
    if (CN2_MIN..=CN2_MAX).contains(&cn2) {
        Ok(())
    } else {
        Err(Error::invalid(
            "cn2",
            format!("{cn2:e} m^(-2/3) is outside the valid range [{CN2_MIN:e}, {CN2_MAX:e}]"),
        ))
    }
}

/// Quantities derived from [`OpticalParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// k = 2π/λ, m⁻¹
    pub wavenumber: f64,
    /// ρ₀, m
    pub coherence_length: f64,
    /// r₀ = 2.1 ρ₀, m
    pub coherence_diameter: f64,
    /// P = √(λL), m
    pub fresnel_scale: f64,
    /// Q = D/P
    pub q_ratio: f64,
    /// X = D/r₀
    pub x_ratio: f64,
}

pub fn derive_params(optics: &OpticalParams) -> DerivedParams {
    let lambda = optics.wavelength_m();
    let l = optics.path_length_m();
    let d = optics.aperture_diameter_m();
    let wavenumber = 2.0 * PI / lambda;
    // The 1.437 factor sits outside the power.
    let coherence_length = 1.437 * (wavenumber * wavenumber * l * optics.cn2()).powf(-3.0 / 5.0);
    let coherence_diameter = 2.1 * coherence_length;
    let fresnel_scale = (lambda * l).sqrt();
    DerivedParams {
        wavenumber,
        coherence_length,
        coherence_diameter,
        fresnel_scale,
        q_ratio: d / fresnel_scale,
        x_ratio: d / coherence_diameter,
    }
}

/// `(e^q - 1) / (e^q + 1)`, evaluated without overflow.
pub fn sigma(q: f64) -> f64 {
    if q.abs() > 700.0 {
        return q.signum();
    }
    let m = (-q.abs()).exp_m1();
    let s = -m / (2.0 + m);
    s.copysign(q)
}

pub fn coeff_a(q: f64) -> f64 {
    if q < -1.50 {
        0.840 + 0.116 * sigma(1.35 * (q + 1.50))
    } else {
        0.840 + 0.280 * sigma(0.51 * (q + 1.50))
    }
}

pub fn coeff_b(q: f64) -> f64 {
    0.805 + 0.265 * sigma(1.45 * (q - 0.15))
}

pub fn v_factor(q_ratio: f64, x_ratio: f64) -> Result<f64> {
    positive("Q", q_ratio)?;
    positive("X", x_ratio)?;
    Ok(v_factor_unchecked(q_ratio, x_ratio))
}

fn v_factor_unchecked(q_ratio: f64, x_ratio: f64) -> f64 {
    let q = q_ratio.log2();
    let x = x_ratio.log10();
    coeff_a(q) + coeff_b(q) / 10.0 * (-(x + 1.0).powi(3) / 3.5).exp()
}

/// Diffraction-limited MTF of a circular pupil. Zero for `omega >= 1`.
pub fn mtf_diffraction(omega: f64) -> Result<f64> {
    check_omega(omega)?;
    Ok(m0(omega))
}

fn m0(omega: f64) -> f64 {
    if omega >= 1.0 {
        0.0
    } else {
        2.0 / PI * (omega.acos() - omega * (1.0 - omega * omega).sqrt())
    }
}

/// Short-exposure (tilt-removed) turbulence MTF.
///
/// The exponent bracket `omega^(5/3) - V omega^2` turns negative once
/// `V > omega^(-1/3)`, where the closed form would exceed unity and, for
/// large `X`, overflow. The bracket is floored at zero there, so the result
/// lies in (0, 1].
pub fn mtf_short_exposure(omega: f64, q_ratio: f64, x_ratio: f64) -> Result<f64> {
    check_omega(omega)?;
    positive("Q", q_ratio)?;
    positive("X", x_ratio)?;
    Ok(msa(
        omega,
        (2.1 * x_ratio).powf(5.0 / 3.0),
        v_factor_unchecked(q_ratio, x_ratio),
    ))
}

fn msa(omega: f64, prefactor: f64, v: f64) -> f64 {
    if omega == 0.0 {
        return 1.0;
    }
    let bracket = omega.powf(5.0 / 3.0) - v * omega * omega;
    if bracket > 0.0 {
        (-prefactor * bracket).exp()
    } else {
        1.0
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "omega",
            format!("{omega} must be finite and >= 0"),
        ))
    }
}

/// Precomputed per-parameter factors so that rasterizing and scalar
/// evaluation go through the same arithmetic.
#[derive(Debug, Clone, Copy)]
struct FriedTerms {
    prefactor: f64,
    v: f64,
}

impl FriedTerms {
    fn new(optics: &OpticalParams) -> Self {
        let derived = derive_params(optics);
        FriedTerms {
            prefactor: (2.1 * derived.x_ratio).powf(5.0 / 3.0),
            v: v_factor_unchecked(derived.q_ratio, derived.x_ratio),
        }
    }

    fn eval(&self, omega: f64) -> (f64, f64, f64) {
        let diffraction = m0(omega);
        let short = msa(omega, self.prefactor, self.v);
        (diffraction, short, diffraction * short)
    }
}

pub fn mtf_fried(omega: f64, optics: &OpticalParams) -> Result<f64> {
    check_omega(omega)?;
    Ok(FriedTerms::new(optics).eval(omega).2)
}

/// One row of a 1-D kernel profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub omega: f64,
    pub m0: f64,
    pub msa: f64,
    pub mf: f64,
}

pub fn kernel_profile(optics: &OpticalParams, omegas: &[f64]) -> Result<Vec<ProfileSample>> {
    let terms = FriedTerms::new(optics);
    omegas
        .iter()
        .map(|&omega| {
            check_omega(omega)?;
            let (m0, msa, mf) = terms.eval(omega);
            Ok(ProfileSample { omega, m0, msa, mf })
        })
        .collect()
}

/// Writes the `omega,m0,msa,mf` CSV.
pub fn write_profile_csv<W: Write>(mut out: W, rows: &[ProfileSample]) -> std::io::Result<()> {
    writeln!(out, "omega,m0,msa,mf")?;
    for r in rows {
        writeln!(out, "{:e},{:e},{:e},{:e}", r.omega, r.m0, r.msa, r.mf)?;
    }
    Ok(())
}

/// Fried MTF sampled on a DFT grid, DC at `[0, 0]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FriedKernel {
    width: usize,
    height: usize,
    mtf: Vec<f64>,
    params: Option<OpticalParams>,
}

impl FriedKernel {
    /// Arbitrary real transfer function in DFT layout. Used for identity and
    /// test kernels; Fried kernels come from [`build_kernel`].
    pub fn from_mtf(width: usize, height: usize, mtf: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || mtf.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: format!("transfer function has {} entries", mtf.len()),
            });
        }
        if mtf.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mtf", "non-finite entry"));
        }
        Ok(FriedKernel {
            width,
            height,
            mtf,
            params: None,
        })
    }

    pub fn identity(width: usize, height: usize) -> Result<Self> {
        Self::from_mtf(width, height, vec![1.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mtf(&self) -> &[f64] {
        &self.mtf
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.mtf[y * self.width + x]
    }

    pub fn params(&self) -> Option<&OpticalParams> {
        self.params.as_ref()
    }
}

/// Normalized frequency modulus of DFT bin `(x, y)` on a `width x height` grid.
pub fn normalized_frequency(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    cutoff_scale: f64,
) -> f64 {
    let fx = signed_frequency(x, width);
    let fy = signed_frequency(y, height);
    (fx * fx + fy * fy).sqrt() / (0.5 * cutoff_scale)
}

pub fn build_kernel(optics: &OpticalParams, width: usize, height: usize) -> Result<FriedKernel> {
    if width < MIN_KERNEL_DIM || height < MIN_KERNEL_DIM {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: format!("kernel grid must be at least {MIN_KERNEL_DIM}x{MIN_KERNEL_DIM}"),
        });
    }
    let terms = FriedTerms::new(optics);
    let cutoff = optics.cutoff_scale();
    let mut mtf = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            mtf.push(
                terms
                    .eval(normalized_frequency(x, y, width, height, cutoff))
                    .2,
            );
        }
    }
    Ok(FriedKernel {
        width,
        height,
        mtf,
        params: Some(*optics),
    })
}
