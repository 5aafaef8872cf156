//! Optical configuration, complex fields on the SLM grid and the sampled
//! frequency grid.
//!
//! Pixel `(row, col)` of an SLM-grid array sits at
//! `x = (col - W/2) * pitch_x`, `y = (row - H/2) * pitch_y`, so the optical
//! axis passes through pixel `(H/2, W/2)`. Frequency-domain arrays use FFT
//! order.

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;

/// Continuous angular-spectrum samples on a [`FrequencyGrid`], FFT order.
///
/// Values carry the units of a continuous 2D Fourier transform (field times
/// m^2); [`field_from_spectrum`] and [`spectrum_of_field`] convert to and
/// from sampled fields.
pub type Spectrum = Array2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalConfig {
    pub wavelength: f64,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub width: usize,
    pub height: usize,
    /// Unit propagation direction of the illuminating plane wave.
    pub reference_dir: [f64; 3],
}

impl OpticalConfig {
    pub fn new(
        wavelength: f64,
        pitch_x: f64,
        pitch_y: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let c = OpticalConfig {
            wavelength,
            pitch_x,
            pitch_y,
            width,
            height,
            reference_dir: [0.0, 0.0, 1.0],
        };
        c.validate()?;
        Ok(c)
    }

    /// Square pixels.
    pub fn square(wavelength: f64, pitch: f64, width: usize, height: usize) -> Result<Self> {
        Self::new(wavelength, pitch, pitch, width, height)
    }

    pub fn with_reference_dir(mut self, dir: [f64; 3]) -> Result<Self> {
        self.reference_dir = dir;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return bad(format!("wavelength must be positive, got {}", self.wavelength));
        }
        if !(self.pitch_x.is_finite() && self.pitch_x > 0.0)
            || !(self.pitch_y.is_finite() && self.pitch_y > 0.0)
        {
            return bad(format!(
                "pixel pitch must be positive, got ({}, {})",
                self.pitch_x, self.pitch_y
            ));
        }
        for (name, n) in [("width", self.width), ("height", self.height)] {
            if n < 2 || n % 2 != 0 {
                return bad(format!("{name} must be even and at least 2, got {n}"));
            }
        }
        let [dx, dy, dz] = self.reference_dir;
        let norm = (dx * dx + dy * dy + dz * dz).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return bad(format!("reference direction must be unit length, norm is {norm}"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn x_at(&self, col: usize) -> f64 {
        (col as f64 - (self.width / 2) as f64) * self.pitch_x
    }

    pub fn y_at(&self, row: usize) -> f64 {
        (row as f64 - (self.height / 2) as f64) * self.pitch_y
    }

    /// Frequency step along x, 1 / (W pitch_x).
    pub fn df_x(&self) -> f64 {
        1.0 / (self.width as f64 * self.pitch_x)
    }

    pub fn df_y(&self) -> f64 {
        1.0 / (self.height as f64 * self.pitch_y)
    }

    pub fn nyquist_x(&self) -> f64 {
        0.5 / self.pitch_x
    }

    pub fn nyquist_y(&self) -> f64 {
        0.5 / self.pitch_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Spatial,
    Frequency,
}

/// A complex array with its optical configuration. Spatial data is sampled
/// on the SLM grid; frequency data holds unitary DFT coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub data: Array2<Complex64>,
    pub config: OpticalConfig,
    pub domain: Domain,
}

impl ComplexField {
    pub fn zeros(config: OpticalConfig, domain: Domain) -> Self {
        ComplexField {
            data: Array2::zeros(config.shape()),
            config,
            domain,
        }
    }

    pub fn new(data: Array2<Complex64>, config: OpticalConfig, domain: Domain) -> Result<Self> {
        config.validate()?;
        if data.dim() != config.shape() {
            return Err(Error::Shape(format!(
                "array is {:?}, configuration expects {:?}",
                data.dim(),
                config.shape()
            )));
        }
        Ok(ComplexField {
            data,
            config,
            domain,
        })
    }

    pub fn spatial(data: Array2<Complex64>, config: OpticalConfig) -> Result<Self> {
        Self::new(data, config, Domain::Spatial)
    }

    pub fn amplitude(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm())
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.data.mapv(|v| v.norm_sqr())
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::DomainMismatch {
                expected,
                found: self.domain,
            });
        }
        Ok(())
    }
}

/// Sampled frequency coordinates of an SLM grid.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    /// Longitudinal frequency, zero where the sample is evanescent.
    pub fz: Array2<f64>,
    /// `fz - 1/wavelength`, evaluated without cancellation.
    pub fz_offset: Array2<f64>,
    /// `-(fz - 1/wavelength) - wavelength rho^2 / 2`, the part of the
    /// axial offset beyond the paraxial term. Equal to
    /// `wavelength rho^4 / (2 (fz + 1/wavelength)^2)`.
    pub paraxial_residual: Array2<f64>,
    pub max_paraxial_residual: f64,
    /// True where `fx^2 + fy^2 < 1/wavelength^2`.
    pub propagating: Array2<bool>,
    pub wavelength: f64,
    pub inv_wavelength: f64,
}

impl FrequencyGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.fy.len(), self.fx.len())
    }
}

fn fft_frequencies(n: usize, pitch: f64) -> Vec<f64> {
    let span = n as f64 * pitch;
    (0..n)
        .map(|k| {
            let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            signed as f64 / span
        })
        .collect()
}

pub fn make_frequency_grid(config: &OpticalConfig) -> FrequencyGrid {
    let fx = fft_frequencies(config.width, config.pitch_x);
    let fy = fft_frequencies(config.height, config.pitch_y);
    let k = 1.0 / config.wavelength;
    let k2 = k * k;
    let shape = config.shape();
    let mut fz = Array2::zeros(shape);
    let mut fz_offset = Array2::zeros(shape);
    let mut paraxial_residual = Array2::zeros(shape);
    let mut max_paraxial_residual: f64 = 0.0;
    let mut propagating = Array2::from_elem(shape, false);
    for (r, &vy) in fy.iter().enumerate() {
        for (c, &vx) in fx.iter().enumerate() {
            let rho2 = vx * vx + vy * vy;
            if rho2 < k2 {
                let z = (k2 - rho2).sqrt();
                fz[(r, c)] = z;
                fz_offset[(r, c)] = -rho2 / (z + k);
                let res = config.wavelength * rho2 * rho2 / (2.0 * (z + k) * (z + k));
                paraxial_residual[(r, c)] = res;
                max_paraxial_residual = max_paraxial_residual.max(res);
                propagating[(r, c)] = true;
            }
        }
    }
    FrequencyGrid {
        fx,
        fy,
        fz,
        fz_offset,
        paraxial_residual,
        max_paraxial_residual,
        propagating,
        wavelength: config.wavelength,
        inv_wavelength: k,
    }
}

pub fn fft2(field: &ComplexField) -> Result<ComplexField> {
    field.expect_domain(Domain::Spatial)?;
    let mut data = field.data.clone();
    fft2_inplace(&mut data, false);
    Ok(ComplexField {
        data,
        config: field.config,
        domain: Domain::Frequency,
    })
}

pub fn ifft2(field: &ComplexField) -> Result<ComplexField> {
    field.expect_domain(Domain::Frequency)?;
    let mut data = field.data.clone();
    fft2_inplace(&mut data, true);
    Ok(ComplexField {
        data,
        config: field.config,
        domain: Domain::Spatial,
    })
}

/// Sum of squared magnitudes. Equal in both domains for a unitary FFT.
pub fn energy(field: &ComplexField) -> f64 {
    field.data.iter().map(|v| v.norm_sqr()).sum()
}

fn centring_sign(r: usize, c: usize) -> f64 {
    if (r + c).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Samples the field whose continuous spectrum is `spectrum` on the SLM grid.
pub fn field_from_spectrum(spectrum: &Spectrum, config: &OpticalConfig) -> Result<ComplexField> {
    let mut data = spectrum.clone();
    field_from_spectrum_inplace(&mut data, config)?;
    ComplexField::new(data, *config, Domain::Spatial)
}

pub(crate) fn field_from_spectrum_inplace(
    data: &mut Array2<Complex64>,
    config: &OpticalConfig,
) -> Result<()> {
    if data.dim() != config.shape() {
        return Err(Error::Shape(format!(
            "spectrum is {:?}, configuration expects {:?}",
            data.dim(),
            config.shape()
        )));
    }
    let scale = 1.0 / (config.pitch_x * config.pitch_y * (config.len() as f64).sqrt());
    Zip::indexed(&mut *data).for_each(|(r, c), v| *v *= scale * centring_sign(r, c));
    fft2_inplace(data, true);
    Ok(())
}

/// Continuous spectrum samples of a spatial field; inverse of
/// [`field_from_spectrum`].
pub fn spectrum_of_field(field: &ComplexField) -> Result<Spectrum> {
    field.expect_domain(Domain::Spatial)?;
    let mut data = field.data.clone();
    spectrum_of_array_inplace(&mut data, &field.config);
    Ok(data)
}

pub(crate) fn spectrum_of_array_inplace(data: &mut Array2<Complex64>, config: &OpticalConfig) {
    fft2_inplace(data, false);
    let scale = config.pitch_x * config.pitch_y * (config.len() as f64).sqrt();
    Zip::indexed(&mut *data).for_each(|(r, c), v| *v *= scale * centring_sign(r, c));
}

/// Fractional part of `a * b` in cycles, accurate far beyond the rounding of
/// the product itself.
pub(crate) fn frac_product(a: f64, b: f64) -> f64 {
    let hi = a * b;
    let lo = a.mul_add(b, -hi);
    (hi - hi.round()) + lo
}

/// `exp(j 2 pi cycles)`.
pub(crate) fn cis_cycles(cycles: f64) -> Complex64 {
    let (s, c) = (TAU * cycles).sin_cos();
    Complex64::new(c, s)
}
