//! Closed-form angular spectra of flat Gaussians.
//!
//! For a Gaussian with rotation `R`, in-plane scales `s_u, s_v` and centre
//! `mu`, the spectrum at the SLM plane is
//!
//! ```text
//! U(f) = 2 pi det(J) s_u s_v exp(-2 pi^2 f^T Sigma f) exp(-j 2 pi f . mu)
//! ```
//!
//! with `f = (fx, fy, fz)`, `Sigma = R diag(s_u^2, s_v^2, 0) R^T` and
//! `det(J) = f_o,z / fz`, `f_o = R^T f`. The `fz mu_z` part of the ramp is
//! back-propagation from the Gaussian's plane to the SLM. Samples that are
//! evanescent, grazing (`fz < 1e-6 / wavelength`) or that meet the surface
//! from behind (`f_o,z <= 0`) are zero.

use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::Vector3;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::field::{
    cis_cycles, field_from_spectrum, frac_product, ComplexField, FrequencyGrid, OpticalConfig,
    Spectrum,
};
use crate::holographics::HologramGaussian;

/// Envelope exponents beyond this are skipped; `exp(-36)` is below double
/// precision relative to the peak.
pub const ENVELOPE_CUTOFF: f64 = 36.0;
/// Samples with `fz < GRAZING_LIMIT / wavelength` are dropped.
pub const GRAZING_LIMIT: f64 = 1e-6;

static FLIP_JACOBIAN: AtomicBool = AtomicBool::new(false);

/// Negates the Jacobian determinant in every spectrum evaluated afterwards.
/// Only meant for checking that validation suites catch the error.
#[doc(hidden)]
pub fn inject_jacobian_sign_fault(on: bool) {
    FLIP_JACOBIAN.store(on, Ordering::SeqCst);
}

/// Which part of the phase ramp `exp(-j 2 pi f . mu)` to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ramp {
    /// Whole ramp: the wavefront arriving at the SLM.
    Full,
    /// Lateral ramp only: the wavefront in the Gaussian's own plane.
    AtDepth,
    /// Full ramp times the phase-match constant, so the DC sample has zero
    /// phase.
    Matched,
    /// No ramp: the Gaussian centred on the origin of its own plane.
    None,
}

/// Per-Gaussian constants for evaluating its spectrum row by row.
///
/// The axial ramp `exp(-j 2 pi (fz - 1/wavelength) mu_z)` is split into the
/// paraxial factor `exp(j pi wavelength mu_z (fx^2 + fy^2))`, which is
/// separable and goes into the row and column tables, and a residual phase
/// that is small on ordinary grids and is then summed as a short series.
pub(crate) struct SplatKernel {
    // 2 pi^2 Sigma entries: xx, yy, zz, xy, xz, yz
    q: [f64; 6],
    amp: f64,
    normal: [f64; 3],
    fronto: bool,
    mu_z: f64,
    axial: bool,
    series: bool,
    col_phase: Vec<Complex64>,
    row_phase: Vec<Complex64>,
    grazing: f64,
}

/// Largest residual phase, in radians, handed to [`cis_series`].
const SERIES_LIMIT: f64 = 0.25;

/// `exp(j x)` by Taylor series through `x^13`; below 1e-19 error for
/// `|x| <= 0.25`.
fn cis_series(x: f64) -> Complex64 {
    let x2 = x * x;
    let c = 1.0
        - x2 / 2.0
            * (1.0 - x2 / 12.0 * (1.0 - x2 / 30.0 * (1.0 - x2 / 56.0 * (1.0 - x2 / 90.0 * (1.0 - x2 / 132.0)))));
    let s = x
        * (1.0
            - x2 / 6.0
                * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0 * (1.0 - x2 / 156.0))))));
    Complex64::new(c, s)
}

impl SplatKernel {
    pub(crate) fn new(g: &HologramGaussian, grid: &FrequencyGrid, ramp: Ramp) -> Self {
        let s = g.covariance();
        let k = 2.0 * PI * PI;
        let n = g.normal();
        let lateral = !matches!(ramp, Ramp::None);
        let axial = matches!(ramp, Ramp::Full | Ramp::Matched);
        let half_lz = if axial { 0.5 * grid.wavelength * g.mu.z } else { 0.0 };
        let phases = |freqs: &[f64], m: f64, constant: Complex64| -> Vec<Complex64> {
            freqs
                .iter()
                .map(|&f| {
                    let mut cycles = frac_product(half_lz, f * f);
                    if lateral {
                        cycles -= frac_product(f, m);
                    }
                    constant * cis_cycles(cycles)
                })
                .collect()
        };
        let on_axis = match ramp {
            Ramp::Full => cis_cycles(-frac_product(g.mu.z, grid.inv_wavelength)),
            _ => Complex64::new(1.0, 0.0),
        };
        let sign = if FLIP_JACOBIAN.load(Ordering::Relaxed) { -1.0 } else { 1.0 };
        let fronto = n.x == 0.0 && n.y == 0.0 && n.z == 1.0;
        SplatKernel {
            q: [
                k * s[(0, 0)],
                k * s[(1, 1)],
                k * s[(2, 2)],
                k * s[(0, 1)],
                k * s[(0, 2)],
                k * s[(1, 2)],
            ],
            amp: sign * TAU * g.scales[0] * g.scales[1],
            normal: [n.x, n.y, n.z],
            fronto: fronto && s[(0, 2)] == 0.0 && s[(1, 2)] == 0.0 && s[(2, 2)] == 0.0,
            mu_z: g.mu.z,
            axial: axial && g.mu.z != 0.0,
            series: TAU * g.mu.z.abs() * grid.max_paraxial_residual <= SERIES_LIMIT,
            col_phase: phases(&grid.fx, g.mu.x, Complex64::new(1.0, 0.0)),
            row_phase: phases(&grid.fy, g.mu.y, on_axis),
            grazing: GRAZING_LIMIT * grid.inv_wavelength,
        }
    }

    #[inline]
    fn residual_phase(&self, psi: f64) -> Complex64 {
        if !self.axial {
            Complex64::new(1.0, 0.0)
        } else if self.series {
            cis_series(TAU * self.mu_z * psi)
        } else {
            cis_cycles(self.mu_z * psi)
        }
    }

    /// Ramp factor alone at a sample.
    pub(crate) fn ramp_at(&self, grid: &FrequencyGrid, r: usize, c: usize) -> Complex64 {
        self.row_phase[r] * self.col_phase[c] * self.residual_phase(grid.paraxial_residual[(r, c)])
    }

    /// Adds `weight * U(f)` for row `r` into `out`.
    pub(crate) fn accumulate_row(
        &self,
        grid: &FrequencyGrid,
        r: usize,
        weight: Complex64,
        out: &mut [Complex64],
    ) {
        if self.fronto {
            self.accumulate_fronto_row(grid, r, weight, out);
            return;
        }
        let [qxx, qyy, qzz, qxy, qxz, qyz] = self.q;
        let fy = grid.fy[r];
        let w_row = weight * self.amp * self.row_phase[r];
        let fz_row = grid.fz.row(r);
        let psi_row = grid.paraxial_residual.row(r);
        let m_row = grid.propagating.row(r);
        for (c, &fx) in grid.fx.iter().enumerate() {
            let fz = fz_row[c];
            let e = qxx * fx * fx
                + 2.0 * qxy * fx * fy
                + qyy * fy * fy
                + qzz * fz * fz
                + 2.0 * (qxz * fx + qyz * fy) * fz;
            if e > ENVELOPE_CUTOFF || !m_row[c] || fz < self.grazing {
                continue;
            }
            let foz = self.normal[0] * fx + self.normal[1] * fy + self.normal[2] * fz;
            if foz <= 0.0 {
                continue;
            }
            out[c] += w_row * self.col_phase[c] * self.residual_phase(psi_row[c]) * ((foz / fz) * (-e).exp());
        }
    }

    /// Fronto-parallel rows: along a row the exponent is a quadratic
    /// `a k^2 + b k + c` in the signed column index, so only the columns
    /// below the envelope cutoff are visited and the envelope is stepped by
    /// multiplication, re-anchored every [`ANCHOR_STRIDE`] samples.
    fn accumulate_fronto_row(
        &self,
        grid: &FrequencyGrid,
        r: usize,
        weight: Complex64,
        out: &mut [Complex64],
    ) {
        let [qxx, qyy, _, qxy, _, _] = self.q;
        let w = grid.fx.len();
        let fy = grid.fy[r];
        let df = if w > 1 { grid.fx[1] } else { 0.0 };
        let a = qxx * df * df;
        let b = 2.0 * qxy * fy * df;
        let c0 = qyy * fy * fy;
        let half = (w / 2) as i64;
        let (k_lo, k_hi) = if a > 0.0 {
            let disc = b * b - 4.0 * a * (c0 - ENVELOPE_CUTOFF);
            if disc < 0.0 {
                return;
            }
            let root = disc.sqrt();
            let lo = ((-b - root) / (2.0 * a)).ceil().max(-half as f64) as i64;
            let hi = ((-b + root) / (2.0 * a)).floor().min((half - 1) as f64) as i64;
            (lo, hi)
        } else if c0 <= ENVELOPE_CUTOFF {
            (-half, half - 1)
        } else {
            return;
        };
        let w_row = weight * self.amp * self.row_phase[r];
        let fz_row = grid.fz.row(r);
        let psi_row = grid.paraxial_residual.row(r);
        let m_row = grid.propagating.row(r);
        let step = (-2.0 * a).exp();
        let (mut env, mut ratio) = (0.0, 0.0);
        for k in k_lo..=k_hi {
            if (k - k_lo) % ANCHOR_STRIDE == 0 {
                let kf = k as f64;
                env = (-(a * kf * kf + b * kf + c0)).exp();
                ratio = (-(a * (2.0 * kf + 1.0) + b)).exp();
            }
            let col = if k < 0 { (k + w as i64) as usize } else { k as usize };
            if m_row[col] && fz_row[col] >= self.grazing {
                out[col] += w_row * self.col_phase[col] * self.residual_phase(psi_row[col]) * env;
            }
            env *= ratio;
            ratio *= step;
        }
    }
}

/// Samples between direct evaluations of the envelope in a fronto-parallel
/// row; bounds the accumulated rounding to roughly `ANCHOR_STRIDE^2` ulp.
const ANCHOR_STRIDE: i64 = 32;

/// Spectrum of one Gaussian with the chosen part of the phase ramp.
pub fn gaussian_spectrum_with(g: &HologramGaussian, grid: &FrequencyGrid, ramp: Ramp) -> Spectrum {
    let kernel = SplatKernel::new(g, grid, ramp);
    let mut out = Array2::zeros(grid.shape());
    let one = Complex64::new(1.0, 0.0);
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        kernel.accumulate_row(grid, r, one, row.as_slice_mut().expect("contiguous row"));
    }
    out
}

/// Spectrum of the wavefront a Gaussian sends to the SLM plane.
pub fn gaussian_spectrum(g: &HologramGaussian, grid: &FrequencyGrid) -> Spectrum {
    gaussian_spectrum_with(g, grid, Ramp::Full)
}

/// The Gaussian's wavefront sampled in its own plane (`mu_z` treated as 0).
pub fn gaussian_wavefront_at_depth(
    g: &HologramGaussian,
    grid: &FrequencyGrid,
    config: &OpticalConfig,
) -> Result<ComplexField> {
    field_from_spectrum(&gaussian_spectrum_with(g, grid, Ramp::AtDepth), config)
}

/// Isotropic fronto-parallel Gaussian of standard deviation `radius`, the
/// primitive of point-cloud holography baselines.
pub fn point_spectrum(center: Vector3<f64>, radius: f64, grid: &FrequencyGrid) -> Spectrum {
    let g = HologramGaussian::fronto_parallel(center, 0.0, [radius, radius], 1.0, 1.0, 0);
    gaussian_spectrum(&g, grid)
}

/// `exp(j 2 pi mu_z / wavelength)`: cancels the on-axis propagation phase of
/// a Gaussian at depth `mu_z` so its DC sample arrives with zero phase.
pub fn phase_match(mu_z: f64, wavelength: f64) -> Complex64 {
    cis_cycles(frac_product(mu_z, 1.0 / wavelength))
}

/// Integer sample shifts realising the reference wave direction.
pub fn reference_shift(config: &OpticalConfig) -> Result<(i64, i64)> {
    let [dx, dy, _] = config.reference_dir;
    let sx = (dx / config.wavelength / config.df_x()).round() as i64;
    let sy = (dy / config.wavelength / config.df_y()).round() as i64;
    for (s, n) in [(sx, config.width), (sy, config.height)] {
        let limit = (n / 2) as i64;
        if s.abs() >= limit {
            return Err(Error::ReferenceShift { shift: s, limit });
        }
    }
    Ok((sx, sy))
}

/// Shifts a spectrum by the reference wave's lateral frequency, rounded to
/// whole samples. Content pushed past the band edge is dropped.
pub fn apply_reference_wave(spectrum: &Spectrum, config: &OpticalConfig) -> Result<Spectrum> {
    let (sx, sy) = reference_shift(config)?;
    if sx == 0 && sy == 0 {
        return Ok(spectrum.clone());
    }
    let (h, w) = spectrum.dim();
    // centred index: 0 is the most negative frequency
    let centred = |k: usize, n: usize| ((k + n / 2) % n) as i64;
    let fft_index = |c: i64, n: usize| ((c as usize) + n - n / 2) % n;
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        let cr = centred(r, h) - sy;
        if cr < 0 || cr >= h as i64 {
            continue;
        }
        let src_r = fft_index(cr, h);
        for c in 0..w {
            let cc = centred(c, w) - sx;
            if cc < 0 || cc >= w as i64 {
                continue;
            }
            out[(r, c)] = spectrum[(src_r, fft_index(cc, w))];
        }
    }
    Ok(out)
}

/// Spherical-harmonic random-phase kernel for partially coherent
/// illumination. Frame `t` uses an independent, reproducible phase draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularKernel {
    pub l: usize,
    pub m: i64,
    pub frames: usize,
    pub seed: u64,
}

impl AngularKernel {
    /// Kernel samples `Y_l^m(wavelength f) exp(j phi)` with `phi` uniform in
    /// [-pi, pi]; zero on evanescent samples.
    pub fn sample(&self, grid: &FrequencyGrid, frame: usize) -> Result<Array2<Complex64>> {
        if self.frames == 0 || frame >= self.frames {
            return Err(Error::InvalidOption(format!(
                "frame {frame} is outside the {} configured frames",
                self.frames
            )));
        }
        crate::sh::basis_function(self.l, self.m, &Vector3::z())?;
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(frame as u64);
        let (h, w) = grid.shape();
        let mut out = Array2::zeros((h, w));
        for r in 0..h {
            for c in 0..w {
                let phi: f64 = rng.random_range(-PI..=PI);
                if !grid.propagating[(r, c)] {
                    continue;
                }
                let d = Vector3::new(grid.fx[c], grid.fy[r], grid.fz[(r, c)]) * grid.wavelength;
                let y = crate::sh::basis_function(self.l, self.m, &d.normalize())?;
                out[(r, c)] = Complex64::from_polar(y, phi);
            }
        }
        Ok(out)
    }
}

/// Circular convolution over the sample grid, `(a * b)[k] = sum_q a[q] b[k - q]`.
pub fn circular_convolve(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    if a.dim() != b.dim() {
        return Err(Error::Shape("convolution operands differ in shape".into()));
    }
    let n = (a.len() as f64).sqrt();
    let mut fa = a.clone();
    let mut fb = b.clone();
    fft2_inplace(&mut fa, false);
    fft2_inplace(&mut fb, false);
    fa.zip_mut_with(&fb, |x, y| *x *= y * n);
    fft2_inplace(&mut fa, true);
    Ok(fa)
}

/// Convolves a spectrum with frame `frame` of an angular kernel.
pub fn convolve_angular_kernel(
    spectrum: &Spectrum,
    kernel: &AngularKernel,
    frame: usize,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    circular_convolve(spectrum, &kernel.sample(grid, frame)?)
}

/// Spectrum with the kernel applied to the un-shifted Gaussian before the
/// phase ramp, so the random phase is anchored to the Gaussian itself.
pub fn gaussian_spectrum_with_kernel(
    g: &HologramGaussian,
    grid: &FrequencyGrid,
    ramp: Ramp,
    kernel_samples: &Array2<Complex64>,
) -> Result<Spectrum> {
    let base = gaussian_spectrum_with(g, grid, Ramp::None);
    let mut out = circular_convolve(&base, kernel_samples)?;
    let k = SplatKernel::new(g, grid, ramp);
    for ((r, c), v) in out.indexed_iter_mut() {
        if grid.propagating[(r, c)] {
            *v *= k.ramp_at(grid, r, c);
        } else {
            *v = Complex64::default();
        }
    }
    Ok(out)
}
