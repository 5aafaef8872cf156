//! Phase-only encoding, reconstruction and image metrics.
//!
//! The double phase amplitude coding (DPAC) writes a complex field
//! `a exp(j phi)`, `a` normalised to `[0, 1]`, as the checkerboard of
//! `phi + acos(a)` and `phi - acos(a)`. A half-band low-pass removes the
//! checkerboard carrier on reconstruction.

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::fft2_inplace;
use crate::field::{ComplexField, Domain, FrequencyGrid, OpticalConfig};
use crate::propagation::{transfer_function, PropagationOptions};

/// Largest refocus distance accepted by the simulators.
pub const MAX_SIMULATION_DEPTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHologram {
    /// Phase in `[0, 2 pi)`.
    pub phase: Array2<f64>,
    /// Maximum amplitude of the encoded field; the reconstruction is scaled
    /// back by it.
    pub amplitude_scale: f64,
    pub config: OpticalConfig,
}

pub fn dpac_encode(field: &ComplexField) -> Result<PhaseHologram> {
    field.expect_domain(Domain::Spatial)?;
    let (h, w) = field.data.dim();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("DPAC needs even dimensions, got {h}x{w}")));
    }
    let max = field.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 || !max.is_finite() {
        return Err(Error::ZeroField);
    }
    let mut phase = Array2::zeros((h, w));
    Zip::indexed(&mut phase).and(&field.data).par_for_each(|(r, c), p, v| {
        let a = (v.norm() / max).min(1.0);
        let offset = a.acos();
        let raw = if (r + c) % 2 == 0 { v.arg() + offset } else { v.arg() - offset };
        *p = wrap_phase(raw);
    });
    Ok(PhaseHologram {
        phase,
        amplitude_scale: max,
        config: field.config,
    })
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Keeps frequencies inside the ellipse with semi-axes of half the Nyquist
/// frequency along each axis.
pub fn half_band_filter(field: &ComplexField) -> Result<ComplexField> {
    field.expect_domain(Domain::Spatial)?;
    let cfg = &field.config;
    let (h, w) = cfg.shape();
    let (rx, ry) = (0.5 * cfg.nyquist_x(), 0.5 * cfg.nyquist_y());
    let freq = |k: usize, n: usize, pitch: f64| {
        let s = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        s / (n as f64 * pitch)
    };
    let mut data = field.data.clone();
    fft2_inplace(&mut data, false);
    for r in 0..h {
        let fy = freq(r, h, cfg.pitch_y) / ry;
        for c in 0..w {
            let fx = freq(c, w, cfg.pitch_x) / rx;
            if fx * fx + fy * fy > 1.0 {
                data[(r, c)] = Complex64::default();
            }
        }
    }
    fft2_inplace(&mut data, true);
    ComplexField::new(data, *cfg, Domain::Spatial)
}

/// Field displayed by the SLM after half-band filtering, rescaled to the
/// original amplitude.
pub fn reconstruct(hologram: &PhaseHologram) -> Result<ComplexField> {
    let data = hologram.phase.mapv(|p| Complex64::from_polar(1.0, p));
    let mut f = half_band_filter(&ComplexField::new(data, hologram.config, Domain::Spatial)?)?;
    let s = hologram.amplitude_scale;
    f.data.mapv_inplace(|v| v * s);
    Ok(f)
}

/// Circular aperture in the Fourier plane, in cycles per metre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pupil {
    pub center: (f64, f64),
    pub radius: f64,
}

impl Pupil {
    fn admits(&self, fx: f64, fy: f64) -> bool {
        let (dx, dy) = (fx - self.center.0, fy - self.center.1);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// Intensity `|u(z)|^2` at each requested distance from the SLM.
pub fn simulate_focal_stack(
    field: &ComplexField,
    grid: &FrequencyGrid,
    depths: &[f64],
    pupil: Option<Pupil>,
) -> Result<Vec<Array2<f64>>> {
    field.expect_domain(Domain::Spatial)?;
    if grid.shape() != field.config.shape() {
        return Err(Error::Shape("frequency grid does not match the field".into()));
    }
    if let Some(z) = depths.iter().find(|z| !(z.abs() <= MAX_SIMULATION_DEPTH)) {
        return Err(Error::InvalidOption(format!(
            "depth {z} outside +-{MAX_SIMULATION_DEPTH} m"
        )));
    }
    if let Some(p) = pupil {
        if !(p.radius > 0.0 && p.center.0.is_finite() && p.center.1.is_finite()) {
            return Err(Error::InvalidOption("pupil radius must be positive".into()));
        }
    }
    let mut spectrum = field.data.clone();
    fft2_inplace(&mut spectrum, false);
    if let Some(p) = pupil {
        for (r, &fy) in grid.fy.iter().enumerate() {
            for (c, &fx) in grid.fx.iter().enumerate() {
                if !p.admits(fx, fy) {
                    spectrum[(r, c)] = Complex64::default();
                }
            }
        }
    }
    Ok(depths
        .par_iter()
        .map(|&z| {
            let mut s = spectrum.clone();
            s *= &transfer_function(grid, z, PropagationOptions::default());
            fft2_inplace(&mut s, true);
            s.mapv(|v| v.norm_sqr())
        })
        .collect())
}

/// Focal stack of a phase-only hologram after reconstruction.
pub fn simulate_phase_focal_stack(
    hologram: &PhaseHologram,
    grid: &FrequencyGrid,
    depths: &[f64],
    pupil: Option<Pupil>,
) -> Result<Vec<Array2<f64>>> {
    simulate_focal_stack(&reconstruct(hologram)?, grid, depths, pupil)
}

/// Per pixel, the slice whose depth is nearest the depth map. Pixels
/// outside the mask are zero.
pub fn all_in_focus(
    stack: &[Array2<f64>],
    depth: &Array2<f64>,
    mask: &Array2<bool>,
    depths: &[f64],
) -> Result<Array2<f64>> {
    if stack.is_empty() || stack.len() != depths.len() {
        return Err(Error::Shape(format!(
            "{} slices for {} depths",
            stack.len(),
            depths.len()
        )));
    }
    let shape = depth.dim();
    if mask.dim() != shape || stack.iter().any(|s| s.dim() != shape) {
        return Err(Error::Shape("stack, depth map and mask differ in shape".into()));
    }
    let mut out = Array2::zeros(shape);
    Zip::indexed(&mut out)
        .and(depth)
        .and(mask)
        .for_each(|idx, o, &d, &m| {
            if !m {
                return;
            }
            let mut best = 0;
            for (k, z) in depths.iter().enumerate() {
                if (z - d).abs() < (depths[best] - d).abs() {
                    best = k;
                }
            }
            *o = stack[best][idx];
        });
    Ok(out)
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical images.
pub fn psnr(a: &Array2<f64>, b: &Array2<f64>, peak: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty images".into()));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Sum of squared forward differences along both axes.
pub fn sharpness(image: &Array2<f64>) -> f64 {
    let (h, w) = image.dim();
    let mut s = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = image[(r, c)];
            if c + 1 < w {
                s += (image[(r, c + 1)] - v).powi(2);
            }
            if r + 1 < h {
                s += (image[(r + 1, c)] - v).powi(2);
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{energy, make_frequency_grid};
    use std::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize) -> OpticalConfig {
        OpticalConfig::square(520e-9, 8e-6, n, n).unwrap()
    }

    fn uniform(n: usize, a: f64, phi: f64) -> ComplexField {
        ComplexField::spatial(Array2::from_elem((n, n), Complex64::from_polar(a, phi)), cfg(n)).unwrap()
    }

    #[test]
    fn dpac_full_amplitude_is_uniform() {
        let h = dpac_encode(&uniform(16, 2.0, 0.3)).unwrap();
        assert!(h.phase.iter().all(|&p| (p - 0.3).abs() < 1e-15));
        assert_eq!(h.amplitude_scale, 2.0);
    }

    #[test]
    fn dpac_zero_amplitude_is_a_checkerboard() {
        let mut f = uniform(8, 0.0, 0.0);
        f.data[(0, 0)] = Complex64::new(1.0, 0.0);
        let h = dpac_encode(&f).unwrap();
        for ((r, c), &p) in h.phase.indexed_iter() {
            if (r, c) == (0, 0) {
                continue;
            }
            let want = if (r + c) % 2 == 0 { PI / 2.0 } else { 1.5 * PI };
            assert!((p - want).abs() < 1e-15);
        }
    }

    #[test]
    fn dpac_rejects_zero_field_and_wraps() {
        assert!(matches!(dpac_encode(&uniform(8, 0.0, 0.0)), Err(Error::ZeroField)));
        let h = dpac_encode(&uniform(8, 0.5, -3.0)).unwrap();
        assert!(h.phase.iter().all(|&p| (0.0..TAU).contains(&p)));
        assert_eq!(wrap_phase(-1e-300), 0.0);
    }

    #[test]
    fn dpac_round_trip_smooth_field() {
        let n = 128;
        let c = cfg(n);
        let data = Array2::from_shape_fn((n, n), |(r, col)| {
            let x = c.x_at(col) / (12.0 * c.pitch_x);
            let y = c.y_at(r) / (12.0 * c.pitch_y);
            Complex64::from_polar((-(x * x + y * y) / 2.0).exp(), 0.3 * (x * x + y * y))
        });
        let f = ComplexField::spatial(data, c).unwrap();
        let rec = reconstruct(&dpac_encode(&f).unwrap()).unwrap();
        let p = psnr(&rec.intensity(), &f.intensity(), 1.0).unwrap();
        assert!(p >= 30.0, "{p}");
    }

    #[test]
    fn focal_stack_conserves_energy() {
        let n = 64;
        let c = cfg(n);
        let grid = make_frequency_grid(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = Array2::from_shape_fn((n, n), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let f = ComplexField::spatial(data, c).unwrap();
        let e = energy(&f);
        let stack = simulate_focal_stack(&f, &grid, &[0.0, 0.003, -0.02], None).unwrap();
        // evanescent samples are dropped, so compare a band-limited copy
        let mut bl = f.data.clone();
        fft2_inplace(&mut bl, false);
        Zip::from(&mut bl).and(&grid.propagating).for_each(|v, &m| if !m { *v = Complex64::default() });
        let e_bl: f64 = bl.iter().map(|v| v.norm_sqr()).sum();
        assert!(e_bl <= e * (1.0 + 1e-12));
        for s in &stack {
            assert!(((s.sum() - e_bl) / e_bl).abs() < 1e-9);
        }
        let zero = ComplexField::zeros(c, Domain::Spatial);
        for s in simulate_focal_stack(&zero, &grid, &[0.001], None).unwrap() {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        assert!(simulate_focal_stack(&f, &grid, &[0.2], None).is_err());
    }

    #[test]
    fn all_in_focus_picks_nearest_slice() {
        let a = Array2::from_elem((2, 2), 1.0);
        let b = Array2::from_elem((2, 2), 2.0);
        let depth = Array2::from_shape_vec((2, 2), vec![0.0, 0.004, 0.006, 0.01]).unwrap();
        let mut mask = Array2::from_elem((2, 2), true);
        mask[(1, 1)] = false;
        let out = all_in_focus(&[a.clone(), b.clone()], &depth, &mask, &[0.0, 0.01]).unwrap();
        assert_eq!(out, Array2::from_shape_vec((2, 2), vec![1.0, 1.0, 2.0, 0.0]).unwrap());
        let again = all_in_focus(&[out.clone(), out.clone()], &depth, &mask, &[0.0, 0.01]).unwrap();
        assert_eq!(again, out);
        assert!(all_in_focus(&[a], &depth, &mask, &[0.0, 0.01]).is_err());
    }

    #[test]
    fn psnr_reference_values() {
        let z = Array2::zeros((4, 4));
        let o = Array2::ones((4, 4));
        assert_eq!(psnr(&z, &z, 1.0).unwrap(), f64::INFINITY);
        assert!((psnr(&z, &o, 1.0).unwrap()).abs() < 1e-12);
        assert!((psnr(&z, &(o * 0.1), 1.0).unwrap() - 20.0).abs() < 1e-12);
        assert!(psnr(&z, &Array2::zeros((2, 2)), 1.0).is_err());
    }

    fn box_blur(img: &Array2<f64>) -> Array2<f64> {
        let (h, w) = img.dim();
        Array2::from_shape_fn((h, w), |(r, c)| {
            let mut s = 0.0;
            for dr in [h - 1, 0, 1] {
                for dc in [w - 1, 0, 1] {
                    s += img[((r + dr) % h, (c + dc) % w)];
                }
            }
            s / 9.0
        })
    }

    #[test]
    fn sharpness_drops_under_blur() {
        assert_eq!(sharpness(&Array2::from_elem((5, 5), 3.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let mut img = Array2::from_shape_fn((24, 24), |_| rng.random_range(0.0..1.0));
            for _ in 0..3 {
                let b = box_blur(&img);
                assert!(sharpness(&b) < sharpness(&img));
                img = b;
            }
        }
    }
}
