//! Reference computations for the acceptance checks. Nothing here calls the
//! library's spectrum, blending or FFT code.

#![allow(dead_code)]

use std::f64::consts::PI;

use gws_core::holographics::MAX_OPACITY;
use gws_core::{Complex64, HologramGaussian, OpticalConfig};
use nalgebra::{Matrix2, Vector2, Vector3};
use ndarray::Array2;
use rand::Rng;
use rustfft::FftPlanner;

pub const PITCH: f64 = 8e-6;
pub const WAVELENGTH: f64 = 520e-9;

pub fn config(n: usize) -> OpticalConfig {
    OpticalConfig::square(WAVELENGTH, PITCH, n, n).unwrap()
}

#[allow(clippy::too_many_arguments)]
pub fn gaussian_px(
    x: f64,
    y: f64,
    z: f64,
    angle: f64,
    s: [f64; 2],
    color: f64,
    opacity: f64,
    id: usize,
) -> HologramGaussian {
    HologramGaussian::fronto_parallel(
        Vector3::new(x * PITCH, y * PITCH, z),
        angle,
        [s[0] * PITCH, s[1] * PITCH],
        color,
        opacity,
        id,
    )
}

/// Random fronto-parallel Gaussians sorted front to back. Centres stay
/// `margin` standard deviations inside the grid.
pub fn random_scene(
    rng: &mut impl Rng,
    n: usize,
    grid: usize,
    sigma: (f64, f64),
    depth: (f64, f64),
    margin: f64,
) -> Vec<HologramGaussian> {
    let half = grid as f64 / 2.0;
    let mut v: Vec<HologramGaussian> = (0..n)
        .map(|i| {
            let s = [rng.random_range(sigma.0..sigma.1), rng.random_range(sigma.0..sigma.1)];
            let reach = (half - margin * s[0].max(s[1])).max(1.0);
            gaussian_px(
                rng.random_range(-reach..reach),
                rng.random_range(-reach..reach),
                rng.random_range(depth.0..depth.1),
                rng.random_range(0.0..PI),
                s,
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..0.95),
                i,
            )
        })
        .collect();
    v.sort_by(|a, b| a.mu.z.total_cmp(&b.mu.z));
    v
}

fn inverse_cov_2d(g: &HologramGaussian) -> Matrix2<f64> {
    let r = g.rotation;
    let r2 = Matrix2::new(r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]);
    let s = Matrix2::new(g.scales[0].powi(2), 0.0, 0.0, g.scales[1].powi(2));
    (r2 * s * r2.transpose()).try_inverse().unwrap()
}

/// Unit-peak Gaussian footprint sampled on the pixel grid of a
/// fronto-parallel Gaussian.
pub fn raster(g: &HologramGaussian, cfg: &OpticalConfig) -> Array2<f64> {
    let inv = inverse_cov_2d(g);
    Array2::from_shape_fn((cfg.height, cfg.width), |(r, c)| {
        let d = Vector2::new(
            (c as f64 - (cfg.width / 2) as f64) * cfg.pitch_x - g.mu.x,
            (r as f64 - (cfg.height / 2) as f64) * cfg.pitch_y - g.mu.y,
        );
        (-0.5 * (d.transpose() * inv * d)[(0, 0)]).exp()
    })
}

fn signed(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Riemann-sum Fourier transform `px py sum_x g(x) exp(-j 2 pi f x)` of a
/// sampled image, in FFT frequency order.
pub fn continuous_spectrum(img: &Array2<f64>, cfg: &OpticalConfig) -> Array2<Complex64> {
    let (h, w) = img.dim();
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut data: Vec<Complex64> = img.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for row in data.chunks_mut(w) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::default(); h];
    for c in 0..w {
        for r in 0..h {
            col[r] = data[r * w + c];
        }
        col_fft.process(&mut col);
        for r in 0..h {
            data[r * w + c] = col[r];
        }
    }
    // the grid origin sits at index n/2, which flips every other sample
    Array2::from_shape_fn((h, w), |(r, c)| {
        let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
        data[r * w + c] * (sign * cfg.pitch_x * cfg.pitch_y)
    })
}

/// `exp(-j 2 pi fz z)` on propagating samples, straight from the
/// dispersion relation.
pub fn back_propagator(cfg: &OpticalConfig, z: f64) -> Array2<Complex64> {
    let k = 1.0 / cfg.wavelength;
    Array2::from_shape_fn((cfg.height, cfg.width), |(r, c)| {
        let fx = signed(c, cfg.width) / (cfg.width as f64 * cfg.pitch_x);
        let fy = signed(r, cfg.height) / (cfg.height as f64 * cfg.pitch_y);
        let q = k * k - fx * fx - fy * fy;
        if q <= 0.0 {
            return Complex64::default();
        }
        Complex64::from_polar(1.0, -2.0 * PI * q.sqrt() * z)
    })
}

/// Per-pixel front-to-back compositing with no cutoff radius.
pub fn brute_composite(gs: &[HologramGaussian], cfg: &OpticalConfig, t_eps: f64) -> Array2<f64> {
    let rasters: Vec<Array2<f64>> = gs.iter().map(|g| raster(g, cfg)).collect();
    Array2::from_shape_fn((cfg.height, cfg.width), |(r, c)| {
        let mut t = 1.0;
        let mut out = 0.0;
        for (g, img) in gs.iter().zip(&rasters) {
            let w = g.opacity * img[(r, c)];
            out += g.color * w * t;
            let a = if w < t_eps { 0.0 } else { w.min(MAX_OPACITY) };
            t *= 1.0 - a;
        }
        out
    })
}

pub fn rel_l2(a: &Array2<Complex64>, reference: &Array2<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn centroid(img: &Array2<f64>) -> (f64, f64) {
    let (mut sx, mut sy, mut s) = (0.0, 0.0, 0.0);
    for ((r, c), &v) in img.indexed_iter() {
        sx += c as f64 * v;
        sy += r as f64 * v;
        s += v;
    }
    (sx / s, sy / s)
}

