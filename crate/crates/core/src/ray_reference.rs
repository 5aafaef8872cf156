//! Ray-space reference renderer on the SLM grid.
//!
//! Each pixel casts a ray along +z. A Gaussian is evaluated in its local
//! frame at the ray/plane intersection. Compositing is front to back:
//! a Gaussian adds `c o G T` to the pixel and then multiplies the
//! transmittance by `1 - alpha`, where `alpha = o G` is zeroed below `t_eps`
//! and clamped below one. This is the same bookkeeping the alpha wave
//! blending applies to wavefronts.

use nalgebra::Vector3;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::OpticalConfig;
use crate::holographics::{HologramGaussian, MAX_OPACITY};

pub use crate::sh::sh_eval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterOptions {
    pub t_eps: f64,
    /// Mahalanobis radius beyond which a Gaussian is treated as zero.
    /// `None` evaluates every Gaussian everywhere.
    pub cutoff_sigma: Option<f64>,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            t_eps: 1.0 / 255.0,
            cutoff_sigma: Some(3.0),
        }
    }
}

/// Opacity-weighted alpha with the thresholds shared by every compositor.
pub fn gated_alpha(alpha: f64, t_eps: f64, binarize: Option<f64>) -> f64 {
    let a = if alpha < t_eps { 0.0 } else { alpha };
    let a = match binarize {
        Some(t) => {
            if a > t {
                1.0
            } else {
                0.0
            }
        }
        None => a,
    };
    a.min(MAX_OPACITY)
}

struct Footprint {
    mu: Vector3<f64>,
    rt: nalgebra::Matrix3<f64>,
    n: Vector3<f64>,
    inv_s: [f64; 2],
    cols: (usize, usize),
    rows: (usize, usize),
}

impl Footprint {
    fn new(g: &HologramGaussian, config: &OpticalConfig, cutoff: Option<f64>) -> Option<Self> {
        let n = g.normal();
        if n.z.abs() < 1e-12 {
            return None;
        }
        let (cols, rows) = match cutoff {
            None => ((0, config.width), (0, config.height)),
            Some(k) => {
                let r = &g.rotation;
                let ex = k * ((r[(0, 0)] * g.scales[0]).powi(2) + (r[(0, 1)] * g.scales[1]).powi(2)).sqrt();
                let ey = k * ((r[(1, 0)] * g.scales[0]).powi(2) + (r[(1, 1)] * g.scales[1]).powi(2)).sqrt();
                let span = |centre: f64, extent: f64, pitch: f64, n: usize| {
                    let lo = ((centre - extent) / pitch + (n / 2) as f64).floor().max(0.0) as usize;
                    let hi = ((centre + extent) / pitch + (n / 2) as f64).ceil() + 1.0;
                    (lo.min(n), (hi.max(0.0) as usize).min(n))
                };
                (
                    span(g.mu.x, ex, config.pitch_x, config.width),
                    span(g.mu.y, ey, config.pitch_y, config.height),
                )
            }
        };
        Some(Footprint {
            mu: g.mu,
            rt: g.rotation.transpose(),
            n,
            inv_s: [1.0 / g.scales[0], 1.0 / g.scales[1]],
            cols,
            rows,
        })
    }

    /// Squared Mahalanobis radius and depth where the ray at `(x, y)` meets
    /// the Gaussian's plane.
    fn hit(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.mu.x;
        let dy = y - self.mu.y;
        let dz = -(self.n.x * dx + self.n.y * dy) / self.n.z;
        let local = self.rt * Vector3::new(dx, dy, dz);
        let u = local.x * self.inv_s[0];
        let v = local.y * self.inv_s[1];
        (u * u + v * v, self.mu.z + dz)
    }
}

fn check_front_to_back(gaussians: &[HologramGaussian]) -> Result<()> {
    for (i, w) in gaussians.windows(2).enumerate() {
        if w[1].mu.z < w[0].mu.z {
            return Err(Error::Unsorted {
                index: i + 1,
                depth: w[1].mu.z,
                previous: w[0].mu.z,
            });
        }
    }
    Ok(())
}

struct Composite {
    color: Array2<f64>,
    depth_sum: Array2<f64>,
    weight_sum: Array2<f64>,
    transmittance: Array2<f64>,
}

fn composite(
    gaussians: &[HologramGaussian],
    config: &OpticalConfig,
    opts: RasterOptions,
) -> Result<Composite> {
    check_front_to_back(gaussians)?;
    let shape = config.shape();
    let mut out = Composite {
        color: Array2::zeros(shape),
        depth_sum: Array2::zeros(shape),
        weight_sum: Array2::zeros(shape),
        transmittance: Array2::ones(shape),
    };
    let cut2 = opts.cutoff_sigma.map(|k| k * k);
    for g in gaussians {
        let Some(fp) = Footprint::new(g, config, opts.cutoff_sigma) else {
            continue;
        };
        for r in fp.rows.0..fp.rows.1 {
            let y = config.y_at(r);
            for c in fp.cols.0..fp.cols.1 {
                let (m2, depth) = fp.hit(config.x_at(c), y);
                if cut2.is_some_and(|k2| m2 > k2) {
                    continue;
                }
                let w = g.opacity * (-0.5 * m2).exp();
                let t = out.transmittance[(r, c)];
                out.color[(r, c)] += g.color * w * t;
                let a = gated_alpha(w, opts.t_eps, None);
                out.depth_sum[(r, c)] += depth * a * t;
                out.weight_sum[(r, c)] += a * t;
                out.transmittance[(r, c)] = t * (1.0 - a);
            }
        }
    }
    Ok(out)
}

/// Front-to-back alpha compositing. Input must be sorted by ascending depth.
pub fn render_composite(
    gaussians: &[HologramGaussian],
    config: &OpticalConfig,
    opts: RasterOptions,
) -> Result<Array2<f64>> {
    Ok(composite(gaussians, config, opts)?.color)
}

/// Order-independent sum `sum_i c_i o_i G_i`.
pub fn render_oit(
    gaussians: &[HologramGaussian],
    config: &OpticalConfig,
    opts: RasterOptions,
) -> Array2<f64> {
    let mut out = Array2::zeros(config.shape());
    let cut2 = opts.cutoff_sigma.map(|k| k * k);
    let mut order: Vec<&HologramGaussian> = gaussians.iter().collect();
    order.sort_by_key(|g| g.id);
    for g in order {
        let Some(fp) = Footprint::new(g, config, opts.cutoff_sigma) else {
            continue;
        };
        for r in fp.rows.0..fp.rows.1 {
            let y = config.y_at(r);
            for c in fp.cols.0..fp.cols.1 {
                let (m2, _) = fp.hit(config.x_at(c), y);
                if cut2.is_some_and(|k2| m2 > k2) {
                    continue;
                }
                out[(r, c)] += g.color * g.opacity * (-0.5 * m2).exp();
            }
        }
    }
    out
}

/// Transmittance-weighted mean depth and a validity mask that is false where
/// the accumulated alpha stays below one half.
pub fn render_depth(
    gaussians: &[HologramGaussian],
    config: &OpticalConfig,
    opts: RasterOptions,
) -> Result<(Array2<f64>, Array2<bool>)> {
    let c = composite(gaussians, config, opts)?;
    let mut depth = Array2::zeros(config.shape());
    let mut mask = Array2::from_elem(config.shape(), false);
    for ((idx, d), m) in depth.indexed_iter_mut().zip(mask.iter_mut()) {
        let w = c.weight_sum[idx];
        if w > 0.0 {
            *d = c.depth_sum[idx] / w;
        }
        *m = 1.0 - c.transmittance[idx] >= 0.5;
    }
    Ok((depth, mask))
}
