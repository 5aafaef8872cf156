//! Compositing per-Gaussian wavefronts into the SLM field.
//!
//! * [`exact_blend`] walks the Gaussians front to back. Each wavefront is
//!   sampled in its own plane, attenuated by the transmittance accumulated so
//!   far, and propagated back to the SLM.
//! * [`fast_blend`] drops the transmittance and sums closed-form spectra.
//! * [`silhouette_blend`] walks back to front, masking the propagated rear
//!   field by each Gaussian's opacity before adding its own wavefront.
//!
//! Every path removes the on-axis propagation phase of each Gaussian, so the
//! DC sample of a single Gaussian's contribution is real and positive.

use std::sync::Arc;

use log::warn;
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{
    field_from_spectrum, field_from_spectrum_inplace, make_frequency_grid, spectrum_of_array_inplace,
    spectrum_of_field, ComplexField, Domain, FrequencyGrid, OpticalConfig, Spectrum,
};
use crate::holographics::{transform_scene, HologramGaussian};
use crate::propagation::TransferCache;
use crate::ray_reference::gated_alpha;
use crate::scene::{SceneConfig, WorldGaussian};
use crate::spectrum::{apply_reference_wave, gaussian_spectrum_with, gaussian_spectrum_with_kernel, AngularKernel, Ramp, SplatKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlendMode {
    Exact,
    Fast,
    Silhouette,
    /// Fast blending of isotropic point primitives.
    NaivePoint,
    /// Exact blending of point primitives with binarized visibility.
    PointDisk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendOptions {
    pub t_eps: f64,
    pub binarize_threshold: Option<f64>,
    /// Track `c o T |u|` in the Gaussians' planes with no phase and no
    /// propagation. Used to compare against ray compositing.
    pub amplitude_only: bool,
    pub mode: BlendMode,
    /// Random-phase angular kernel and the frame to draw.
    pub kernel: Option<(AngularKernel, usize)>,
}

impl Default for BlendOptions {
    fn default() -> Self {
        BlendOptions {
            t_eps: 1.0 / 255.0,
            binarize_threshold: None,
            amplitude_only: false,
            mode: BlendMode::Exact,
            kernel: None,
        }
    }
}

impl BlendOptions {
    pub fn with_mode(mode: BlendMode) -> Self {
        BlendOptions {
            mode,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_eps >= 0.0 && self.t_eps < 1.0) {
            return Err(Error::InvalidOption(format!("t_eps {} outside [0, 1)", self.t_eps)));
        }
        if let Some(t) = self.binarize_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidOption(format!("binarize threshold {t} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Grid, frequency coordinates and cached transfer functions for one channel.
pub struct BlendContext {
    pub config: OpticalConfig,
    pub grid: Arc<FrequencyGrid>,
    cache: TransferCache,
}

const CACHE_ENTRIES: usize = 32;

impl BlendContext {
    pub fn new(config: OpticalConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(make_frequency_grid(&config));
        Ok(BlendContext {
            config,
            cache: TransferCache::new(Arc::clone(&grid), CACHE_ENTRIES),
            grid,
        })
    }

    fn zero_field(&self) -> ComplexField {
        ComplexField::zeros(self.config, Domain::Spatial)
    }
}

fn wavefront_spectrum(
    g: &HologramGaussian,
    ctx: &BlendContext,
    ramp: Ramp,
    kernel: Option<&Array2<Complex64>>,
) -> Result<Spectrum> {
    match kernel {
        Some(k) => gaussian_spectrum_with_kernel(g, &ctx.grid, ramp, k),
        None => Ok(gaussian_spectrum_with(g, &ctx.grid, ramp)),
    }
}

fn kernel_samples(ctx: &BlendContext, opts: &BlendOptions) -> Result<Option<Array2<Complex64>>> {
    opts.kernel
        .map(|(k, frame)| k.sample(&ctx.grid, frame))
        .transpose()
}

fn check_order(gaussians: &[HologramGaussian], descending: bool) -> Result<()> {
    for (i, w) in gaussians.windows(2).enumerate() {
        let bad = if descending { w[1].mu.z > w[0].mu.z } else { w[1].mu.z < w[0].mu.z };
        if bad {
            return Err(Error::Unsorted {
                index: i + 1,
                depth: w[1].mu.z,
                previous: w[0].mu.z,
            });
        }
    }
    Ok(())
}

/// Alpha wave blending. Input sorted by ascending depth.
pub fn exact_blend(
    gaussians: &[HologramGaussian],
    ctx: &BlendContext,
    opts: &BlendOptions,
) -> Result<ComplexField> {
    opts.validate()?;
    check_order(gaussians, false)?;
    if gaussians.is_empty() {
        warn!("exact blend called with no Gaussians");
        return Ok(ctx.zero_field());
    }
    let config = &ctx.config;
    let kernel = kernel_samples(ctx, opts)?;
    let mut transmittance = Array2::<f64>::ones(config.shape());
    let mut acc = Array2::<Complex64>::zeros(config.shape());
    for g in gaussians {
        let mut u = wavefront_spectrum(g, ctx, Ramp::AtDepth, kernel.as_ref())?;
        field_from_spectrum_inplace(&mut u, config)?;
        let weight = g.color * g.opacity;
        let (o, t_eps, bin) = (g.opacity, opts.t_eps, opts.binarize_threshold);
        if opts.amplitude_only {
            Zip::from(&mut acc)
                .and(&u)
                .and(&mut transmittance)
                .par_for_each(|a, v, t| {
                    let m = v.norm();
                    a.re += weight * *t * m;
                    *t *= 1.0 - gated_alpha(o * m, t_eps, bin);
                });
            continue;
        }
        Zip::from(&mut u).and(&mut transmittance).par_for_each(|v, t| {
            let alpha = gated_alpha(o * v.norm(), t_eps, bin);
            *v *= weight * *t;
            *t *= 1.0 - alpha;
        });
        spectrum_of_array_inplace(&mut u, config);
        let h = ctx.cache.matched_back(g.mu.z);
        Zip::from(&mut acc)
            .and(&u)
            .and(&*h)
            .par_for_each(|a, &v, &hv| *a += v * hv);
    }
    if opts.amplitude_only {
        return ComplexField::new(acc, *config, Domain::Spatial);
    }
    field_from_spectrum_inplace(&mut acc, config)?;
    ComplexField::new(acc, *config, Domain::Spatial)
}

/// Sum of phase-matched spectra with no occlusion. Order-independent: rows
/// are summed in order of Gaussian id.
pub fn fast_blend_spectrum(
    gaussians: &[HologramGaussian],
    ctx: &BlendContext,
    opts: &BlendOptions,
) -> Result<Spectrum> {
    let grid = &*ctx.grid;
    let mut order: Vec<&HologramGaussian> = gaussians.iter().collect();
    order.sort_by_key(|g| g.id);
    let mut acc = Array2::<Complex64>::zeros(grid.shape());
    if let Some(k) = kernel_samples(ctx, opts)? {
        for g in order {
            let s = gaussian_spectrum_with_kernel(g, grid, Ramp::Matched, &k)?;
            let weight = g.color * g.opacity;
            acc.zip_mut_with(&s, |a, v| *a += v * weight);
        }
        return Ok(acc);
    }
    let kernels: Vec<(SplatKernel, Complex64)> = order
        .par_iter()
        .map(|g| {
            (
                SplatKernel::new(g, grid, Ramp::Matched),
                Complex64::new(g.color * g.opacity, 0.0),
            )
        })
        .collect();
    acc.axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(r, mut row)| {
            let out = row.as_slice_mut().expect("contiguous row");
            for (k, w) in &kernels {
                k.accumulate_row(grid, r, *w, out);
            }
        });
    Ok(acc)
}

pub fn fast_blend(
    gaussians: &[HologramGaussian],
    ctx: &BlendContext,
    opts: &BlendOptions,
) -> Result<ComplexField> {
    opts.validate()?;
    if gaussians.is_empty() {
        warn!("fast blend called with no Gaussians");
        return Ok(ctx.zero_field());
    }
    let acc = fast_blend_spectrum(gaussians, ctx, opts)?;
    field_from_spectrum(&acc, &ctx.config)
}

/// Silhouette masking. Input sorted by descending depth (farthest first).
pub fn silhouette_blend(
    gaussians: &[HologramGaussian],
    ctx: &BlendContext,
    opts: &BlendOptions,
) -> Result<ComplexField> {
    opts.validate()?;
    check_order(gaussians, true)?;
    if gaussians.is_empty() {
        warn!("silhouette blend called with no Gaussians");
        return Ok(ctx.zero_field());
    }
    let config = &ctx.config;
    let kernel = kernel_samples(ctx, opts)?;
    let mut acc = Array2::<Complex64>::zeros(config.shape());
    for (k, g) in gaussians.iter().enumerate() {
        let h = ctx.cache.matched_back(g.mu.z);
        let mut rear = if k == 0 {
            None
        } else {
            let mut r = acc.clone();
            Zip::from(&mut r).and(&*h).par_for_each(|v, &hv| *v *= hv.conj());
            field_from_spectrum_inplace(&mut r, config)?;
            Some(r)
        };
        let mut u = wavefront_spectrum(g, ctx, Ramp::AtDepth, kernel.as_ref())?;
        field_from_spectrum_inplace(&mut u, config)?;
        let weight = g.color * g.opacity;
        let (o, t_eps, bin) = (g.opacity, opts.t_eps, opts.binarize_threshold);
        match rear.as_mut() {
            Some(r) => Zip::from(&mut u).and(r).par_for_each(|v, rv| {
                let alpha = gated_alpha(o * v.norm(), t_eps, bin);
                *v = *rv * (1.0 - alpha) + *v * weight;
            }),
            None => u.par_mapv_inplace(|v| v * weight),
        }
        spectrum_of_array_inplace(&mut u, config);
        Zip::from(&mut u).and(&*h).par_for_each(|v, &hv| *v *= hv);
        acc = u;
    }
    field_from_spectrum_inplace(&mut acc, config)?;
    ComplexField::new(acc, *config, Domain::Spatial)
}

/// Dispatches on `opts.mode`. Exact and fast inputs must be sorted front to
/// back; silhouette input is reversed internally.
pub fn blend(
    gaussians: &[HologramGaussian],
    ctx: &BlendContext,
    opts: &BlendOptions,
) -> Result<ComplexField> {
    match opts.mode {
        BlendMode::Exact => exact_blend(gaussians, ctx, opts),
        BlendMode::Fast => fast_blend(gaussians, ctx, opts),
        BlendMode::Silhouette => {
            let rev: Vec<HologramGaussian> = gaussians.iter().rev().cloned().collect();
            silhouette_blend(&rev, ctx, opts)
        }
        BlendMode::NaivePoint | BlendMode::PointDisk => {
            Err(Error::InvalidOption("point modes need the scene's point radius; use blend_scene".into()))
        }
    }
}

/// Replaces each Gaussian with an isotropic point of standard deviation
/// `radius` at its centre.
pub fn as_points(gaussians: &[HologramGaussian], radius: f64) -> Vec<HologramGaussian> {
    gaussians
        .iter()
        .map(|g| HologramGaussian::fronto_parallel(g.mu, 0.0, [radius, radius], g.color, g.opacity, g.id))
        .collect()
}

/// Runs the hologram-space transform and the chosen blend for every
/// configured channel, then applies the reference wave.
pub fn blend_scene(
    gaussians: &[WorldGaussian],
    scene: &SceneConfig,
    opts: &BlendOptions,
) -> Result<Vec<ComplexField>> {
    (0..scene.channels.len())
        .map(|ch| blend_scene_channel(gaussians, scene, ch, opts))
        .collect()
}

pub fn blend_scene_channel(
    gaussians: &[WorldGaussian],
    scene: &SceneConfig,
    channel: usize,
    opts: &BlendOptions,
) -> Result<ComplexField> {
    let config = *scene.channel(channel)?;
    let ctx = BlendContext::new(config)?;
    let hologram = match transform_scene(gaussians, scene, channel) {
        Ok((h, _stats)) => h,
        Err(Error::EmptyScene) => {
            warn!("channel {channel}: no visible Gaussians, writing a zero field");
            return Ok(ctx.zero_field());
        }
        Err(e) => return Err(e),
    };
    let radius = scene.point_radius.unwrap_or(config.pitch_x.max(config.pitch_y));
    let field = match opts.mode {
        BlendMode::NaivePoint => fast_blend(&as_points(&hologram, radius), &ctx, opts)?,
        BlendMode::PointDisk => {
            let o = BlendOptions {
                binarize_threshold: Some(opts.binarize_threshold.or(scene.binarize_threshold).unwrap_or(0.5)),
                ..*opts
            };
            exact_blend(&as_points(&hologram, radius), &ctx, &o)?
        }
        _ => blend(&hologram, &ctx, opts)?,
    };
    if config.reference_dir[0] == 0.0 && config.reference_dir[1] == 0.0 {
        return Ok(field);
    }
    let spectrum = apply_reference_wave(&spectrum_of_field(&field)?, &config)?;
    field_from_spectrum(&spectrum, &config)
}
