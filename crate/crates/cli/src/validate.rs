//! Oracle suites. The reference computations here (direct DFT, per-pixel
//! compositing, dispersion relation) do not go through the library's
//! spectrum or FFT code.

use std::f64::consts::PI;
use std::time::Instant;

use clap::ValueEnum;
use gws_core::blending::{exact_blend, fast_blend, silhouette_blend, BlendContext, BlendMode, BlendOptions};
use gws_core::encode::{dpac_encode, psnr, reconstruct};
use gws_core::field::{energy, make_frequency_grid};
use gws_core::holographics::MAX_OPACITY;
use gws_core::propagation::{propagate, transfer_function, PropagationOptions};
use gws_core::spectrum::gaussian_spectrum;
use gws_core::{Complex64, ComplexField, HologramGaussian, OpticalConfig};
use nalgebra::Vector3;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Spectrum,
    Blend,
    Propagation,
    Dpac,
}

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
}

#[derive(Serialize)]
struct Check {
    suite: &'static str,
    name: &'static str,
    measured: f64,
    threshold: f64,
    /// `max`: measured must not exceed the threshold; `min`: must reach it.
    bound: &'static str,
    passed: bool,
    /// Reported for information; does not affect the overall result.
    informational: bool,
    seconds: f64,
}

#[derive(Serialize)]
struct Report {
    tool: &'static str,
    version: &'static str,
    suite: Suite,
    passed: bool,
    checks: Vec<Check>,
}

struct Recorder {
    suite: &'static str,
    start: Instant,
    checks: Vec<Check>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Recorder {
            suite,
            start: Instant::now(),
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: &'static str, measured: f64, threshold: f64, bound: &'static str, informational: bool) {
        let passed = match bound {
            "max" => measured <= threshold,
            _ => measured >= threshold,
        };
        self.checks.push(Check {
            suite: self.suite,
            name,
            measured,
            threshold,
            bound,
            passed,
            informational,
            seconds: self.start.elapsed().as_secs_f64(),
        });
        self.start = Instant::now();
    }

    fn at_most(&mut self, name: &'static str, measured: f64, threshold: f64) {
        self.push(name, measured, threshold, "max", false);
    }

    fn at_least(&mut self, name: &'static str, measured: f64, threshold: f64) {
        self.push(name, measured, threshold, "min", false);
    }
}

const PITCH: f64 = 8e-6;
const WAVELENGTH: f64 = 520e-9;

fn config(n: usize) -> OpticalConfig {
    OpticalConfig::square(WAVELENGTH, PITCH, n, n).expect("valid configuration")
}

fn signed(k: usize, n: usize) -> f64 {
    if k < n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn frequency(k: usize, n: usize) -> f64 {
    signed(k, n) / (n as f64 * PITCH)
}

fn coordinate(k: usize, n: usize) -> f64 {
    (k as f64 - (n / 2) as f64) * PITCH
}

fn rel_l2(a: &Array2<Complex64>, reference: &Array2<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Random fronto-parallel Gaussians sorted by depth; sizes in pixels.
fn random_scene(rng: &mut ChaCha8Rng, count: usize, n: usize, sigma: (f64, f64), depth: (f64, f64)) -> Vec<HologramGaussian> {
    let half = n as f64 / 2.0;
    let mut v: Vec<_> = (0..count)
        .map(|i| {
            let s = [rng.random_range(sigma.0..sigma.1), rng.random_range(sigma.0..sigma.1)];
            let reach = (half - 7.0 * s[0].max(s[1])).max(1.0);
            HologramGaussian::fronto_parallel(
                Vector3::new(
                    rng.random_range(-reach..reach) * PITCH,
                    rng.random_range(-reach..reach) * PITCH,
                    rng.random_range(depth.0..depth.1),
                ),
                rng.random_range(0.0..PI),
                [s[0] * PITCH, s[1] * PITCH],
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..0.95),
                i,
            )
        })
        .collect();
    v.sort_by(|a, b| a.mu.z.total_cmp(&b.mu.z));
    v
}

/// Unit-peak footprint of a fronto-parallel Gaussian on the pixel grid.
fn footprint(g: &HologramGaussian, n: usize) -> Array2<f64> {
    let rot = g.rotation;
    Array2::from_shape_fn((n, n), |(r, c)| {
        let dx = coordinate(c, n) - g.mu.x;
        let dy = coordinate(r, n) - g.mu.y;
        let u = (rot[(0, 0)] * dx + rot[(1, 0)] * dy) / g.scales[0];
        let v = (rot[(0, 1)] * dx + rot[(1, 1)] * dy) / g.scales[1];
        (-0.5 * (u * u + v * v)).exp()
    })
}

/// `px py sum_x g(x) exp(-j 2 pi f x)` by direct summation, one axis at a time.
fn direct_spectrum(img: &Array2<f64>) -> Array2<Complex64> {
    let n = img.nrows();
    let kernel = Array2::from_shape_fn((n, n), |(k, x)| {
        Complex64::from_polar(1.0, -2.0 * PI * frequency(k, n) * coordinate(x, n))
    });
    let rows = img.mapv(|v| Complex64::new(v, 0.0)).dot(&kernel.t());
    kernel.dot(&rows) * (PITCH * PITCH)
}

fn spectrum_suite(rec: &mut Recorder) {
    let n = 64;
    let grid = make_frequency_grid(&config(n));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for g in random_scene(&mut rng, 8, n, (2.5, 4.0), (0.0, 0.005)) {
        let mut oracle = direct_spectrum(&footprint(&g, n));
        for ((r, c), v) in oracle.indexed_iter_mut() {
            let (fx, fy) = (frequency(c, n), frequency(r, n));
            let fz = (WAVELENGTH.powi(-2) - fx * fx - fy * fy).sqrt();
            *v *= Complex64::from_polar(1.0, -2.0 * PI * fz * g.mu.z);
        }
        worst = worst.max(rel_l2(&gaussian_spectrum(&g, &grid), &oracle));
    }
    rec.at_most("closed_form_vs_direct_dft", worst, 1e-2);
}

/// Front-to-back compositing of `c o G` per pixel with gated opacity.
fn brute_composite(gs: &[HologramGaussian], n: usize, t_eps: f64) -> Array2<f64> {
    let prints: Vec<_> = gs.iter().map(|g| footprint(g, n)).collect();
    Array2::from_shape_fn((n, n), |idx| {
        let (mut t, mut out) = (1.0, 0.0);
        for (g, p) in gs.iter().zip(&prints) {
            let w = g.opacity * p[idx];
            out += g.color * w * t;
            t *= 1.0 - if w < t_eps { 0.0 } else { w.min(MAX_OPACITY) };
        }
        out
    })
}

fn blend_suite(rec: &mut Recorder) {
    let n = 96;
    let cfg = config(n);
    let ctx = BlendContext::new(cfg).expect("valid configuration");
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    let scene = random_scene(&mut rng, 15, n, (2.5, 4.0), (0.0, 0.01));
    let opts = BlendOptions {
        amplitude_only: true,
        ..Default::default()
    };
    let wave = exact_blend(&scene, &ctx, &opts).expect("sorted scene");
    let brute = brute_composite(&scene, n, opts.t_eps);
    let worst = wave
        .data
        .iter()
        .zip(&brute)
        .map(|(w, b)| (w.re - b).abs().max(w.im.abs()))
        .fold(0.0, f64::max);
    rec.at_most("exact_amplitude_vs_compositing", worst, 1e-6);

    let binary = BlendOptions {
        binarize_threshold: Some(0.5),
        ..Default::default()
    };
    let opaque: Vec<_> = random_scene(&mut rng, 12, n, (2.5, 5.0), (0.0, 0.01))
        .into_iter()
        .map(|g| HologramGaussian {
            opacity: MAX_OPACITY,
            ..g
        })
        .collect();
    let silhouette_error = |s: &[HologramGaussian]| {
        let exact = exact_blend(s, &ctx, &binary).expect("sorted scene");
        let rev: Vec<_> = s.iter().rev().cloned().collect();
        let sil = silhouette_blend(&rev, &ctx, &binary).expect("reverse-sorted scene");
        rel_l2(&sil.data, &exact.data)
    };
    let coplanar: Vec<_> = opaque
        .iter()
        .map(|g| {
            let mut h = g.clone();
            h.mu.z = 0.004;
            h
        })
        .collect();
    rec.at_most("silhouette_vs_exact_binarized_coplanar", silhouette_error(&coplanar), 1e-6);
    // masks applied at different depths do not commute with propagation
    rec.push("silhouette_vs_exact_binarized_layered", silhouette_error(&opaque), 1e-6, "max", true);

    let base = random_scene(&mut rng, 20, n, (3.0, 6.0), (0.0, 0.01));
    let diff = |eps: f64| {
        let s: Vec<_> = base
            .iter()
            .map(|g| HologramGaussian {
                opacity: g.opacity * eps,
                ..g.clone()
            })
            .collect();
        let e = exact_blend(&s, &ctx, &BlendOptions::default()).expect("sorted scene");
        let f = fast_blend(&s, &ctx, &BlendOptions::with_mode(BlendMode::Fast)).expect("scene");
        rel_l2(&f.data, &e.data)
    };
    let d: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| diff(e)).collect();
    let (r1, r2) = (d[1] / d[0], d[2] / d[1]);
    rec.at_least("fast_to_exact_ratio_min", r1.min(r2), 0.3);
    rec.at_most("fast_to_exact_ratio_max", r1.max(r2), 0.7);
}

fn propagation_suite(rec: &mut Recorder) {
    let n = 512;
    let cfg = config(n);
    let grid = make_frequency_grid(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let z = 0.0037;
    let h = transfer_function(&grid, z, PropagationOptions::default());
    let oracle = Array2::from_shape_fn((n, n), |(r, c)| {
        let (fx, fy) = (frequency(c, n), frequency(r, n));
        Complex64::from_polar(1.0, 2.0 * PI * (WAVELENGTH.powi(-2) - fx * fx - fy * fy).sqrt() * z)
    });
    let worst = h.iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    rec.at_most("transfer_vs_dispersion_relation", worst, 1e-9);

    let data = Array2::from_shape_fn((n, n), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let u = ComplexField::spatial(data, cfg).expect("shape matches");
    let e0 = energy(&u);
    let o = PropagationOptions::default();
    let (mut drift, mut comp): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let z1 = rng.random_range(-0.01..0.01);
        let z2 = rng.random_range(-0.01..0.01);
        let a = propagate(&u, &grid, z1, o).expect("grid matches");
        drift = drift.max((energy(&a) - e0).abs() / e0);
        let ab = propagate(&a, &grid, z2, o).expect("grid matches");
        let direct = propagate(&u, &grid, z1 + z2, o).expect("grid matches");
        let diff: f64 = ab.data.iter().zip(&direct.data).map(|(x, y)| (x - y).norm_sqr()).sum();
        comp = comp.max((diff / e0).sqrt());
    }
    rec.at_most("energy_drift", drift, 1e-9);
    rec.at_most("composition_error", comp, 1e-10);
}

fn dpac_suite(rec: &mut Recorder) {
    let cfg = config(64);
    let uniform = |a: f64, phi: f64| {
        ComplexField::spatial(Array2::from_elem(cfg.shape(), Complex64::from_polar(a, phi)), cfg)
            .expect("shape matches")
    };
    let flat = dpac_encode(&uniform(1.0, 0.3)).expect("non-zero field");
    let flat_err = flat.phase.iter().map(|p| (p - 0.3).abs()).fold(0.0, f64::max);
    rec.at_most("uniform_field_phase", flat_err, 1e-12);

    let mut dark = uniform(0.0, 0.0);
    dark.data[(0, 0)] = Complex64::new(1.0, 0.0);
    let board = dpac_encode(&dark).expect("non-zero field");
    let board_err = board
        .phase
        .indexed_iter()
        .filter(|(i, _)| *i != (0, 0))
        .map(|((r, c), &p)| {
            let want = if (r + c) % 2 == 0 { PI / 2.0 } else { 1.5 * PI };
            (p - want).abs()
        })
        .fold(0.0, f64::max);
    rec.at_most("zero_amplitude_checkerboard", board_err, 1e-12);

    let n = 256;
    let big = config(n);
    let smooth = Array2::from_shape_fn((n, n), |(r, c)| {
        let x = coordinate(c, n) / (20.0 * PITCH);
        let y = coordinate(r, n) / (20.0 * PITCH);
        let rr = x * x + y * y;
        Complex64::from_polar((-rr / 2.0).exp(), 0.5 * rr)
    });
    let f = ComplexField::spatial(smooth, big).expect("shape matches");
    let rec_field = reconstruct(&dpac_encode(&f).expect("non-zero field")).expect("valid hologram");
    let db = psnr(&rec_field.intensity(), &f.intensity(), 1.0).expect("same shape");
    rec.at_least("smooth_field_round_trip_psnr_db", db, 30.0);
}

type SuiteFn = fn(&mut Recorder);

pub fn run(args: &Args) -> CmdResult {
    let suites: &[(Suite, &'static str, SuiteFn)] = &[
        (Suite::Spectrum, "spectrum", spectrum_suite),
        (Suite::Blend, "blend", blend_suite),
        (Suite::Propagation, "propagation", propagation_suite),
        (Suite::Dpac, "dpac", dpac_suite),
    ];
    let mut checks = Vec::new();
    for (suite, name, f) in suites {
        if args.suite == Suite::All || args.suite == *suite {
            let mut rec = Recorder::new(name);
            f(&mut rec);
            checks.extend(rec.checks);
        }
    }
    let passed = checks.iter().all(|c| c.passed || c.informational);
    let report = Report {
        tool: "gws",
        version: env!("CARGO_PKG_VERSION"),
        suite: args.suite,
        passed,
        checks,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.into()))?;
    println!("{text}");
    if passed {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}
