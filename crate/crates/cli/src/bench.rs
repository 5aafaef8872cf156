use std::f64::consts::PI;
use std::time::Instant;

use anyhow::anyhow;
use clap::ValueEnum;
use gws_core::blending::{blend, BlendContext, BlendMode, BlendOptions};
use gws_core::{HologramGaussian, OpticalConfig};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Fast,
    Exact,
    Silhouette,
}

impl BenchMethod {
    fn mode(self) -> BlendMode {
        match self {
            BenchMethod::Fast => BlendMode::Fast,
            BenchMethod::Exact => BlendMode::Exact,
            BenchMethod::Silhouette => BlendMode::Silhouette,
        }
    }
}

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    #[arg(long, default_value_t = 1000)]
    pub gaussians: usize,
    /// Grid size `WxH`.
    #[arg(long, value_parser = parse_resolution, default_value = "512x512")]
    pub resolution: (usize, usize),
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fast,exact")]
    pub methods: Vec<BenchMethod>,
    /// Timed runs per method after one warm-up run.
    #[arg(long, default_value_t = 5)]
    pub repeat: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8e-6)]
    pub pitch: f64,
    #[arg(long, default_value_t = 520e-9)]
    pub wavelength: f64,
    /// Print the table as JSON.
    #[arg(long)]
    pub json: bool,
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected `WxH`")?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok((w, h))
}

#[derive(Serialize)]
struct Timing {
    method: BenchMethod,
    median_s: f64,
    min_s: f64,
    max_s: f64,
    runs: Vec<f64>,
}

#[derive(Serialize)]
struct Table<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    flags: &'a Args,
    threads: usize,
    timings: Vec<Timing>,
    /// Median exact time over median fast time, when both ran.
    speedup: Option<f64>,
}

/// Random fronto-parallel Gaussians filling the grid, 1 to 10 mm in front
/// of the SLM, sorted by depth.
fn scene(args: &Args) -> Vec<HologramGaussian> {
    let (w, h) = args.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let p = args.pitch;
    let mut v: Vec<_> = (0..args.gaussians)
        .map(|i| {
            HologramGaussian::fronto_parallel(
                Vector3::new(
                    rng.random_range(-0.4..0.4) * w as f64 * p,
                    rng.random_range(-0.4..0.4) * h as f64 * p,
                    rng.random_range(1e-3..1e-2),
                ),
                rng.random_range(0.0..PI),
                [rng.random_range(1.5..6.0) * p, rng.random_range(1.5..6.0) * p],
                rng.random_range(0.2..1.0),
                rng.random_range(0.1..0.9),
                i,
            )
        })
        .collect();
    v.sort_by(|a, b| a.mu.z.total_cmp(&b.mu.z));
    v
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn run(args: &Args) -> CmdResult {
    if args.repeat == 0 {
        return Err(Failure::Usage(anyhow!("--repeat must be positive")));
    }
    if args.methods.is_empty() {
        return Err(Failure::Usage(anyhow!("--methods lists no method")));
    }
    let (w, h) = args.resolution;
    let config = OpticalConfig::square(args.wavelength, args.pitch, w, h)?;
    let ctx = BlendContext::new(config)?;
    let gaussians = scene(args);

    let mut timings = Vec::new();
    for &m in &args.methods {
        let opts = BlendOptions::with_mode(m.mode());
        blend(&gaussians, &ctx, &opts)?;
        let runs: Vec<f64> = (0..args.repeat)
            .map(|_| {
                let t = Instant::now();
                blend(&gaussians, &ctx, &opts).map(|_| t.elapsed().as_secs_f64())
            })
            .collect::<Result<_, _>>()?;
        timings.push(Timing {
            method: m,
            median_s: median(&runs),
            min_s: runs.iter().copied().fold(f64::INFINITY, f64::min),
            max_s: runs.iter().copied().fold(0.0, f64::max),
            runs,
        });
    }
    let find = |m: BenchMethod| timings.iter().find(|t| t.method == m).map(|t| t.median_s);
    let speedup = find(BenchMethod::Exact).zip(find(BenchMethod::Fast)).map(|(e, f)| e / f);

    let table = Table {
        tool: "gws",
        version: env!("CARGO_PKG_VERSION"),
        command: "bench",
        flags: args,
        threads: rayon::current_num_threads(),
        timings,
        speedup,
    };
    if args.json {
        let text = serde_json::to_string_pretty(&table).map_err(|e| Failure::Io(e.into()))?;
        println!("{text}");
        return Ok(());
    }
    println!(
        "{} Gaussians, {w}x{h}, {} runs, {} threads",
        args.gaussians, args.repeat, table.threads
    );
    println!("{:<12} {:>10} {:>10} {:>10}", "method", "median s", "min s", "max s");
    for t in &table.timings {
        let name = format!("{:?}", t.method).to_lowercase();
        println!("{name:<12} {:>10.4} {:>10.4} {:>10.4}", t.median_s, t.min_s, t.max_s);
    }
    if let Some(s) = speedup {
        println!("speedup (exact / fast): {s:.2}x");
    }
    Ok(())
}
