use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::anyhow;
use clap::ValueEnum;
use gws_core::blending::{blend_scene_channel, BlendMode, BlendOptions};
use gws_core::encode::dpac_encode;
use gws_core::scene::{load_ply, write_field, write_phase_png, SceneConfig};
use gws_core::spectrum::AngularKernel;
use gws_core::Error;
use log::{info, warn};
use ndarray::Array2;
use serde::Serialize;

use crate::{io_failure, CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Fast,
    Silhouette,
    NaivePoint,
    PointDisk,
}

impl Method {
    fn mode(self) -> BlendMode {
        match self {
            Method::Exact => BlendMode::Exact,
            Method::Fast => BlendMode::Fast,
            Method::Silhouette => BlendMode::Silhouette,
            Method::NaivePoint => BlendMode::NaivePoint,
            Method::PointDisk => BlendMode::PointDisk,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    R,
    G,
    B,
    All,
}

const CHANNEL_NAMES: [&str; 3] = ["r", "g", "b"];

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// Scene configuration (TOML).
    #[arg(long)]
    pub scene: PathBuf,
    /// Splat model (PLY).
    #[arg(long)]
    pub ply: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// Output prefix; files are named `<prefix>_<channel>.gwsf` and so on.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub channel: Channel,
    /// Seed of the random-phase draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of partially coherent frames; one field per frame.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Degree and order `l,m` of the angular kernel.
    #[arg(long, value_parser = parse_kernel)]
    pub sh_degree_kernel: Option<(usize, i64)>,
}

fn parse_kernel(s: &str) -> Result<(usize, i64), String> {
    let (l, m) = s.split_once(',').ok_or("expected `l,m`")?;
    let l: usize = l.trim().parse().map_err(|_| format!("bad degree `{l}`"))?;
    let m: i64 = m.trim().parse().map_err(|_| format!("bad order `{m}`"))?;
    if m.unsigned_abs() as usize > l {
        return Err(format!("order {m} exceeds degree {l}"));
    }
    Ok((l, m))
}

#[derive(Serialize)]
struct Output {
    channel: &'static str,
    wavelength: f64,
    frame: Option<usize>,
    field: String,
    phase_png: String,
    /// Peak amplitude divided out before phase encoding; 0 for a zero field.
    amplitude_scale: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    flags: &'a Args,
    seed: u64,
    threads: usize,
    gaussians: usize,
    outputs: Vec<Output>,
    wall_time_s: f64,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(args: &Args) -> CmdResult {
    let start = Instant::now();
    let scene = SceneConfig::load(&args.scene)?;
    let gaussians = load_ply(&args.ply)?;
    info!("loaded {} Gaussians", gaussians.len());

    let channels: Vec<usize> = match args.channel {
        Channel::R => vec![0],
        Channel::G => vec![1],
        Channel::B => vec![2],
        Channel::All => (0..scene.channels.len()).collect(),
    };
    if let Some(&ch) = channels.iter().find(|&&c| c >= scene.channels.len()) {
        return Err(Failure::Usage(anyhow!(
            "channel {} requested but the scene configures {} wavelength(s)",
            CHANNEL_NAMES[ch],
            scene.channels.len()
        )));
    }
    let kernel = match (args.frames, args.sh_degree_kernel) {
        (Some(0), _) => return Err(Failure::Usage(anyhow!("--frames must be positive"))),
        (None, None) => None,
        (frames, lm) => {
            let (l, m) = lm.unwrap_or((0, 0));
            Some(AngularKernel {
                l,
                m,
                frames: frames.unwrap_or(1),
                seed: args.seed,
            })
        }
    };
    let base = BlendOptions {
        t_eps: scene.t_eps,
        binarize_threshold: scene.binarize_threshold,
        mode: args.method.mode(),
        ..Default::default()
    };
    base.validate()?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }

    let mut outputs = Vec::new();
    for &ch in &channels {
        let name = CHANNEL_NAMES[ch];
        let frames: Vec<Option<usize>> = match kernel {
            Some(k) => (0..k.frames).map(Some).collect(),
            None => vec![None],
        };
        for frame in frames {
            let opts = BlendOptions {
                kernel: kernel.zip(frame),
                ..base
            };
            let field = blend_scene_channel(&gaussians, &scene, ch, &opts)?;
            let stem = match frame {
                Some(t) => format!("_{name}_f{t:03}"),
                None => format!("_{name}"),
            };
            let field_path = with_suffix(&args.out, &format!("{stem}.gwsf"));
            let png_path = with_suffix(&args.out, &format!("{stem}_phase.png"));
            write_field(&field_path, &field)?;
            let scale = match dpac_encode(&field) {
                Ok(h) => {
                    write_phase_png(&png_path, &h.phase)?;
                    h.amplitude_scale
                }
                Err(Error::ZeroField) => {
                    warn!("channel {name}: zero field, writing a flat phase image");
                    write_phase_png(&png_path, &Array2::zeros(field.config.shape()))?;
                    0.0
                }
                Err(e) => return Err(e.into()),
            };
            info!("channel {name}: wrote {}", field_path.display());
            outputs.push(Output {
                channel: name,
                wavelength: field.config.wavelength,
                frame,
                field: field_path.display().to_string(),
                phase_png: png_path.display().to_string(),
                amplitude_scale: scale,
            });
        }
    }

    let manifest = Manifest {
        tool: "gws",
        version: env!("CARGO_PKG_VERSION"),
        command: "generate",
        flags: args,
        seed: args.seed,
        threads: rayon::current_num_threads(),
        gaussians: gaussians.len(),
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let path = with_suffix(&args.out, "_manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.into()))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_failure(&path, e))?;
    println!("{}", path.display());
    Ok(())
}
