use std::path::PathBuf;

use anyhow::anyhow;
use gws_core::encode::{sharpness, simulate_focal_stack, Pupil};
use gws_core::field::make_frequency_grid;
use gws_core::scene::{read_field, write_intensity_png};
use serde::Serialize;

use crate::{io_failure, CmdResult, Failure};

#[derive(clap::Args, Debug, Serialize)]
pub struct Args {
    /// GWSF field file.
    #[arg(long)]
    pub field: PathBuf,
    /// Refocus distances in metres, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub depths: Vec<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Circular pupil `cx,cy,r` in cycles per metre.
    #[arg(long, value_parser = parse_pupil, allow_hyphen_values = true)]
    pub pupil: Option<(f64, f64, f64)>,
}

fn parse_pupil(s: &str) -> Result<(f64, f64, f64), String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [cx, cy, r] => Ok((cx, cy, r)),
        _ => Err("expected `cx,cy,r`".into()),
    }
}

#[derive(Serialize)]
struct Slice {
    depth: f64,
    image: String,
    sharpness: f64,
    peak_intensity: f64,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    flags: &'a Args,
    /// Every slice shares the intensity scale `normalization`.
    normalization: f64,
    sharpest_slice: Option<usize>,
    slices: Vec<Slice>,
}

pub fn run(args: &Args) -> CmdResult {
    if args.depths.is_empty() {
        return Err(Failure::Usage(anyhow!("--depths needs at least one distance")));
    }
    let field = read_field(&args.field)?;
    let grid = make_frequency_grid(&field.config);
    let pupil = args.pupil.map(|(cx, cy, r)| Pupil {
        center: (cx, cy),
        radius: r,
    });
    let stack = simulate_focal_stack(&field, &grid, &args.depths, pupil)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_failure(&args.out_dir, e))?;

    let peak = stack
        .iter()
        .flat_map(|s| s.iter())
        .copied()
        .fold(0.0, f64::max);
    // an all-zero stack still gets (black) images
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let mut slices = Vec::with_capacity(stack.len());
    for (i, (img, &z)) in stack.iter().zip(&args.depths).enumerate() {
        let path = args.out_dir.join(format!("slice_{i:03}.png"));
        write_intensity_png(&path, img, scale)?;
        slices.push(Slice {
            depth: z,
            image: path.display().to_string(),
            sharpness: sharpness(img),
            peak_intensity: img.iter().copied().fold(0.0, f64::max),
        });
    }
    let sharpest_slice = if peak > 0.0 {
        slices
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.sharpness.total_cmp(&b.1.sharpness))
            .map(|(i, _)| i)
    } else {
        None
    };
    for s in &slices {
        println!("{:>12.6e} m  sharpness {:.6e}", s.depth, s.sharpness);
    }
    let report = Report {
        tool: "gws",
        version: env!("CARGO_PKG_VERSION"),
        command: "simulate",
        flags: args,
        normalization: scale,
        sharpest_slice,
        slices,
    };
    let path = args.out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.into()))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_failure(&path, e))?;
    Ok(())
}
