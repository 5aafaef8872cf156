//! 8-bit grayscale PNG output for phase maps and intensity images.

use std::f64::consts::TAU;
use std::io::BufWriter;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Wraps a phase to [0, 2pi) and maps it to 0..=255 with ties to even.
pub fn quantize_phase(phase: f64) -> u8 {
    let mut p = phase.rem_euclid(TAU);
    if p >= TAU {
        p = 0.0;
    }
    (p * 255.0 / TAU).round_ties_even().clamp(0.0, 255.0) as u8
}

fn write_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let to_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::malformed(path, other.to_string()),
    };
    let mut w = enc.write_header().map_err(to_err)?;
    w.write_image_data(pixels).map_err(to_err)?;
    w.finish().map_err(to_err)
}

pub fn write_phase_png(path: &Path, phase: &Array2<f64>) -> Result<()> {
    let (h, w) = phase.dim();
    let px: Vec<u8> = phase.iter().map(|&p| quantize_phase(p)).collect();
    write_gray(path, w, h, &px)
}

/// Linear mapping of `[0, max]` to 0..=255, clipped.
pub fn write_intensity_png(path: &Path, image: &Array2<f64>, max: f64) -> Result<()> {
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::InvalidOption(format!("intensity scale must be positive, got {max}")));
    }
    let (h, w) = image.dim();
    let px: Vec<u8> = image
        .iter()
        .map(|&v| (v / max * 255.0).clamp(0.0, 255.0).round_ties_even() as u8)
        .collect();
    write_gray(path, w, h, &px)
}
