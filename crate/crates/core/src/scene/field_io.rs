//! GWSF binary field files.
//!
//! Layout, little endian: magic `GWSF`, `u32` version, `u32` width,
//! `u32` height, `f64` pitch_x, `f64` pitch_y, `f64` wavelength, then
//! `height * width` interleaved `(f32 re, f32 im)` pairs in row-major order.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, OpticalConfig};

pub const FIELD_MAGIC: &[u8; 4] = b"GWSF";
pub const FIELD_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 * 3;

pub fn write_field(path: &Path, field: &ComplexField) -> Result<()> {
    field.expect_domain(crate::field::Domain::Spatial)?;
    let c = &field.config;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * c.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(c.width as u32).to_le_bytes());
    buf.extend_from_slice(&(c.height as u32).to_le_bytes());
    for v in [c.pitch_x, c.pitch_y, c.wavelength] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in field.data.iter() {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<ComplexField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::malformed(path, "file is shorter than the header"));
    }
    if &bytes[..4] != FIELD_MAGIC {
        return Err(Error::malformed(path, "magic mismatch"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FIELD_VERSION {
        return Err(Error::malformed(path, format!("unsupported version {version}")));
    }
    let (w, h) = (u32_at(8) as usize, u32_at(12) as usize);
    let config = OpticalConfig::new(f64_at(32), f64_at(16), f64_at(24), w, h)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    let need = HEADER_LEN + 8 * w * h;
    if bytes.len() != need {
        return Err(Error::malformed(
            path,
            format!("payload is {} bytes, expected {}", bytes.len() - HEADER_LEN, need - HEADER_LEN),
        ));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let data = Array2::from_shape_fn((h, w), |(r, c)| {
        let o = HEADER_LEN + 8 * (r * w + c);
        Complex64::new(f32_at(o), f32_at(o + 4))
    });
    ComplexField::spatial(data, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexField {
        let c = OpticalConfig::new(520e-9, 8e-6, 6.4e-6, 6, 4).unwrap();
        let data = Array2::from_shape_fn(c.shape(), |(r, k)| {
            Complex64::new(r as f64 * 0.25 - 1.0, k as f64 / 3.0)
        });
        ComplexField::spatial(data, c).unwrap()
    }

    #[test]
    fn round_trip_within_f32() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.gwsf");
        let f = sample();
        write_field(&p, &f).unwrap();
        let g = read_field(&p).unwrap();
        assert_eq!(g.config.width, 6);
        assert_eq!(g.config.pitch_y, 6.4e-6);
        assert_eq!(g.config.wavelength, 520e-9);
        for (a, b) in f.data.iter().zip(g.data.iter()) {
            assert!((a - b).norm() <= 1e-7 * a.norm().max(1.0));
        }
    }

    #[test]
    fn detects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.gwsf");
        write_field(&p, &sample()).unwrap();
        let mut b = std::fs::read(&p).unwrap();
        b.truncate(b.len() - 1);
        std::fs::write(&p, &b).unwrap();
        assert!(matches!(read_field(&p), Err(Error::Malformed { .. })));
        b[0] = b'X';
        std::fs::write(&p, &b).unwrap();
        let msg = read_field(&p).unwrap_err().to_string();
        assert!(msg.contains("magic"), "{msg}");
    }
}
