//! Binary little-endian splat PLY files.
//!
//! Stored fields are raw optimiser parameters: log scales, opacity logit,
//! an unnormalised quaternion `rot_0..3 = (w, x, y, z)` and SH coefficients
//! with `f_rest_*` laid out channel-major. Only `scale_0` and `scale_1` are
//! used; a third scale is ignored.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::gaussian::WorldGaussian;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    count: usize,
    properties: Vec<(String, Scalar)>,
}

fn parse_header(r: &mut impl BufRead, path: &Path) -> Result<Header> {
    let mut line = String::new();
    let mut next = |r: &mut dyn BufRead| -> Result<String> {
        line.clear();
        let n = r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::malformed(path, "header ends before end_header"));
        }
        Ok(line.trim_end().to_string())
    };
    if next(r)? != "ply" {
        return Err(Error::malformed(path, "missing `ply` magic"));
    }
    let mut count = None;
    let mut properties = Vec::new();
    let mut in_vertex = false;
    loop {
        let l = next(r)?;
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::UnsupportedFormat(format!(
                        "{fmt} (only binary_little_endian is read)"
                    )));
                }
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if count.is_some() && in_vertex {
                    return Err(Error::UnsupportedFormat(
                        "elements after `vertex` are not supported".into(),
                    ));
                }
                in_vertex = *name == "vertex";
                if in_vertex {
                    count = Some(n.parse::<usize>().map_err(|_| {
                        Error::malformed(path, format!("bad vertex count `{n}`"))
                    })?);
                } else {
                    return Err(Error::UnsupportedFormat(format!(
                        "element `{name}` before `vertex`"
                    )));
                }
            }
            ["property", "list", ..] => {
                return Err(Error::UnsupportedFormat("list properties".into()));
            }
            ["property", ty, name] => {
                let s = Scalar::parse(ty).ok_or_else(|| {
                    Error::UnsupportedFormat(format!("property type `{ty}`"))
                })?;
                properties.push((name.to_string(), s));
            }
            _ => return Err(Error::malformed(path, format!("unexpected header line `{l}`"))),
        }
    }
    let count = count.ok_or_else(|| Error::malformed(path, "no vertex element"))?;
    Ok(Header { count, properties })
}

fn count_prefixed(index: &HashMap<&str, usize>, prefix: &str) -> usize {
    (0..).take_while(|i| index.contains_key(format!("{prefix}{i}").as_str())).count()
}

/// Reads a splat PLY file, applying `exp` to scales and normalising the
/// quaternion. Opacity stays a logit.
pub fn load_ply(path: &Path) -> Result<Vec<WorldGaussian>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let header = parse_header(&mut reader, path)?;

    let index: HashMap<&str, usize> = header
        .properties
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (n.as_str(), i))
        .collect();
    let mut offsets = Vec::with_capacity(header.properties.len());
    let mut stride = 0;
    for (_, s) in &header.properties {
        offsets.push(stride);
        stride += s.size();
    }
    let col = |name: &str| -> Result<usize> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingProperty(name.to_string()))
    };
    let pos = [col("x")?, col("y")?, col("z")?];
    let dc = [col("f_dc_0")?, col("f_dc_1")?, col("f_dc_2")?];
    let opacity = col("opacity")?;
    let scale = [col("scale_0")?, col("scale_1")?];
    let rot = [col("rot_0")?, col("rot_1")?, col("rot_2")?, col("rot_3")?];

    let n_rest = count_prefixed(&index, "f_rest_");
    let per_channel = n_rest / 3;
    if !n_rest.is_multiple_of(3) || crate::sh::degree_for_count(per_channel + 1).is_none() {
        return Err(Error::UnsupportedFormat(format!(
            "{n_rest} f_rest coefficients do not form a full SH degree"
        )));
    }
    let rest: Vec<usize> = (0..n_rest)
        .map(|i| col(&format!("f_rest_{i}")))
        .collect::<Result<_>>()?;
    let n_orest = count_prefixed(&index, "o_rest_");
    if n_orest > 0 && crate::sh::degree_for_count(n_orest + 1).is_none() {
        return Err(Error::UnsupportedFormat(format!(
            "{n_orest} o_rest coefficients do not form a full SH degree"
        )));
    }
    let orest: Vec<usize> = (0..n_orest)
        .map(|i| col(&format!("o_rest_{i}")))
        .collect::<Result<_>>()?;

    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    if payload.len() < stride * header.count {
        return Err(Error::malformed(
            path,
            format!(
                "payload holds {} bytes, {} vertices need {}",
                payload.len(),
                header.count,
                stride * header.count
            ),
        ));
    }

    let mut out = Vec::with_capacity(header.count);
    for v in 0..header.count {
        let rec = &payload[v * stride..(v + 1) * stride];
        let get = |i: usize| header.properties[i].1.read(&rec[offsets[i]..]);
        let q = rot.map(get);
        let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::malformed(path, format!("vertex {v} has a zero quaternion")));
        }
        // normalised values are stored at f32 precision so that a write/load
        // cycle reproduces them exactly
        let rotation = if (norm - 1.0).abs() > 1e-6 {
            q.map(|c| (c / norm) as f32 as f64)
        } else {
            q
        };
        let sh_color = [0, 1, 2].map(|ch| {
            let mut c = vec![get(dc[ch])];
            c.extend((0..per_channel).map(|k| get(rest[ch * per_channel + k])));
            c
        });
        out.push(WorldGaussian {
            mean: pos.map(get),
            scales: scale.map(|i| get(i).exp()),
            rotation,
            opacity_logit: get(opacity),
            sh_color,
            sh_opacity: (n_orest > 0).then(|| orest.iter().map(|&i| get(i)).collect()),
        });
    }
    Ok(out)
}

/// Writes Gaussians in the layout read by [`load_ply`], all properties
/// as `float`.
pub fn write_ply(path: &Path, gaussians: &[WorldGaussian]) -> Result<()> {
    let per_channel = gaussians.first().map_or(0, |g| g.sh_color[0].len() - 1);
    let n_orest = gaussians
        .first()
        .and_then(|g| g.sh_opacity.as_ref())
        .map_or(0, |o| o.len());
    for (i, g) in gaussians.iter().enumerate() {
        let orest = g.sh_opacity.as_ref().map_or(0, |o| o.len());
        if g.sh_color.iter().any(|c| c.len() != per_channel + 1) || orest != n_orest {
            return Err(Error::InvalidOption(format!(
                "gaussian {i} has a different SH layout from gaussian 0"
            )));
        }
    }
    if crate::sh::degree_for_count(per_channel + 1).is_none() {
        return Err(Error::InvalidOption("colour SH must be a full degree up to 3".into()));
    }

    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", gaussians.len()));
    let mut names: Vec<String> = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3 * per_channel).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "rot_0", "rot_1", "rot_2", "rot_3"]
            .iter()
            .map(|s| s.to_string()),
    );
    names.extend((0..n_orest).map(|i| format!("o_rest_{i}")));
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("end_header\n");

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut buf = header.into_bytes();
    for g in gaussians {
        let mut vals: Vec<f64> = g.mean.to_vec();
        vals.extend((0..3).map(|c| g.sh_color[c][0]));
        for c in 0..3 {
            vals.extend_from_slice(&g.sh_color[c][1..]);
        }
        vals.push(g.opacity_logit);
        vals.extend(g.scales.iter().map(|s| s.ln()));
        vals.extend_from_slice(&g.rotation);
        if let Some(o) = &g.sh_opacity {
            vals.extend_from_slice(o);
        }
        for v in vals {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
