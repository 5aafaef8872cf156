//! Scene configuration loaded from TOML.
//!
//! ```toml
//! [camera]
//! fx = 600.0
//! fy = 600.0
//! cx = 256.0
//! cy = 256.0
//! width = 512
//! height = 512
//! world_to_view = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
//!
//! [slm]
//! width = 512
//! height = 512
//! pitch = 8e-6
//! wavelengths = [638e-9, 520e-9, 450e-9]
//!
//! [depth]
//! ray_depth_range = [1.0, 3.0]
//! hologram_depth_range = [0.0, 0.01]
//!
//! [method]
//! t_eps = 0.00392156862745098
//! binarize_threshold = 0.1
//! gaussian_cutoff = 3.0
//! point_radius = 8e-6
//! ```

use std::path::Path;

use nalgebra::Matrix4;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::OpticalConfig;

/// Pinhole camera in the splat-renderer convention: +z forward, pixel
/// coordinates `u = fx x / z + cx`, `v = fy y / z + cy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_view: Matrix4<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub camera: Camera,
    /// One optical configuration per colour channel.
    pub channels: Vec<OpticalConfig>,
    pub hologram_depth_range: (f64, f64),
    pub ray_depth_range: (f64, f64),
    pub t_eps: f64,
    pub binarize_threshold: Option<f64>,
    pub gaussian_cutoff: f64,
    pub point_radius: Option<f64>,
}

pub const DEFAULT_T_EPS: f64 = 1.0 / 255.0;
pub const DEFAULT_HOLOGRAM_DEPTH_RANGE: (f64, f64) = (0.0, 0.01);
pub const DEFAULT_GAUSSIAN_CUTOFF: f64 = 3.0;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCamera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    world_to_view: [[f64; 4]; 4],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlm {
    width: usize,
    height: usize,
    pitch: Option<f64>,
    pitch_x: Option<f64>,
    pitch_y: Option<f64>,
    wavelengths: Vec<f64>,
    reference_dir: Option<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDepth {
    ray_depth_range: [f64; 2],
    hologram_depth_range: Option<[f64; 2]>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    t_eps: Option<f64>,
    binarize_threshold: Option<f64>,
    gaussian_cutoff: Option<f64>,
    point_radius: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    camera: RawCamera,
    slm: RawSlm,
    depth: RawDepth,
    #[serde(default)]
    method: RawMethod,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::SceneConfig(msg.into())
}

fn range(name: &str, r: [f64; 2]) -> Result<(f64, f64)> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(cfg_err(format!(
            "{name} must be finite with near < far, got [{}, {}]",
            r[0], r[1]
        )));
    }
    Ok((r[0], r[1]))
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawScene = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        let cam = raw.camera;
        for (name, v) in [("fx", cam.fx), ("fy", cam.fy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(cfg_err(format!("camera {name} must be positive")));
            }
        }
        if cam.width == 0 || cam.height == 0 {
            return Err(cfg_err("camera image size must be non-zero"));
        }
        let mut w2v = Matrix4::zeros();
        for (r, row) in cam.world_to_view.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                w2v[(r, c)] = v;
            }
        }
        let camera = Camera {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            world_to_view: w2v,
        };

        let slm = raw.slm;
        let (px, py) = match (slm.pitch, slm.pitch_x, slm.pitch_y) {
            (Some(p), None, None) => (p, p),
            (None, Some(x), Some(y)) => (x, y),
            _ => {
                return Err(cfg_err(
                    "give either slm.pitch or both slm.pitch_x and slm.pitch_y",
                ))
            }
        };
        if slm.wavelengths.is_empty() || slm.wavelengths.len() > 3 {
            return Err(cfg_err("slm.wavelengths needs one to three entries"));
        }
        let channels = slm
            .wavelengths
            .iter()
            .map(|&wl| {
                let c = OpticalConfig::new(wl, px, py, slm.width, slm.height)?;
                match slm.reference_dir {
                    Some(d) => c.with_reference_dir(d),
                    None => Ok(c),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| cfg_err(e.to_string()))?;

        let ray_depth_range = range("depth.ray_depth_range", raw.depth.ray_depth_range)?;
        if ray_depth_range.0 <= 0.0 {
            return Err(cfg_err("depth.ray_depth_range must lie in front of the camera"));
        }
        let hologram_depth_range = match raw.depth.hologram_depth_range {
            Some(r) => range("depth.hologram_depth_range", r)?,
            None => DEFAULT_HOLOGRAM_DEPTH_RANGE,
        };

        let m = raw.method;
        let t_eps = m.t_eps.unwrap_or(DEFAULT_T_EPS);
        if !(0.0..1.0).contains(&t_eps) {
            return Err(cfg_err("method.t_eps must lie in [0, 1)"));
        }
        if let Some(t) = m.binarize_threshold {
            if !(0.0..1.0).contains(&t) {
                return Err(cfg_err("method.binarize_threshold must lie in [0, 1)"));
            }
        }
        let gaussian_cutoff = m.gaussian_cutoff.unwrap_or(DEFAULT_GAUSSIAN_CUTOFF);
        if !(gaussian_cutoff.is_finite() && gaussian_cutoff > 0.0) {
            return Err(cfg_err("method.gaussian_cutoff must be positive"));
        }
        if let Some(r) = m.point_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(cfg_err("method.point_radius must be positive"));
            }
        }
        Ok(SceneConfig {
            camera,
            channels,
            hologram_depth_range,
            ray_depth_range,
            t_eps,
            binarize_threshold: m.binarize_threshold,
            gaussian_cutoff,
            point_radius: m.point_radius,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn channel(&self, index: usize) -> Result<&OpticalConfig> {
        self.channels
            .get(index)
            .ok_or_else(|| cfg_err(format!("channel {index} is not configured")))
    }
}
