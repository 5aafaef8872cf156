//! Scene description and file formats: splat PLY files, scene configuration,
//! binary field files and 8-bit PNG output.

mod config;
mod field_io;
mod gaussian;
mod ply;
mod png_io;

pub use config::{Camera, SceneConfig};
pub use field_io::{read_field, write_field, FIELD_MAGIC, FIELD_VERSION};
pub use gaussian::WorldGaussian;
pub use ply::{load_ply, write_ply};
pub use png_io::{quantize_phase, write_intensity_png, write_phase_png};
