//! Gaussian wave splatting for computer-generated holography.
//!
//! The crate turns a radiance-field style set of 2D Gaussians into a complex
//! wavefront on a spatial light modulator (SLM) grid. Every Gaussian has a
//! closed-form angular spectrum; spectra are combined either by a plain sum
//! (order independent) or by alpha wave blending, which carries a
//! transmittance map front to back and reproduces the occlusion of a
//! rasterizer. A ray-space reference renderer, double phase amplitude coding
//! and a focal-stack simulator are included for evaluation.
//!
//! Frequencies are cyclic (cycles per metre) everywhere and the discrete
//! Fourier transform is unitary.

pub mod blending;
pub mod encode;
pub mod error;
mod fft;
pub mod field;
pub mod holographics;
pub mod propagation;
pub mod ray_reference;
pub mod scene;
pub mod sh;
pub mod spectrum;

pub use error::{Error, Result};
pub use field::{ComplexField, Domain, FrequencyGrid, OpticalConfig, Spectrum};
pub use holographics::HologramGaussian;
pub use num_complex::Complex64;
