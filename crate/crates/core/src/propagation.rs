//! Angular spectrum method (ASM) free-space propagation.
//!
//! `H(f, z) = exp(j 2 pi fz z)` on propagating samples and zero elsewhere.
//! Positive `z` moves the observation plane along the direction of travel.
//! The phase is split into the on-axis part `z / wavelength` and the small
//! offset `(fz - 1/wavelength) z` so that long distances keep full precision.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::Result;
use crate::fft::fft2_inplace;
use crate::field::{cis_cycles, frac_product, ComplexField, Domain, FrequencyGrid};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PropagationOptions {
    /// Zero samples that violate the band-limited ASM sampling criterion
    /// for the grid aperture and distance.
    pub band_limited: bool,
}

fn band_limit(df: f64, z: f64, wavelength: f64) -> f64 {
    1.0 / (wavelength * ((2.0 * df * z).powi(2) + 1.0).sqrt())
}

/// Transfer function for distance `z`. `df_x`, `df_y` are only consulted
/// when the band-limited option is on.
pub fn transfer_function(
    grid: &FrequencyGrid,
    z: f64,
    options: PropagationOptions,
) -> Array2<Complex64> {
    let on_axis = cis_cycles(frac_product(z, grid.inv_wavelength));
    let mut h = Array2::zeros(grid.shape());
    Zip::from(&mut h)
        .and(&grid.fz_offset)
        .and(&grid.propagating)
        .for_each(|v, &d, &m| {
            if m {
                *v = on_axis * cis_cycles(d * z);
            }
        });
    if options.band_limited {
        let df_x = (grid.fx[1] - grid.fx[0]).abs();
        let df_y = (grid.fy[1] - grid.fy[0]).abs();
        let lx = band_limit(df_x, z, grid.wavelength);
        let ly = band_limit(df_y, z, grid.wavelength);
        for (r, &fy) in grid.fy.iter().enumerate() {
            for (c, &fx) in grid.fx.iter().enumerate() {
                if fx.abs() > lx || fy.abs() > ly {
                    h[(r, c)] = Complex64::default();
                }
            }
        }
    }
    h
}

/// `exp(-j 2 pi (fz - 1/wavelength) z)`: back-propagation by `z` with the
/// on-axis phase removed, i.e. `H(f, -z) exp(j 2 pi z / wavelength)`.
pub fn matched_back_transfer(grid: &FrequencyGrid, z: f64) -> Array2<Complex64> {
    let mut h = Array2::zeros(grid.shape());
    Zip::from(&mut h)
        .and(&grid.fz_offset)
        .and(&grid.propagating)
        .for_each(|v, &d, &m| {
            if m {
                *v = cis_cycles(-d * z);
            }
        });
    h
}

/// Propagates a field by `z`. Spatial input gives spatial output and
/// frequency input gives frequency output.
pub fn propagate(
    field: &ComplexField,
    grid: &FrequencyGrid,
    z: f64,
    options: PropagationOptions,
) -> Result<ComplexField> {
    if grid.shape() != field.config.shape() {
        return Err(crate::Error::Shape(
            "frequency grid does not match the field".into(),
        ));
    }
    let h = transfer_function(grid, z, options);
    let mut data = field.data.clone();
    match field.domain {
        Domain::Frequency => data *= &h,
        Domain::Spatial => {
            fft2_inplace(&mut data, false);
            data *= &h;
            fft2_inplace(&mut data, true);
        }
    }
    Ok(ComplexField {
        data,
        config: field.config,
        domain: field.domain,
    })
}

/// Memoised [`matched_back_transfer`] arrays keyed by the exact bit pattern
/// of the distance. Safe to share between threads.
pub struct TransferCache {
    grid: Arc<FrequencyGrid>,
    entries: RwLock<HashMap<u64, Arc<Array2<Complex64>>>>,
    capacity: usize,
}

impl TransferCache {
    pub fn new(grid: Arc<FrequencyGrid>, capacity: usize) -> Self {
        TransferCache {
            grid,
            entries: RwLock::new(HashMap::new()),
            capacity,
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matched_back(&self, z: f64) -> Arc<Array2<Complex64>> {
        let key = z.to_bits();
        if let Some(h) = self
            .entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&key)
        {
            return Arc::clone(h);
        }
        let h = Arc::new(matched_back_transfer(&self.grid, z));
        let mut map = self.entries.write().unwrap_or_else(|e| e.into_inner());
        if map.len() < self.capacity {
            map.insert(key, Arc::clone(&h));
        }
        h
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
