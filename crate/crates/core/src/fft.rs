//! Row/column 2D FFT on row-major arrays, unitary scaling.

use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut p = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        p.plan_fft_inverse(len)
    } else {
        p.plan_fft_forward(len)
    }
}

fn transform_rows(buf: &mut [Complex64], row_len: usize, fft: &Arc<dyn Fft<f64>>) {
    let scratch_len = fft.get_inplace_scratch_len();
    buf.par_chunks_mut(row_len).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

const BLOCK: usize = 32;

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// In-place 2D DFT with the negative exponent forward kernel, scaled by 1/sqrt(N).
pub(crate) fn fft2_inplace(data: &mut Array2<Complex64>, inverse: bool) {
    let (h, w) = data.dim();
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().to_owned();
    }
    let buf = data.as_slice_mut().expect("standard layout");
    transform_rows(buf, w, &plan(w, inverse));
    let mut t = vec![Complex64::default(); h * w];
    transpose(buf, h, w, &mut t);
    transform_rows(&mut t, h, &plan(h, inverse));
    transpose(&t, w, h, buf);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    buf.par_iter_mut().for_each(|v| *v *= scale);
}
