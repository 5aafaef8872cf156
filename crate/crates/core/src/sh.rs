//! Real spherical harmonics up to degree 3 in the ordering and sign
//! convention of splat renderers: index `l*l + l + m`, `m = -l..=l`.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

pub fn coefficient_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Degree for a coefficient count of 1, 4, 9 or 16.
pub fn degree_for_count(count: usize) -> Option<usize> {
    (0..=MAX_DEGREE).find(|&d| coefficient_count(d) == count)
}

/// All basis values for a unit direction, `coefficient_count(degree)` entries.
pub fn basis(degree: usize, d: &Vector3<f64>) -> Vec<f64> {
    let (x, y, z) = (d.x, d.y, d.z);
    let mut out = Vec::with_capacity(coefficient_count(degree));
    out.push(C0);
    if degree >= 1 {
        out.extend([-C1 * y, C1 * z, -C1 * x]);
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        out.extend([
            C2[0] * x * y,
            C2[1] * y * z,
            C2[2] * (2.0 * zz - xx - yy),
            C2[3] * x * z,
            C2[4] * (xx - yy),
        ]);
        if degree >= 3 {
            out.extend([
                C3[0] * y * (3.0 * xx - yy),
                C3[1] * x * y * z,
                C3[2] * y * (4.0 * zz - xx - yy),
                C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
                C3[4] * x * (4.0 * zz - xx - yy),
                C3[5] * z * (xx - yy),
                C3[6] * x * (xx - 3.0 * yy),
            ]);
        }
    }
    out
}

/// Single basis function `Y_l^m` at a unit direction.
pub fn basis_function(l: usize, m: i64, d: &Vector3<f64>) -> Result<f64> {
    if l > MAX_DEGREE || m.unsigned_abs() as usize > l {
        return Err(Error::InvalidOption(format!(
            "spherical harmonic ({l}, {m}) is outside degree {MAX_DEGREE}"
        )));
    }
    let idx = (l * l + l) as i64 + m;
    Ok(basis(l, d)[idx as usize])
}

/// `sum_k coeffs[k] Y_k(dir)`. The direction is normalised first.
pub fn sh_eval(coeffs: &[f64], dir: &Vector3<f64>) -> Result<f64> {
    let degree = degree_for_count(coeffs.len()).ok_or_else(|| {
        Error::InvalidOption(format!(
            "{} spherical harmonic coefficients do not form a full degree up to {MAX_DEGREE}",
            coeffs.len()
        ))
    })?;
    let n = dir.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Numerical("view direction has zero length".into()));
    }
    let b = basis(degree, &(dir / n));
    Ok(coeffs.iter().zip(b.iter()).map(|(c, y)| c * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn degree_zero_is_constant() {
        let c = [2.0 * PI.sqrt()];
        for d in [Vector3::x(), Vector3::new(0.3, -0.2, 0.9)] {
            assert!((sh_eval(&c, &d).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_partial_coefficient_sets() {
        assert!(sh_eval(&[1.0, 2.0], &Vector3::z()).is_err());
        assert!(sh_eval(&[1.0], &Vector3::zeros()).is_err());
        assert!(basis_function(4, 0, &Vector3::z()).is_err());
        assert!(basis_function(1, 2, &Vector3::z()).is_err());
    }

    #[test]
    fn basis_is_orthonormal_on_the_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let k = coefficient_count(3);
        let mut gram = vec![0.0; k * k];
        for _ in 0..n {
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..2.0 * PI);
            let r = (1.0 - z * z).sqrt();
            let d = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            let b = basis(3, &d);
            for i in 0..k {
                for j in 0..k {
                    gram[i * k + j] += b[i] * b[j];
                }
            }
        }
        // Monte-Carlo mean of Y_i Y_j over the sphere is delta_ij / (4 pi)
        for i in 0..k {
            for j in 0..k {
                let mean = gram[i * k + j] / n as f64 * 4.0 * PI;
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((mean - expect).abs() < 2e-2, "({i},{j}) -> {mean}");
            }
        }
    }

    #[test]
    fn single_function_matches_basis_entry() {
        let d = Vector3::new(0.2, 0.5, 0.7).normalize();
        let b = basis(3, &d);
        for l in 0..=3usize {
            for m in -(l as i64)..=(l as i64) {
                let idx = (l * l + l) as i64 + m;
                assert_eq!(basis_function(l, m, &d).unwrap(), b[idx as usize]);
            }
        }
    }
}
