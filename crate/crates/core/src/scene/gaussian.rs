use nalgebra::{Matrix3, UnitQuaternion, Quaternion};

/// A flat (2D) Gaussian primitive in world space, with activations applied.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldGaussian {
    pub mean: [f64; 3],
    /// In-plane standard deviations, already exponentiated.
    pub scales: [f64; 2],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
    pub opacity_logit: f64,
    /// Per-channel colour coefficients, DC first, `(degree + 1)^2` each.
    pub sh_color: [Vec<f64>; 3],
    /// Degree >= 1 coefficients of a view-dependent opacity logit whose DC
    /// term is `opacity_logit`. `None` means view-independent opacity.
    pub sh_opacity: Option<Vec<f64>>,
}

impl WorldGaussian {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)).to_rotation_matrix().into_inner()
    }

    pub fn sh_degree(&self) -> usize {
        crate::sh::degree_for_count(self.sh_color[0].len()).unwrap_or(0)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
