//! World space to hologram space.
//!
//! World Gaussians are moved into view space by a rigid transform, projected
//! to ray space with the local affine (EWA) approximation of the perspective
//! map, lifted back to a flat 3D Gaussian with a rotation about the optical
//! axis, and finally mapped into hologram space by an affine transform that
//! scales the image plane onto the SLM aperture and remaps depth linearly.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4, SymmetricEigen, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::OpticalConfig;
use crate::scene::{Camera, SceneConfig, WorldGaussian};
use crate::sh::sh_eval;

pub const MIN_VIEW_DEPTH: f64 = 1e-6;
pub const MAX_OPACITY: f64 = 1.0 - 1e-6;

/// A flat Gaussian ready for spectrum evaluation. The local frame is
/// `x = rotation * diag(s_u, s_v, 0) * x_c + mu`; the third column of the
/// rotation is the surface normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramGaussian {
    pub mu: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub scales: [f64; 2],
    pub color: f64,
    pub opacity: f64,
    /// Stable identity used to fix summation order.
    pub id: usize,
}

impl HologramGaussian {
    /// Gaussian parallel to the SLM, rotated by `angle` about the optical axis.
    pub fn fronto_parallel(
        mu: Vector3<f64>,
        angle: f64,
        scales: [f64; 2],
        color: f64,
        opacity: f64,
        id: usize,
    ) -> Self {
        HologramGaussian {
            mu,
            rotation: rotation_z(angle),
            scales,
            color,
            opacity,
            id,
        }
    }

    /// `R diag(s_u^2, s_v^2, 0) R^T`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let s = Matrix3::from_diagonal(&Vector3::new(
            self.scales[0] * self.scales[0],
            self.scales[1] * self.scales[1],
            0.0,
        ));
        self.rotation * s * self.rotation.transpose()
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewGaussian {
    pub mean: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub scales: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayGaussian {
    /// Pixel coordinates and view depth.
    pub mu: Vector3<f64>,
    /// Image-plane covariance in pixel^2.
    pub covariance: Matrix2<f64>,
}

fn split_rigid(w: &Matrix4<f64>) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let r: Matrix3<f64> = w.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vector3<f64> = w.fixed_view::<3, 1>(0, 3).into_owned();
    let last = w.row(3);
    if last[0] != 0.0 || last[1] != 0.0 || last[2] != 0.0 || last[3] != 1.0 {
        return Err(Error::NonRigid("bottom row is not (0, 0, 0, 1)".into()));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if ortho > 1e-9 {
        return Err(Error::NonRigid(format!("rotation block deviates from orthonormal by {ortho:e}")));
    }
    if r.determinant() < 0.0 {
        return Err(Error::NonRigid("rotation block is a reflection".into()));
    }
    Ok((r, t))
}

pub fn view_transform(g: &WorldGaussian, world_to_view: &Matrix4<f64>) -> Result<ViewGaussian> {
    let (r, t) = split_rigid(world_to_view)?;
    Ok(ViewGaussian {
        mean: r * Vector3::from(g.mean) + t,
        rotation: r * g.rotation_matrix(),
        scales: g.scales,
    })
}

/// Jacobian of `(x, y, z) -> (fx x / z + cx, fy y / z + cy)` at `mean`.
pub fn perspective_jacobian(camera: &Camera, mean: &Vector3<f64>) -> Matrix2x3<f64> {
    let (x, y, z) = (mean.x, mean.y, mean.z);
    Matrix2x3::new(
        camera.fx / z,
        0.0,
        -camera.fx * x / (z * z),
        0.0,
        camera.fy / z,
        -camera.fy * y / (z * z),
    )
}

pub fn project_to_ray_space(g: &ViewGaussian, camera: &Camera) -> Result<RayGaussian> {
    let z = g.mean.z;
    if !(z > MIN_VIEW_DEPTH) {
        return Err(Error::BehindCamera(z));
    }
    let j = perspective_jacobian(camera, &g.mean);
    let s = Matrix3::from_diagonal(&Vector3::new(
        g.scales[0] * g.scales[0],
        g.scales[1] * g.scales[1],
        0.0,
    ));
    let sigma_view = g.rotation * s * g.rotation.transpose();
    let cov = j * sigma_view * j.transpose();
    let cov = (cov + cov.transpose()) * 0.5;
    Ok(RayGaussian {
        mu: Vector3::new(
            camera.fx * g.mean.x / z + camera.cx,
            camera.fy * g.mean.y / z + camera.cy,
            z,
        ),
        covariance: cov,
    })
}

/// Factors a 2x2 covariance as `R' diag(s_u^2, s_v^2) R'^T` with descending
/// eigenvalues and `det R' = 1`, returned as the 3D rotation
/// `blockdiag(R', 1)`.
pub fn lift_covariance(cov: &Matrix2<f64>) -> Result<(Matrix3<f64>, [f64; 2])> {
    let (a, b, d) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
    if !(a.is_finite() && b.is_finite() && d.is_finite()) {
        return Err(Error::Numerical("covariance is not finite".into()));
    }
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let l1 = mean + radius;
    let l2 = mean - radius;
    let tol = 1e-12 * l1.abs().max(1.0);
    if l2 < -tol {
        return Err(Error::Numerical(format!("covariance has eigenvalue {l2:e}")));
    }
    let v1 = if radius == 0.0 {
        Vector2::new(1.0, 0.0)
    } else if a >= d {
        Vector2::new(l1 - d, b).normalize()
    } else {
        Vector2::new(b, l1 - a).normalize()
    };
    let rot = Matrix3::new(v1.x, -v1.y, 0.0, v1.y, v1.x, 0.0, 0.0, 0.0, 1.0);
    Ok((rot, [l1.max(0.0).sqrt(), l2.max(0.0).sqrt()]))
}

/// Affine map from ray space `(u, v, depth)` to hologram space.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramTransform {
    pub linear: Matrix3<f64>,
    pub offset: Vector3<f64>,
    pub depth_range: (f64, f64),
}

impl HologramTransform {
    /// Scales the camera image onto the SLM aperture with the image centre on
    /// the optical axis and maps `ray_depth_range` linearly onto
    /// `hologram_depth_range`.
    pub fn from_scene(scene: &SceneConfig, slm: &OpticalConfig) -> Self {
        let cam = &scene.camera;
        let sx = slm.width as f64 * slm.pitch_x / cam.width as f64;
        let sy = slm.height as f64 * slm.pitch_y / cam.height as f64;
        let (dn, df) = scene.ray_depth_range;
        let (zn, zf) = scene.hologram_depth_range;
        let a = (zf - zn) / (df - dn);
        HologramTransform {
            linear: Matrix3::from_diagonal(&Vector3::new(sx, sy, a)),
            offset: Vector3::new(
                -sx * cam.width as f64 / 2.0,
                -sy * cam.height as f64 / 2.0,
                zn - a * dn,
            ),
            depth_range: (zn, zf),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HologramPlacement {
    pub mu: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub scales: [f64; 2],
    pub depth_clamped: bool,
}

/// Factors a rank-2 PSD covariance into rotation and in-plane scales with the
/// normal facing +z.
fn factor_flat_covariance(sigma: &Matrix3<f64>) -> Result<(Matrix3<f64>, [f64; 2])> {
    if sigma[(0, 2)] == 0.0 && sigma[(1, 2)] == 0.0 && sigma[(2, 2)] == 0.0 {
        return lift_covariance(&sigma.fixed_view::<2, 2>(0, 0).into_owned());
    }
    let eig = SymmetricEigen::new((sigma + sigma.transpose()) * 0.5);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (l1, l2, l3) = (
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    );
    let tol = 1e-12 * l1.abs().max(f64::MIN_POSITIVE);
    if l2 < -tol || l3 < -tol {
        return Err(Error::Numerical("covariance is not positive semidefinite".into()));
    }
    let e1 = eig.eigenvectors.column(idx[0]).into_owned();
    let mut e2 = eig.eigenvectors.column(idx[1]).into_owned();
    let mut n = e1.cross(&e2);
    if n.z < 0.0 {
        n = -n;
        e2 = -e2;
    }
    Ok((
        Matrix3::from_columns(&[e1, e2, n]),
        [l1.max(0.0).sqrt(), l2.max(0.0).sqrt()],
    ))
}

pub fn to_hologram_space(
    mu_r: &Vector3<f64>,
    rotation_r: &Matrix3<f64>,
    scales: [f64; 2],
    t: &HologramTransform,
) -> Result<HologramPlacement> {
    let s = Matrix3::from_diagonal(&Vector3::new(scales[0] * scales[0], scales[1] * scales[1], 0.0));
    let sigma_r = rotation_r * s * rotation_r.transpose();
    let sigma = t.linear * sigma_r * t.linear.transpose();
    let (rotation, scales) = factor_flat_covariance(&sigma)?;
    let mut mu = t.linear * mu_r + t.offset;
    let (zn, zf) = t.depth_range;
    let clamped = mu.z < zn || mu.z > zf;
    mu.z = mu.z.clamp(zn, zf);
    Ok(HologramPlacement {
        mu,
        rotation,
        scales,
        depth_clamped: clamped,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformStats {
    pub input: usize,
    pub behind_camera: usize,
    pub transparent: usize,
    pub depth_clamped: usize,
}

/// Hologram-space Gaussians for one colour channel, sorted front to back
/// (ascending depth, ties keep input order).
pub fn transform_scene(
    gaussians: &[WorldGaussian],
    scene: &SceneConfig,
    channel: usize,
) -> Result<(Vec<HologramGaussian>, TransformStats)> {
    if channel > 2 {
        return Err(Error::InvalidOption(format!("channel {channel} is not r, g or b")));
    }
    let slm = scene.channel(channel)?;
    let t = HologramTransform::from_scene(scene, slm);
    let (r, tr) = split_rigid(&scene.camera.world_to_view)?;
    let eye = -(r.transpose() * tr);

    enum Outcome {
        Kept(HologramGaussian, bool),
        Behind,
        Transparent,
    }
    let outcomes: Vec<Outcome> = gaussians
        .par_iter()
        .enumerate()
        .map(|(i, g)| -> Result<Outcome> {
            let view = view_transform(g, &scene.camera.world_to_view)?;
            if !(view.mean.z > MIN_VIEW_DEPTH) {
                return Ok(Outcome::Behind);
            }
            let dir = Vector3::from(g.mean) - eye;
            let dir = if dir.norm() > 0.0 { dir } else { Vector3::z() };
            let mut logit = g.opacity_logit;
            if let Some(rest) = &g.sh_opacity {
                let mut coeffs = Vec::with_capacity(rest.len() + 1);
                coeffs.push(0.0);
                coeffs.extend_from_slice(rest);
                logit += sh_eval(&coeffs, &dir)?;
            }
            let opacity = sigmoid(logit).clamp(0.0, MAX_OPACITY);
            if opacity < scene.t_eps {
                return Ok(Outcome::Transparent);
            }
            let color = (0.5 + sh_eval(&g.sh_color[channel], &dir)?).clamp(0.0, 1.0);
            let ray = project_to_ray_space(&view, &scene.camera)?;
            let (rot_r, scales) = lift_covariance(&ray.covariance)?;
            let p = to_hologram_space(&ray.mu, &rot_r, scales, &t)?;
            Ok(Outcome::Kept(
                HologramGaussian {
                    mu: p.mu,
                    rotation: p.rotation,
                    scales: p.scales,
                    color,
                    opacity,
                    id: i,
                },
                p.depth_clamped,
            ))
        })
        .collect::<Result<_>>()?;

    let mut stats = TransformStats {
        input: gaussians.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(g, clamped) => {
                stats.depth_clamped += clamped as usize;
                kept.push(g);
            }
            Outcome::Behind => stats.behind_camera += 1,
            Outcome::Transparent => stats.transparent += 1,
        }
    }
    if stats.depth_clamped > 0 {
        log::warn!("{} gaussians clamped to the hologram depth range", stats.depth_clamped);
    }
    if kept.is_empty() {
        return Err(Error::EmptyScene);
    }
    kept.sort_by(|a, b| a.mu.z.total_cmp(&b.mu.z));
    Ok((kept, stats))
}
