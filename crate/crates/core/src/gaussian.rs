//! The learnable 3D Gaussian representation.
//!
//! Each Gaussian stores unconstrained parameters: scale in log space, opacity
//! as a logit, and a (w, x, y, z) rotation quaternion kept at unit norm by the
//! optimizer. Colors are plain RGB, clamped to `[0, 1]` only when rendering.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, exp, log, quat_to_mat, sigmoid, sqrt, Mat3, Vec3};

/// Number of scalar parameters per Gaussian in the flat layout.
pub const PARAMS_PER_GAUSSIAN: usize = 14;
pub const POSITION: core::ops::Range<usize> = 0..3;
pub const LOG_SCALE: core::ops::Range<usize> = 3..6;
pub const ROTATION: core::ops::Range<usize> = 6..10;
pub const COLOR: core::ops::Range<usize> = 10..13;
pub const OPACITY: usize = 13;

/// Quaternions whose norm is further than this from 1 are rejected rather
/// than silently renormalized.
pub const ROTATION_NORM_TOLERANCE: f64 = 1e-3;
/// Covariances with a larger condition number are treated as degenerate.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub position: Vec3,
    pub log_scale: Vec3,
    /// Unit quaternion, (w, x, y, z).
    pub rotation: [f64; 4],
    pub color: Vec3,
    pub opacity_logit: f64,
}

impl Gaussian {
    pub fn new(position: Vec3, scale: Vec3, color: Vec3, opacity: f64) -> Self {
        Self {
            position,
            log_scale: [log(scale[0]), log(scale[1]), log(scale[2])],
            rotation: [1.0, 0.0, 0.0, 0.0],
            color,
            opacity_logit: math::logit(opacity),
        }
    }

    #[inline]
    pub fn scale(&self) -> Vec3 {
        [exp(self.log_scale[0]), exp(self.log_scale[1]), exp(self.log_scale[2])]
    }

    #[inline]
    pub fn max_scale(&self) -> f64 {
        let s = self.scale();
        s[0].max(s[1]).max(s[2])
    }

    #[inline]
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn clamped_color(&self) -> Vec3 {
        [self.color[0].clamp(0.0, 1.0), self.color[1].clamp(0.0, 1.0), self.color[2].clamp(0.0, 1.0)]
    }

    pub fn covariance(&self) -> Result<Mat3> {
        covariance_from_scale_rotation(&self.log_scale, &self.rotation)
    }

    pub fn is_finite(&self) -> bool {
        self.to_params().iter().all(|v| v.is_finite())
    }

    pub fn to_params(&self) -> [f64; PARAMS_PER_GAUSSIAN] {
        let mut p = [0.0; PARAMS_PER_GAUSSIAN];
        p[POSITION].copy_from_slice(&self.position);
        p[LOG_SCALE].copy_from_slice(&self.log_scale);
        p[ROTATION].copy_from_slice(&self.rotation);
        p[COLOR].copy_from_slice(&self.color);
        p[OPACITY] = self.opacity_logit;
        p
    }

    pub fn from_params(p: &[f64]) -> Self {
        Self {
            position: [p[0], p[1], p[2]],
            log_scale: [p[3], p[4], p[5]],
            rotation: [p[6], p[7], p[8], p[9]],
            color: [p[10], p[11], p[12]],
            opacity_logit: p[OPACITY],
        }
    }

    /// Renormalizes the rotation quaternion; a zero quaternion resets to identity.
    pub fn normalize_rotation(&mut self) {
        let n = sqrt(self.rotation.iter().map(|v| v * v).sum::<f64>());
        if n > 0.0 && n.is_finite() {
            for v in &mut self.rotation {
                *v /= n;
            }
        } else {
            self.rotation = [1.0, 0.0, 0.0, 0.0];
        }
    }
}

/// An ordered collection of Gaussians plus a generation counter that is
/// bumped by every structural edit (densify/prune).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian>,
    pub generation: u64,
}

impl GaussianCloud {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        Self { gaussians, generation: 0 }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Flat parameter vector, `PARAMS_PER_GAUSSIAN` values per Gaussian.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * PARAMS_PER_GAUSSIAN);
        for g in &self.gaussians {
            out.extend_from_slice(&g.to_params());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.len() * PARAMS_PER_GAUSSIAN {
            return Err(Error::ShapeError { expected: self.len() * PARAMS_PER_GAUSSIAN, found: params.len() });
        }
        for (g, p) in self.gaussians.iter_mut().zip(params.chunks_exact(PARAMS_PER_GAUSSIAN)) {
            *g = Gaussian::from_params(p);
        }
        Ok(())
    }
}

/// Builds `Σ = R · diag(s²) · Rᵀ` with `s = exp(log_scale)`.
pub fn covariance_from_scale_rotation(log_scale: &Vec3, q: &[f64; 4]) -> Result<Mat3> {
    if !log_scale.iter().chain(q.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite scale or rotation".into()));
    }
    let q = normalized_rotation(q)?;
    let r = quat_to_mat(&q);
    let s2 = [exp(2.0 * log_scale[0]), exp(2.0 * log_scale[1]), exp(2.0 * log_scale[2])];
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = r[i][0] * s2[0] * r[j][0] + r[i][1] * s2[1] * r[j][1] + r[i][2] * s2[2] * r[j][2];
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    Ok(sigma)
}

/// Returns `q/‖q‖`, or an error when `q` is not close to unit norm.
pub fn normalized_rotation(q: &[f64; 4]) -> Result<[f64; 4]> {
    let n = sqrt(q.iter().map(|v| v * v).sum::<f64>());
    if !n.is_finite() || (n - 1.0).abs() >= ROTATION_NORM_TOLERANCE {
        return Err(Error::UnnormalizedRotation { norm: n });
    }
    Ok([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

/// Evaluates the unnormalized Gaussian `exp(−½ lᵀ Σ⁻¹ l)`.
pub fn evaluate_gaussian(sigma: &Mat3, l: &Vec3) -> Result<f64> {
    let eig = math::sym3_eigenvalues(sigma);
    if !(eig[0] > 0.0) || eig[2] / eig[0] >= MAX_CONDITION_NUMBER {
        return Err(Error::SingularCovariance);
    }
    let inv = math::mat3_inverse(sigma).ok_or(Error::SingularCovariance)?;
    let m = math::dot3(l, &math::mat3_vec(&inv, l));
    Ok(exp(-0.5 * m))
}

/// Samples `count` Gaussians uniformly inside a sphere of `radius`, all with
/// the same opacity and color and an isotropic scale derived from the mean
/// nearest-neighbour spacing.
pub fn init_cloud(count: usize, radius: f64, opacity: f64, color: Vec3, seed: u64) -> Result<GaussianCloud> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    if !(opacity > 0.0 && opacity < 1.0) {
        return Err(Error::InvalidParameter("opacity must lie in (0, 1)".into()));
    }
    if !color.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidParameter("color must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vec3> = (0..count).map(|_| sample_in_ball(&mut rng, radius)).collect();
    let scale = initial_scale(&positions, radius);
    let gaussians = positions.into_iter().map(|p| Gaussian::new(p, [scale; 3], color, opacity)).collect();
    Ok(GaussianCloud::new(gaussians))
}

/// Rejection-samples a point uniformly inside the ball of the given radius.
pub fn sample_in_ball<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vec3 {
    loop {
        let p: Vec3 = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        if math::dot3(&p, &p) <= 1.0 {
            return math::scale3(&p, radius);
        }
    }
}

fn initial_scale(positions: &[Vec3], radius: f64) -> f64 {
    let spacing = if positions.len() < 2 {
        radius
    } else {
        let total: f64 = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                positions
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, q)| math::norm3(&math::sub3(p, q)))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total / positions.len() as f64
    };
    (spacing / 3.0).clamp(1e-3, 0.05)
}
