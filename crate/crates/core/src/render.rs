//! Differentiable splatting: EWA projection, sorted front-to-back alpha
//! compositing and the matching analytic backward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::gaussian::{
    normalized_rotation, Gaussian, GaussianCloud, COLOR, LOG_SCALE, MAX_CONDITION_NUMBER, OPACITY,
    PARAMS_PER_GAUSSIAN, POSITION, ROTATION,
};
use crate::image::Image;
use crate::math::{self, exp, quat_to_mat, sigmoid, sqrt, Mat2, Mat3, Vec3};

/// View-space depth below which a Gaussian is culled.
pub const NEAR_PLANE: f64 = 0.01;
/// Screen-space dilation added to every projected covariance, in px².
pub const LOW_PASS: f64 = 0.3;
pub const TILE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    /// Bin Gaussians into 16×16 tiles using their 3σ screen radius.
    pub tile_culling: bool,
    /// Stop compositing a pixel once transmittance falls below this value.
    pub early_stop_transmittance: Option<f64>,
    /// Skip a Gaussian at a pixel when its alpha there is below this value.
    pub min_splat_alpha: Option<f64>,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self { tile_culling: true, early_stop_transmittance: Some(1e-4), min_splat_alpha: Some(1.0 / 255.0) }
    }
}

impl RenderSettings {
    /// No culling, no early exit, no per-splat cutoff: the plain compositing sum.
    pub fn exact() -> Self {
        Self { tile_culling: false, early_stop_transmittance: None, min_splat_alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Image,
    /// Accumulated opacity `1 − T_final` per pixel.
    pub alpha: Vec<f64>,
}

/// Screen-space footprint of one Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    pub mean2d: [f64; 2],
    pub cov2d: Mat2,
    pub depth: f64,
}

/// Projects a Gaussian with the local affine (EWA) approximation of the
/// perspective map: `cov2d = J W Σ Wᵀ Jᵀ + 0.3·I`.
pub fn project_gaussian(g: &Gaussian, cam: &Camera) -> Result<Projected> {
    let p = project_full(g, cam)?;
    Ok(Projected { mean2d: p.mean2d, cov2d: p.cov2d, depth: p.view[2] })
}

/// Intermediates of the projection kept for the backward pass.
#[derive(Debug, Clone, Copy)]
struct ProjectionCache {
    view: Vec3,
    jac: [[f64; 3]; 2],
    view_cov: Mat3,
    rot: Mat3,
    scale: Vec3,
    quat: [f64; 4],
    quat_norm: f64,
    mean2d: [f64; 2],
    cov2d: Mat2,
    conic: Mat2,
    opacity: f64,
    color: Vec3,
    radius: f64,
}

fn project_full(g: &Gaussian, cam: &Camera) -> Result<ProjectionCache> {
    if !g.is_finite() {
        return Err(Error::InvalidParameter("non-finite gaussian parameter".into()));
    }
    let view = cam.world_to_view(&g.position);
    if view[2] <= NEAR_PLANE {
        return Err(Error::CulledBehindCamera);
    }
    let quat_norm = sqrt(g.rotation.iter().map(|v| v * v).sum::<f64>());
    let quat = normalized_rotation(&g.rotation)?;
    let scale = g.scale();
    let (smin, smax) = (scale[0].min(scale[1]).min(scale[2]), scale[0].max(scale[1]).max(scale[2]));
    if !(smin > 0.0) || (smax / smin) * (smax / smin) >= MAX_CONDITION_NUMBER {
        return Err(Error::SingularCovariance);
    }
    let rot = quat_to_mat(&quat);
    let mut sigma = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sigma[i][j] = (0..3).map(|k| rot[i][k] * scale[k] * scale[k] * rot[j][k]).sum();
        }
    }
    let w = cam.rotation();
    let view_cov = math::mat3_mul(&math::mat3_mul(w, &sigma), &math::mat3_transpose(w));
    let (f, _) = cam.focal();
    let (cx, cy) = cam.principal_point();
    let (tx, ty, tz) = (view[0], view[1], view[2]);
    let jac = [[f / tz, 0.0, -f * tx / (tz * tz)], [0.0, f / tz, -f * ty / (tz * tz)]];
    let mut cov2d = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += jac[a][i] * view_cov[i][j] * jac[b][j];
                }
            }
            cov2d[a][b] = s;
        }
    }
    let off = 0.5 * (cov2d[0][1] + cov2d[1][0]);
    cov2d[0][1] = off;
    cov2d[1][0] = off;
    cov2d[0][0] += LOW_PASS;
    cov2d[1][1] += LOW_PASS;
    let conic = math::mat2_inverse(&cov2d).ok_or(Error::SingularCovariance)?;
    let mid = 0.5 * (cov2d[0][0] + cov2d[1][1]);
    let lambda_max = mid + sqrt((mid * mid - math::mat2_det(&cov2d)).max(0.0));
    Ok(ProjectionCache {
        view,
        jac,
        view_cov,
        rot,
        scale,
        quat,
        quat_norm,
        mean2d: [f * tx / tz + cx, f * ty / tz + cy],
        cov2d,
        conic,
        opacity: sigmoid(g.opacity_logit),
        color: g.clamped_color(),
        radius: 3.0 * sqrt(lambda_max),
    })
}

/// Per-view rasterization state shared by the forward and backward passes.
struct Raster {
    settings: RenderSettings,
    /// Visible Gaussians in front-to-back order: (cloud index, projection).
    visible: Vec<(usize, ProjectionCache)>,
    /// Per tile, indices into `visible` (already depth ordered).
    tiles: Vec<Vec<u32>>,
    tiles_x: usize,
}

struct Contribution {
    slot: u32,
    sigma: f64,
    gauss: f64,
    transmittance: f64,
    delta: [f64; 2],
}

impl Raster {
    fn new(cloud: &GaussianCloud, cam: &Camera, settings: RenderSettings) -> Result<Self> {
        let mut visible = Vec::with_capacity(cloud.len());
        for (i, g) in cloud.gaussians.iter().enumerate() {
            match project_full(g, cam) {
                Ok(p) => visible.push((i, p)),
                Err(Error::CulledBehindCamera) | Err(Error::SingularCovariance) => {}
                Err(e) => return Err(e),
            }
        }
        // depth, ties by index: stable sort over index-ordered input
        visible.sort_by(|a, b| a.1.view[2].total_cmp(&b.1.view[2]));

        let tiles_x = cam.width.div_ceil(TILE_SIZE);
        let tiles_y = cam.height.div_ceil(TILE_SIZE);
        let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
        if settings.tile_culling {
            for (slot, (_, p)) in visible.iter().enumerate() {
                // pixel centres at i + 0.5 within the 3σ box
                let lo_x = p.mean2d[0] - p.radius - 0.5;
                let hi_x = p.mean2d[0] + p.radius - 0.5;
                let lo_y = p.mean2d[1] - p.radius - 0.5;
                let hi_y = p.mean2d[1] + p.radius - 0.5;
                if hi_x < 0.0 || hi_y < 0.0 || lo_x > (cam.width - 1) as f64 || lo_y > (cam.height - 1) as f64 {
                    continue;
                }
                let px0 = math::ceil(lo_x.max(0.0)) as usize;
                let px1 = (math::floor(hi_x) as usize).min(cam.width - 1);
                let py0 = math::ceil(lo_y.max(0.0)) as usize;
                let py1 = (math::floor(hi_y) as usize).min(cam.height - 1);
                if px0 > px1 || py0 > py1 {
                    continue;
                }
                for ty in py0 / TILE_SIZE..=py1 / TILE_SIZE {
                    for tx in px0 / TILE_SIZE..=px1 / TILE_SIZE {
                        tiles[ty * tiles_x + tx].push(slot as u32);
                    }
                }
            }
        } else {
            let all: Vec<u32> = (0..visible.len() as u32).collect();
            for t in tiles.iter_mut() {
                t.clone_from(&all);
            }
        }
        Ok(Self { settings, visible, tiles, tiles_x })
    }

    /// Composites one pixel, pushing every contributing splat into `out`.
    /// Returns (accumulated color, final transmittance).
    fn composite(&self, x: usize, y: usize, out: &mut Vec<Contribution>) -> (Vec3, f64) {
        out.clear();
        let tile = &self.tiles[(y / TILE_SIZE) * self.tiles_x + x / TILE_SIZE];
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut color = [0.0; 3];
        let mut t = 1.0;
        for &slot in tile {
            let p = &self.visible[slot as usize].1;
            let d = [px - p.mean2d[0], py - p.mean2d[1]];
            let power = -0.5 * (p.conic[0][0] * d[0] * d[0] + 2.0 * p.conic[0][1] * d[0] * d[1] + p.conic[1][1] * d[1] * d[1]);
            let gauss = exp(power);
            let sigma = p.opacity * gauss;
            if let Some(min) = self.settings.min_splat_alpha {
                if sigma < min {
                    continue;
                }
            }
            for c in 0..3 {
                color[c] += p.color[c] * sigma * t;
            }
            out.push(Contribution { slot, sigma, gauss, transmittance: t, delta: d });
            t *= 1.0 - sigma;
            if let Some(stop) = self.settings.early_stop_transmittance {
                if t < stop {
                    break;
                }
            }
        }
        (color, t)
    }
}

pub fn render(cloud: &GaussianCloud, cam: &Camera, background: &Vec3) -> Result<RenderedImage> {
    render_with(cloud, cam, background, RenderSettings::default())
}

pub fn render_with(
    cloud: &GaussianCloud,
    cam: &Camera,
    background: &Vec3,
    settings: RenderSettings,
) -> Result<RenderedImage> {
    let raster = Raster::new(cloud, cam, settings)?;
    let (w, h) = (cam.width, cam.height);
    let mut rgb = Image::new(w, h);
    let mut alpha = vec![0.0; w * h];
    let mut scratch = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let (c, t) = raster.composite(x, y, &mut scratch);
            rgb.set_pixel(x, y, [c[0] + t * background[0], c[1] + t * background[1], c[2] + t * background[2]]);
            alpha[y * w + x] = 1.0 - t;
        }
    }
    Ok(RenderedImage { width: w, height: h, rgb, alpha })
}

/// Gradients of a scalar loss with respect to every Gaussian parameter, in
/// the flat `PARAMS_PER_GAUSSIAN` layout, plus the densification statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderGradients {
    pub params: Vec<f64>,
    /// Accumulated `‖∂L/∂mean2d‖` (pixels) over the views a Gaussian was seen in.
    pub mean2d_grad_norm: Vec<f64>,
    /// Number of views contributing to `mean2d_grad_norm`.
    pub visits: Vec<u32>,
}

impl RenderGradients {
    pub fn zeros(count: usize) -> Self {
        Self { params: vec![0.0; count * PARAMS_PER_GAUSSIAN], mean2d_grad_norm: vec![0.0; count], visits: vec![0; count] }
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn gaussian(&self, i: usize) -> &[f64] {
        &self.params[i * PARAMS_PER_GAUSSIAN..(i + 1) * PARAMS_PER_GAUSSIAN]
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.gaussian(i)[POSITION]
    }

    pub fn log_scale(&self, i: usize) -> &[f64] {
        &self.gaussian(i)[LOG_SCALE]
    }

    pub fn rotation(&self, i: usize) -> &[f64] {
        &self.gaussian(i)[ROTATION]
    }

    pub fn color(&self, i: usize) -> &[f64] {
        &self.gaussian(i)[COLOR]
    }

    pub fn opacity_logit(&self, i: usize) -> f64 {
        self.gaussian(i)[OPACITY]
    }

    /// Adds `scale · other` to the parameter gradients and sums the statistics.
    pub fn accumulate(&mut self, other: &RenderGradients, scale: f64) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a += scale * b;
        }
        for (a, b) in self.mean2d_grad_norm.iter_mut().zip(&other.mean2d_grad_norm) {
            *a += scale.abs() * b;
        }
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.params.iter().map(|v| v * v).sum::<f64>())
    }
}

pub fn render_backward(
    cloud: &GaussianCloud,
    cam: &Camera,
    background: &Vec3,
    grad_rgb: &[f64],
) -> Result<RenderGradients> {
    render_backward_with(cloud, cam, background, grad_rgb, RenderSettings::default())
}

/// Gradient of `Σ_pixels ⟨grad_rgb, C⟩` with respect to all parameters.
/// Sorting is treated as piecewise constant.
pub fn render_backward_with(
    cloud: &GaussianCloud,
    cam: &Camera,
    background: &Vec3,
    grad_rgb: &[f64],
    settings: RenderSettings,
) -> Result<RenderGradients> {
    let (w, h) = (cam.width, cam.height);
    if grad_rgb.len() != w * h * 3 {
        return Err(Error::ShapeError { expected: w * h * 3, found: grad_rgb.len() });
    }
    let raster = Raster::new(cloud, cam, settings)?;
    let n_vis = raster.visible.len();
    // per visible slot: d color (3), d opacity (1), d mean2d (2), d conic (3: a, b, c)
    let mut d_color = vec![[0.0; 3]; n_vis];
    let mut d_alpha = vec![0.0; n_vis];
    let mut d_mean = vec![[0.0; 2]; n_vis];
    let mut d_conic = vec![[0.0; 3]; n_vis];
    let mut touched = vec![false; n_vis];
    let mut contribs = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let pix = (y * w + x) * 3;
            let dc = [grad_rgb[pix], grad_rgb[pix + 1], grad_rgb[pix + 2]];
            raster.composite(x, y, &mut contribs);
            let mut suffix = *background;
            for c in contribs.iter().rev() {
                let s = c.slot as usize;
                let p = &raster.visible[s].1;
                touched[s] = true;
                let mut d_sigma = 0.0;
                for k in 0..3 {
                    d_sigma += dc[k] * c.transmittance * (p.color[k] - suffix[k]);
                    d_color[s][k] += dc[k] * c.sigma * c.transmittance;
                    suffix[k] = p.color[k] * c.sigma + (1.0 - c.sigma) * suffix[k];
                }
                d_alpha[s] += d_sigma * c.gauss;
                let d_g = d_sigma * p.opacity * c.gauss;
                if d_g == 0.0 {
                    continue;
                }
                let ad = [
                    p.conic[0][0] * c.delta[0] + p.conic[0][1] * c.delta[1],
                    p.conic[1][0] * c.delta[0] + p.conic[1][1] * c.delta[1],
                ];
                d_mean[s][0] += d_g * ad[0];
                d_mean[s][1] += d_g * ad[1];
                d_conic[s][0] += -0.5 * d_g * c.delta[0] * c.delta[0];
                d_conic[s][1] += -0.5 * d_g * c.delta[0] * c.delta[1];
                d_conic[s][2] += -0.5 * d_g * c.delta[1] * c.delta[1];
            }
        }
    }

    let mut grads = RenderGradients::zeros(cloud.len());
    let (f, _) = cam.focal();
    let w_rot = cam.rotation();
    for (slot, (gi, p)) in raster.visible.iter().enumerate() {
        if !touched[slot] {
            continue;
        }
        let g = &cloud.gaussians[*gi];
        let out = &mut grads.params[gi * PARAMS_PER_GAUSSIAN..(gi + 1) * PARAMS_PER_GAUSSIAN];

        for k in 0..3 {
            if (0.0..=1.0).contains(&g.color[k]) {
                out[COLOR.start + k] = d_color[slot][k];
            }
        }
        out[OPACITY] = d_alpha[slot] * p.opacity * (1.0 - p.opacity);

        // conic = cov2d⁻¹  ⇒  dL/dcov2d = −A · dL/dA · A (symmetric A)
        let ga: Mat2 = [[d_conic[slot][0], d_conic[slot][1]], [d_conic[slot][1], d_conic[slot][2]]];
        let a = &p.conic;
        let mut d_cov2d = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += a[i][k] * ga[k][l] * a[l][j];
                    }
                }
                d_cov2d[i][j] = -s;
            }
        }
        // cov2d = J V Jᵀ: dL/dV = Jᵀ G J, dL/dJ = 2 G J V
        let jac = &p.jac;
        let mut d_view_cov = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for a_ in 0..2 {
                    for b_ in 0..2 {
                        s += jac[a_][i] * d_cov2d[a_][b_] * jac[b_][j];
                    }
                }
                d_view_cov[i][j] = s;
            }
        }
        let mut d_jac = [[0.0; 3]; 2];
        for a_ in 0..2 {
            for i in 0..3 {
                let mut s = 0.0;
                for b_ in 0..2 {
                    for j in 0..3 {
                        s += d_cov2d[a_][b_] * jac[b_][j] * p.view_cov[j][i];
                    }
                }
                d_jac[a_][i] = 2.0 * s;
            }
        }
        // V = W Σ Wᵀ
        let d_sigma3 = math::mat3_mul(&math::mat3_mul(&math::mat3_transpose(w_rot), &d_view_cov), w_rot);
        // Σ = M Mᵀ, M = R·diag(s)
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = p.rot[i][j] * p.scale[j];
            }
        }
        let mut d_sym = d_sigma3;
        for i in 0..3 {
            for j in 0..3 {
                d_sym[i][j] = d_sigma3[i][j] + d_sigma3[j][i];
            }
        }
        let d_m = math::mat3_mul(&d_sym, &m);
        let mut d_rot = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                d_rot[i][j] = d_m[i][j] * p.scale[j];
            }
        }
        for j in 0..3 {
            let d_s: f64 = (0..3).map(|i| d_m[i][j] * p.rot[i][j]).sum();
            out[LOG_SCALE.start + j] = d_s * p.scale[j];
        }
        let d_qhat = math::quat_to_mat_backward(&p.quat, &d_rot);
        let proj: f64 = (0..4).map(|k| d_qhat[k] * p.quat[k]).sum();
        for k in 0..4 {
            out[ROTATION.start + k] = (d_qhat[k] - p.quat[k] * proj) / p.quat_norm;
        }

        // view-space position through both the mean and the Jacobian
        let (tx, ty, tz) = (p.view[0], p.view[1], p.view[2]);
        let gm = d_mean[slot];
        let tz2 = tz * tz;
        let tz3 = tz2 * tz;
        let d_t = [
            gm[0] * f / tz - d_jac[0][2] * f / tz2,
            gm[1] * f / tz - d_jac[1][2] * f / tz2,
            -(gm[0] * f * tx + gm[1] * f * ty) / tz2 - d_jac[0][0] * f / tz2 - d_jac[1][1] * f / tz2
                + d_jac[0][2] * 2.0 * f * tx / tz3
                + d_jac[1][2] * 2.0 * f * ty / tz3,
        ];
        let d_pos = math::mat3_tvec(w_rot, &d_t);
        out[POSITION].copy_from_slice(&d_pos);

        grads.mean2d_grad_norm[*gi] = sqrt(gm[0] * gm[0] + gm[1] * gm[1]);
        grads.visits[*gi] = 1;
    }
    Ok(grads)
}
