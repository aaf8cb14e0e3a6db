//! The noise-prediction contract and closed-form Gaussian providers.
//!
//! A provider answers `ε(x_t, t, y)`. The analytic providers model the clean
//! image distribution as a Gaussian (or mixture of Gaussians) whose mean
//! depends on the condition through a [`TargetField`], so their predictions
//! are exact `−σ_t ∇ log p_t` for the diffused density.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::camera::{CameraQuad, ViewBucket};
use crate::diffusion::{Condition, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gaussian::GaussianCloud;
use crate::image::Image;
use crate::math::{cholesky, cholesky_solve, log, log_sum_exp};
use crate::math::Vec3;
use crate::render::{render_with, RenderSettings};

/// Single-view noise prediction `ε(x_t, t, y)`.
pub trait ScoreProvider: Send + Sync {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image>;
}

/// Joint noise prediction over the four stacked views of a [`CameraQuad`].
pub trait MultiViewScoreProvider: Send + Sync {
    fn predict_noise_multi(
        &self,
        x_t: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Image>>;
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for &P {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        (**self).predict_noise(x_t, t, cond, schedule)
    }
}

impl<P: ScoreProvider + ?Sized> ScoreProvider for Box<P> {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        (**self).predict_noise(x_t, t, cond, schedule)
    }
}

impl<P: MultiViewScoreProvider + ?Sized> MultiViewScoreProvider for &P {
    fn predict_noise_multi(
        &self,
        x_t: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Image>> {
        (**self).predict_noise_multi(x_t, t, cond, quad, schedule)
    }
}

impl<P: MultiViewScoreProvider + ?Sized> MultiViewScoreProvider for Box<P> {
    fn predict_noise_multi(
        &self,
        x_t: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Image>> {
        (**self).predict_noise_multi(x_t, t, cond, quad, schedule)
    }
}

/// Maps a condition to the clean-image mean a provider is centred on.
pub trait TargetField: Send + Sync {
    fn mean(&self, cond: &Condition, width: usize, height: usize) -> Result<Image>;
}

impl<T: TargetField + ?Sized> TargetField for Box<T> {
    fn mean(&self, cond: &Condition, width: usize, height: usize) -> Result<Image> {
        (**self).mean(cond, width, height)
    }
}

/// The same image for every condition, resampled to the requested size.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTarget(pub Image);

impl ConstantTarget {
    pub fn color(rgb: [f64; 3]) -> Self {
        Self(Image::filled(1, 1, rgb))
    }
}

impl TargetField for ConstantTarget {
    fn mean(&self, _cond: &Condition, width: usize, height: usize) -> Result<Image> {
        Ok(resized(&self.0, width, height))
    }
}

/// One image per view bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketTargets {
    /// Indexed by [`ViewBucket::index`].
    pub images: [Image; 4],
}

impl TargetField for BucketTargets {
    fn mean(&self, cond: &Condition, width: usize, height: usize) -> Result<Image> {
        let view = cond.view().ok_or(Error::InvalidCondition("bucket targets need a view bucket"))?;
        Ok(resized(&self.images[view.index()], width, height))
    }
}

/// Renders of a fixed reference cloud from the condition's camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceScene {
    pub cloud: GaussianCloud,
    pub background: Vec3,
    pub settings: RenderSettings,
}

impl ReferenceScene {
    pub fn new(cloud: GaussianCloud, background: Vec3) -> Self {
        Self { cloud, background, settings: RenderSettings::default() }
    }
}

impl TargetField for ReferenceScene {
    fn mean(&self, cond: &Condition, width: usize, height: usize) -> Result<Image> {
        let cam = cond.camera().ok_or(Error::InvalidCondition("reference scene needs a camera"))?;
        let cam = cam.with_resolution(width, height)?;
        Ok(render_with(&self.cloud, &cam, &self.background, self.settings)?.rgb)
    }
}

/// Wraps a target so every viewpoint sees what the front view sees.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontFacing<T>(pub T);

impl<T: TargetField> TargetField for FrontFacing<T> {
    fn mean(&self, cond: &Condition, width: usize, height: usize) -> Result<Image> {
        let prompt = cond.prompt_id().ok_or(Error::InvalidCondition("front-facing target needs a prompt"))?;
        let front = match cond.camera() {
            Some(cam) => Condition::with_camera(prompt, cam.with_azimuth(0.0)?),
            None => Condition::with_view(prompt, ViewBucket::Front),
        };
        self.0.mean(&front, width, height)
    }
}

fn resized(img: &Image, width: usize, height: usize) -> Image {
    if img.width == width && img.height == height {
        img.clone()
    } else {
        img.resize_bilinear(width, height)
    }
}

/// Clean-image covariance Γ over the flattened `h·w·3` image.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Isotropic(f64),
    Diagonal(Vec<f64>),
    /// Row-major `dim × dim`.
    Full { dim: usize, data: Vec<f64> },
}

impl Covariance {
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Covariance::Isotropic(g) => g.is_finite() && *g >= 0.0,
            Covariance::Diagonal(d) => d.iter().all(|g| g.is_finite() && *g >= 0.0),
            Covariance::Full { dim, data } => {
                data.len() == dim * dim
                    && data.iter().all(|v| v.is_finite())
                    && (0..*dim).all(|i| (0..i).all(|j| (data[i * dim + j] - data[j * dim + i]).abs() <= 1e-12)
                        && data[i * dim + i] >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("covariance must be finite, symmetric and non-negative".into()))
        }
    }
}

/// Diffused covariance `C = α²Γ + σ²I` in a form that can be solved against.
enum Diffused {
    Diagonal(Vec<f64>),
    Factor { dim: usize, chol: Vec<f64> },
}

impl Diffused {
    fn new(cov: &Covariance, dim: usize, alpha: f64, sigma: f64) -> Result<Self> {
        let (a2, s2) = (alpha * alpha, sigma * sigma);
        let out = match cov {
            Covariance::Isotropic(g) => Diffused::Diagonal(vec![a2 * g + s2; dim]),
            Covariance::Diagonal(d) => {
                if d.len() != dim {
                    return Err(Error::ShapeError { expected: dim, found: d.len() });
                }
                Diffused::Diagonal(d.iter().map(|g| a2 * g + s2).collect())
            }
            Covariance::Full { dim: n, data } => {
                if *n != dim {
                    return Err(Error::ShapeError { expected: dim, found: *n });
                }
                let mut chol: Vec<f64> = data.iter().map(|v| a2 * v).collect();
                for i in 0..dim {
                    chol[i * dim + i] += s2;
                }
                if !cholesky(&mut chol, dim) {
                    return Err(Error::SingularCovariance);
                }
                Diffused::Factor { dim, chol }
            }
        };
        if let Diffused::Diagonal(d) = &out {
            if d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::SingularCovariance);
            }
        }
        Ok(out)
    }

    fn solve(&self, r: &[f64]) -> Vec<f64> {
        match self {
            Diffused::Diagonal(d) => r.iter().zip(d).map(|(r, c)| r / c).collect(),
            Diffused::Factor { dim, chol } => {
                let mut y = r.to_vec();
                cholesky_solve(chol, *dim, &mut y);
                y
            }
        }
    }

    fn log_det(&self) -> f64 {
        match self {
            Diffused::Diagonal(d) => d.iter().map(|c| log(*c)).sum(),
            Diffused::Factor { dim, chol } => (0..*dim).map(|i| 2.0 * log(chol[i * dim + i])).sum(),
        }
    }

    fn trace_inverse(&self) -> f64 {
        match self {
            Diffused::Diagonal(d) => d.iter().map(|c| 1.0 / c).sum(),
            Diffused::Factor { dim, chol } => (0..*dim)
                .map(|i| {
                    let mut e = vec![0.0; *dim];
                    e[i] = 1.0;
                    cholesky_solve(chol, *dim, &mut e);
                    e[i]
                })
                .sum(),
        }
    }
}

/// A Gaussian clean-image prior `N(m(y), Γ)`.
pub struct GaussianPrior {
    pub mean: Box<dyn TargetField>,
    pub covariance: Covariance,
}

impl GaussianPrior {
    pub fn new(mean: impl TargetField + 'static, covariance: Covariance) -> Result<Self> {
        covariance.validate()?;
        Ok(Self { mean: Box::new(mean), covariance })
    }

    /// Broad grey prior used for the empty prompt by default.
    pub fn broad() -> Self {
        Self { mean: Box::new(ConstantTarget::color([0.5; 3])), covariance: Covariance::Isotropic(1.0) }
    }

    /// Noise prediction and log-density of the diffused prior at `x_t`.
    fn evaluate(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<(Vec<f64>, f64)> {
        let (alpha, sigma) = schedule.coefficients(t);
        let m = self.mean.mean(cond, x_t.width, x_t.height)?;
        let d = x_t.data.len();
        let c = Diffused::new(&self.covariance, d, alpha, sigma)?;
        let r: Vec<f64> = x_t.data.iter().zip(&m.data).map(|(x, m)| x - alpha * m).collect();
        let y = c.solve(&r);
        let quad: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
        let logp = -0.5 * quad - 0.5 * c.log_det() - 0.5 * d as f64 * log(2.0 * PI);
        Ok((y.into_iter().map(|v| sigma * v).collect(), logp))
    }

    /// `KL(N(α x0, σ²I) ‖ p_t(·|y))`.
    fn kl_from(&self, x0: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<f64> {
        let (alpha, sigma) = schedule.coefficients(t);
        let m = self.mean.mean(cond, x0.width, x0.height)?;
        let d = x0.data.len();
        let c = Diffused::new(&self.covariance, d, alpha, sigma)?;
        let r: Vec<f64> = x0.data.iter().zip(&m.data).map(|(x, m)| alpha * (x - m)).collect();
        let y = c.solve(&r);
        let quad: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s2 = sigma * sigma;
        Ok(0.5 * (s2 * c.trace_inverse() + quad - d as f64 + c.log_det() - d as f64 * log(s2)))
    }
}

fn image_like(x: &Image, data: Vec<f64>) -> Image {
    Image { width: x.width, height: x.height, data }
}

/// Exact noise prediction for a Gaussian clean-image distribution.
pub struct AnalyticGaussianProvider {
    pub conditional: GaussianPrior,
    pub unconditional: GaussianPrior,
}

impl AnalyticGaussianProvider {
    pub fn new(mean: impl TargetField + 'static, covariance: Covariance) -> Result<Self> {
        Ok(Self { conditional: GaussianPrior::new(mean, covariance)?, unconditional: GaussianPrior::broad() })
    }

    pub fn with_unconditional(mut self, prior: GaussianPrior) -> Self {
        self.unconditional = prior;
        self
    }

    fn prior(&self, cond: &Condition) -> &GaussianPrior {
        if cond.is_unconditional() {
            &self.unconditional
        } else {
            &self.conditional
        }
    }

    pub fn log_density(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<f64> {
        Ok(self.prior(cond).evaluate(x_t, t, cond, schedule)?.1)
    }

    /// Closed-form `KL(N(α_t x0, σ_t²I) ‖ p_t(·|y))`.
    pub fn kl_divergence(&self, x0: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<f64> {
        self.prior(cond).kl_from(x0, t, cond, schedule)
    }
}

impl ScoreProvider for AnalyticGaussianProvider {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        Ok(image_like(x_t, self.prior(cond).evaluate(x_t, t, cond, schedule)?.0))
    }
}

/// Noise prediction for a mixture of Gaussian clean-image distributions.
pub struct AnalyticMixtureProvider {
    components: Vec<(f64, GaussianPrior)>,
    pub unconditional: GaussianPrior,
}

impl AnalyticMixtureProvider {
    pub fn new(components: Vec<(f64, GaussianPrior)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        if components.iter().any(|(w, _)| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("mixture weights must be positive".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("mixture weights must sum to 1, got {total}")));
        }
        Ok(Self { components, unconditional: GaussianPrior::broad() })
    }

    pub fn with_unconditional(mut self, prior: GaussianPrior) -> Self {
        self.unconditional = prior;
        self
    }

    pub fn components(&self) -> &[(f64, GaussianPrior)] {
        &self.components
    }

    fn evaluate(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<(Vec<f64>, f64)> {
        if cond.is_unconditional() {
            return self.unconditional.evaluate(x_t, t, cond, schedule);
        }
        let parts = self
            .components
            .iter()
            .map(|(w, prior)| prior.evaluate(x_t, t, cond, schedule).map(|(eps, lp)| (eps, log(*w) + lp)))
            .collect::<Result<Vec<_>>>()?;
        let logits: Vec<f64> = parts.iter().map(|(_, l)| *l).collect();
        let lse = log_sum_exp(&logits);
        let mut eps = vec![0.0; x_t.data.len()];
        for (e, l) in &parts {
            let r = crate::math::exp(l - lse);
            for (acc, v) in eps.iter_mut().zip(e) {
                *acc += r * v;
            }
        }
        Ok((eps, lse))
    }

    pub fn log_density(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<f64> {
        Ok(self.evaluate(x_t, t, cond, schedule)?.1)
    }
}

impl ScoreProvider for AnalyticMixtureProvider {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        Ok(image_like(x_t, self.evaluate(x_t, t, cond, schedule)?.0))
    }
}

/// Joint Gaussian over four views with covariance `K ⊗ γI`, where
/// `K = (1−ρ)I + ρ11ᵀ` couples the same pixel across views.
pub struct AnalyticJointProvider {
    pub mean: Box<dyn TargetField>,
    gamma: f64,
    rho: f64,
}

impl AnalyticJointProvider {
    pub fn new(mean: impl TargetField + 'static, gamma: f64, rho: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("joint variance must be non-negative, got {gamma}")));
        }
        // K has eigenvalues 1 − ρ (three times) and 1 + 3ρ
        if !(-1.0 / 3.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("coupling {rho} makes the joint covariance indefinite")));
        }
        Ok(Self { mean: Box::new(mean), gamma, rho })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Per-view means in quad slot order.
    pub fn means(&self, cond: &Condition, quad: &CameraQuad, width: usize, height: usize) -> Result<Vec<Image>> {
        let prompt = cond.prompt_id().ok_or(Error::InvalidCondition("joint provider needs a prompt"))?;
        quad.cameras.iter().map(|cam| self.mean.mean(&Condition::with_camera(prompt, *cam), width, height)).collect()
    }

    /// Per-pixel diffused covariance `aI + b11ᵀ`.
    fn diffused(&self, alpha: f64, sigma: f64) -> (f64, f64) {
        let a2g = alpha * alpha * self.gamma;
        (a2g * (1.0 - self.rho) + sigma * sigma, a2g * self.rho)
    }

    fn residuals(&self, views: &[Image], alpha: f64, cond: &Condition, quad: &CameraQuad) -> Result<Vec<Vec<f64>>> {
        check_views(views)?;
        let means = self.means(cond, quad, views[0].width, views[0].height)?;
        Ok(views
            .iter()
            .zip(&means)
            .map(|(x, m)| x.data.iter().zip(&m.data).map(|(x, m)| x - alpha * m).collect())
            .collect())
    }

    fn solve(a: f64, b: f64, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = b / (a + 4.0 * b);
        let n = r[0].len();
        let mut out = vec![vec![0.0; n]; 4];
        for p in 0..n {
            let sum: f64 = r.iter().map(|v| v[p]).sum();
            for j in 0..4 {
                out[j][p] = (r[j][p] - k * sum) / a;
            }
        }
        out
    }

    pub fn log_density(
        &self,
        x_t: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<f64> {
        let (alpha, sigma) = schedule.coefficients(t);
        let r = self.residuals(x_t, alpha, cond, quad)?;
        let (a, b) = self.diffused(alpha, sigma);
        let y = Self::solve(a, b, &r);
        let quad_form: f64 = r.iter().zip(&y).map(|(r, y)| r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).sum();
        let n = r[0].len() as f64;
        let log_det = n * (3.0 * log(a) + log(a + 4.0 * b));
        Ok(-0.5 * quad_form - 0.5 * log_det - 0.5 * 4.0 * n * log(2.0 * PI))
    }

    /// Closed-form `KL(N(α_t x̃0, σ_t²I) ‖ p_t(·|ṽ, y))` over the stacked views.
    pub fn kl_divergence(
        &self,
        x0: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<f64> {
        let (alpha, sigma) = schedule.coefficients(t);
        check_views(x0)?;
        let means = self.means(cond, quad, x0[0].width, x0[0].height)?;
        let r: Vec<Vec<f64>> =
            x0.iter().zip(&means).map(|(x, m)| x.data.iter().zip(&m.data).map(|(x, m)| alpha * (x - m)).collect()).collect();
        let (a, b) = self.diffused(alpha, sigma);
        let y = Self::solve(a, b, &r);
        let quad_form: f64 = r.iter().zip(&y).map(|(r, y)| r.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()).sum();
        let n = r[0].len() as f64;
        let s2 = sigma * sigma;
        // tr((aI + b11ᵀ)⁻¹) = (4 − 4b/(a+4b))/a per pixel
        let trace = n * (4.0 - 4.0 * b / (a + 4.0 * b)) / a;
        let log_det = n * (3.0 * log(a) + log(a + 4.0 * b));
        Ok(0.5 * (s2 * trace + quad_form - 4.0 * n + log_det - 4.0 * n * log(s2)))
    }
}

fn check_views(views: &[Image]) -> Result<()> {
    if views.len() != 4 {
        return Err(Error::ShapeError { expected: 4, found: views.len() });
    }
    for v in &views[1..] {
        if !v.same_shape(&views[0]) {
            return Err(Error::ShapeError { expected: views[0].data.len(), found: v.data.len() });
        }
    }
    Ok(())
}

impl MultiViewScoreProvider for AnalyticJointProvider {
    fn predict_noise_multi(
        &self,
        x_t: &[Image],
        t: f64,
        cond: &Condition,
        quad: &CameraQuad,
        schedule: &NoiseSchedule,
    ) -> Result<Vec<Image>> {
        let (alpha, sigma) = schedule.coefficients(t);
        let r = self.residuals(x_t, alpha, cond, quad)?;
        let (a, b) = self.diffused(alpha, sigma);
        if !(a > 0.0 && a + 4.0 * b > 0.0) {
            return Err(Error::SingularCovariance);
        }
        Ok(Self::solve(a, b, &r)
            .into_iter()
            .zip(x_t)
            .map(|(y, x)| image_like(x, y.into_iter().map(|v| sigma * v).collect()))
            .collect())
    }
}

/// Predicts zero noise everywhere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZeroProvider;

impl ScoreProvider for ZeroProvider {
    fn predict_noise(&self, x_t: &Image, _t: f64, _cond: &Condition, _schedule: &NoiseSchedule) -> Result<Image> {
        Ok(image_like(x_t, vec![0.0; x_t.data.len()]))
    }
}
