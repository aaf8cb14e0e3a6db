//! Score distillation gradients: the single-view SDS update and the coupled
//! update that adds a λ-weighted multi-view joint residual.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::camera::{Camera, CameraQuad};
use crate::diffusion::{cfg_combine, forward_diffuse, Condition, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gaussian::GaussianCloud;
use crate::image::Image;
use crate::math::{log, sqrt, Vec3};
use crate::render::{render_backward_with, render_with, RenderGradients, RenderSettings, RenderedImage};
use crate::score::{MultiViewScoreProvider, ScoreProvider};

/// Which terms of the update are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Single-view adapter residual plus the λ-weighted joint residual.
    Csd,
    /// Single-view residual against the added noise, no joint term.
    Sds,
    /// Joint residual only.
    MultiViewOnly,
}

/// Uniform timestep ranges before and after the switch iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSchedule {
    pub initial: (f64, f64),
    pub annealed: (f64, f64),
    /// Iteration at which sampling switches to `annealed`; `None` means
    /// half of the total.
    pub switch_iter: Option<u64>,
}

impl Default for TimeSchedule {
    fn default() -> Self {
        Self { initial: (0.02, 0.98), annealed: (0.02, 0.50), switch_iter: None }
    }
}

/// Render resolution as a function of training progress.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionSchedule {
    pub base: usize,
    /// `(fraction of total iterations, resolution)` pairs in increasing order.
    pub milestones: Vec<(f64, usize)>,
    pub cap: usize,
}

impl Default for ResolutionSchedule {
    fn default() -> Self {
        Self { base: 128, milestones: vec![(0.1, 256), (0.3, 512), (0.5, 1024)], cap: 128 }
    }
}

impl ResolutionSchedule {
    pub fn fixed(res: usize) -> Self {
        Self { base: res, milestones: Vec::new(), cap: res }
    }

    pub fn resolution(&self, iter: u64, total: u64) -> usize {
        let progress = if total == 0 { 0.0 } else { iter as f64 / total as f64 };
        let mut res = self.base;
        for (frac, r) in &self.milestones {
            if progress >= *frac {
                res = *r;
            }
        }
        res.min(self.cap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsdConfig {
    pub method: Method,
    pub lambda: f64,
    /// Permits λ outside `[0.1, 1.0]`.
    pub ablation: bool,
    pub guidance_scale: f64,
    pub prompt: u32,
    pub time: TimeSchedule,
    pub total_iters: u64,
    /// Adapter update period `k`.
    pub adapter_every: u64,
    pub adapter_lr: f64,
    pub resolution: ResolutionSchedule,
    pub background: Vec3,
    pub render: RenderSettings,
    pub seed: u64,
}

impl Default for CsdConfig {
    fn default() -> Self {
        Self {
            method: Method::Csd,
            lambda: 0.5,
            ablation: false,
            guidance_scale: 7.5,
            prompt: 0,
            time: TimeSchedule::default(),
            total_iters: 4000,
            adapter_every: 1,
            adapter_lr: 1e-3,
            resolution: ResolutionSchedule::default(),
            background: [1.0; 3],
            render: RenderSettings::default(),
            seed: 0,
        }
    }
}

impl CsdConfig {
    pub fn switch_iter(&self) -> u64 {
        self.time.switch_iter.unwrap_or(self.total_iters / 2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if !self.lambda.is_finite() || (!self.ablation && !(0.1..=1.0).contains(&self.lambda)) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0.1, 1.0] outside ablation mode, got {}",
                self.lambda
            )));
        }
        if self.lambda < 0.0 {
            return bad("lambda must be non-negative");
        }
        if !(self.guidance_scale >= 0.0) {
            return bad("guidance scale must be non-negative");
        }
        for (lo, hi) in [self.time.initial, self.time.annealed] {
            if !(lo > 0.0 && hi < 1.0 && lo < hi) {
                return bad("t ranges must be non-empty subsets of (0, 1)");
            }
        }
        if self.switch_iter() > self.total_iters {
            return bad("switch iteration exceeds total iterations");
        }
        if self.adapter_every == 0 {
            return bad("adapter update period must be at least 1");
        }
        if !(self.adapter_lr >= 0.0) {
            return bad("adapter learning rate must be non-negative");
        }
        if self.resolution.base == 0 || self.resolution.cap == 0 {
            return bad("resolutions must be positive");
        }
        Ok(())
    }
}

/// `t ~ U(initial)` before the switch iteration, `U(annealed)` from it on.
pub fn anneal_time_sample<R: Rng + ?Sized>(rng: &mut R, iter: u64, config: &CsdConfig) -> f64 {
    let (lo, hi) = if iter < config.switch_iter() { config.time.initial } else { config.time.annealed };
    rng.random_range(lo..hi)
}

/// Parameter gradient of one distillation step plus pixel-space residual
/// norms for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillUpdate {
    pub grads: RenderGradients,
    /// `‖ω(ε̂ − baseline)‖` on the single view.
    pub single_norm: f64,
    /// `‖ωλ(ε_M − ε)‖` over the four views.
    pub multi_norm: f64,
}

/// The baseline subtracted from the guided single-view prediction.
#[derive(Clone, Copy)]
pub enum Baseline<'a> {
    /// The noise that was added (SDS).
    AddedNoise,
    /// A provider estimating the score of rendered images.
    Provider(&'a dyn ScoreProvider),
}

fn l2(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

/// `ω(t)(ε̂(x_t, t, y^v) − baseline)` on one rendered view.
#[allow(clippy::too_many_arguments)]
fn single_residual(
    x0: &Image,
    cam: &Camera,
    provider: &dyn ScoreProvider,
    baseline: Baseline<'_>,
    t: f64,
    eps: &[f64],
    schedule: &NoiseSchedule,
    guidance: f64,
    prompt: u32,
) -> Result<Vec<f64>> {
    let x_t = Image { width: x0.width, height: x0.height, data: forward_diffuse(&x0.data, t, eps, schedule)? };
    let cond = Condition::with_camera(prompt, *cam);
    let eps_c = provider.predict_noise(&x_t, t, &cond, schedule)?;
    let guided = if guidance == 0.0 {
        eps_c.data
    } else {
        let eps_u = provider.predict_noise(&x_t, t, &Condition::unconditional(), schedule)?;
        cfg_combine(&eps_c.data, &eps_u.data, guidance)?
    };
    let w = schedule.weight(t);
    match baseline {
        Baseline::AddedNoise => Ok(guided.iter().zip(eps).map(|(g, e)| w * (g - e)).collect()),
        Baseline::Provider(p) => {
            let b = p.predict_noise(&x_t, t, &cond, schedule)?;
            Ok(guided.iter().zip(&b.data).map(|(g, e)| w * (g - e)).collect())
        }
    }
}

/// Single-view score distillation update at `(t, ε)`.
#[allow(clippy::too_many_arguments)]
pub fn sds_gradient(
    cloud: &GaussianCloud,
    cam: &Camera,
    provider: &dyn ScoreProvider,
    t: f64,
    eps: &[f64],
    schedule: &NoiseSchedule,
    config: &CsdConfig,
) -> Result<DistillUpdate> {
    check_t(t)?;
    let x0 = render_with(cloud, cam, &config.background, config.render)?;
    let resid = single_residual(
        &x0.rgb,
        cam,
        provider,
        Baseline::AddedNoise,
        t,
        eps,
        schedule,
        config.guidance_scale,
        config.prompt,
    )?;
    let mut grads = RenderGradients::zeros(cloud.len());
    grads.accumulate(&render_backward_with(cloud, cam, &config.background, &resid, config.render)?, 1.0);
    Ok(DistillUpdate { grads, single_norm: l2(&resid), multi_norm: 0.0 })
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")))
    }
}

/// Renders the views of `quad` whose flag is set.
pub fn render_views(
    cloud: &GaussianCloud,
    quad: &CameraQuad,
    needed: [bool; 4],
    background: &Vec3,
    settings: RenderSettings,
) -> Result<Vec<Option<RenderedImage>>> {
    let one = |k: usize| -> Result<Option<RenderedImage>> {
        if needed[k] {
            render_with(cloud, &quad.cameras[k], background, settings).map(Some)
        } else {
            Ok(None)
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..4).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..4).map(one).collect()
    }
}

fn backward_views(
    cloud: &GaussianCloud,
    quad: &CameraQuad,
    grad_rgb: &[Option<Vec<f64>>],
    background: &Vec3,
    settings: RenderSettings,
) -> Result<RenderGradients> {
    let one = |k: usize| -> Result<Option<RenderGradients>> {
        match &grad_rgb[k] {
            Some(g) => render_backward_with(cloud, &quad.cameras[k], background, g, settings).map(Some),
            None => Ok(None),
        }
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Option<RenderGradients>> = {
        use rayon::prelude::*;
        (0..4).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Option<RenderGradients>> = (0..4).map(one).collect::<Result<_>>()?;
    // fixed summation order keeps results independent of thread count
    let mut total = RenderGradients::zeros(cloud.len());
    for g in parts.iter().flatten() {
        total.accumulate(g, 1.0);
    }
    Ok(total)
}

/// Providers and noise for one coupled update.
pub struct CsdInputs<'a> {
    pub single: &'a dyn ScoreProvider,
    pub baseline: Baseline<'a>,
    pub multi: &'a dyn MultiViewScoreProvider,
    pub t: f64,
    /// Independent noise per quad view; the single-view term reuses slot `view`.
    pub eps: &'a [Vec<f64>],
    /// Index of the quad member carrying the single-view term.
    pub view: usize,
}

/// Coupled update and the renders it was computed from.
pub struct CsdStep {
    pub update: DistillUpdate,
    pub renders: Vec<Option<RenderedImage>>,
}

/// Coupled score distillation update:
/// `ω[(ε̂(x_tⁱ) − ε_φ(x_tⁱ)) ∂x0ⁱ/∂θ + λ(ε_M(x̃_t) − ε) ∂x̃0/∂θ]`.
pub fn csd_gradient(
    cloud: &GaussianCloud,
    quad: &CameraQuad,
    inputs: &CsdInputs<'_>,
    config: &CsdConfig,
    schedule: &NoiseSchedule,
) -> Result<CsdStep> {
    check_t(inputs.t)?;
    let i = inputs.view;
    if i >= 4 {
        return Err(Error::InvalidParameter(format!("view index {i} outside the quad")));
    }
    if inputs.eps.len() != 4 {
        return Err(Error::ShapeError { expected: 4, found: inputs.eps.len() });
    }
    let (with_single, with_multi) = match config.method {
        Method::Csd => (true, config.lambda != 0.0),
        Method::Sds => (true, false),
        Method::MultiViewOnly => (false, config.lambda != 0.0),
    };
    let mut needed = [with_multi; 4];
    needed[i] |= with_single;
    let renders = render_views(cloud, quad, needed, &config.background, config.render)?;
    let px = quad.cameras[0].width * quad.cameras[0].height * 3;
    for e in inputs.eps {
        if e.len() != px {
            return Err(Error::ShapeError { expected: px, found: e.len() });
        }
    }
    let mut grad_rgb: Vec<Option<Vec<f64>>> = vec![None, None, None, None];
    let mut multi_norm = 0.0;
    if with_multi {
        let x_t = renders
            .iter()
            .zip(inputs.eps)
            .map(|(r, e)| {
                let r = r.as_ref().expect("rendered");
                Ok(Image { width: r.width, height: r.height, data: forward_diffuse(&r.rgb.data, inputs.t, e, schedule)? })
            })
            .collect::<Result<Vec<_>>>()?;
        let pred =
            inputs.multi.predict_noise_multi(&x_t, inputs.t, &Condition::prompt(config.prompt), quad, schedule)?;
        if pred.len() != 4 {
            return Err(Error::ShapeError { expected: 4, found: pred.len() });
        }
        let w = schedule.weight(inputs.t) * config.lambda;
        let mut sq = 0.0;
        for k in 0..4 {
            if pred[k].data.len() != px {
                return Err(Error::ShapeError { expected: px, found: pred[k].data.len() });
            }
            let g: Vec<f64> = pred[k].data.iter().zip(&inputs.eps[k]).map(|(p, e)| w * (p - e)).collect();
            sq += g.iter().map(|v| v * v).sum::<f64>();
            grad_rgb[k] = Some(g);
        }
        multi_norm = sqrt(sq);
    }
    let mut single_norm = 0.0;
    if with_single {
        let baseline = if config.method == Method::Sds { Baseline::AddedNoise } else { inputs.baseline };
        let x0 = &renders[i].as_ref().expect("rendered").rgb;
        let resid = single_residual(
            x0,
            &quad.cameras[i],
            inputs.single,
            baseline,
            inputs.t,
            &inputs.eps[i],
            schedule,
            config.guidance_scale,
            config.prompt,
        )?;
        single_norm = l2(&resid);
        grad_rgb[i] = Some(match grad_rgb[i].take() {
            Some(m) => m.iter().zip(&resid).map(|(a, b)| a + b).collect(),
            None => resid,
        });
    }
    let grads = backward_views(cloud, quad, &grad_rgb, &config.background, config.render)?;
    Ok(CsdStep { update: DistillUpdate { grads, single_norm, multi_norm }, renders })
}

/// Product-rule decomposition of a joint KL over a finite grid `A × B`:
/// `KL(q(a,b)‖p(a,b))` against `KL(q(a)‖p(a)) + E_q(a) KL(q(b|a)‖p(b|a))`.
/// Distributions are row-major `na × nb`. Returns `(lhs, rhs, |lhs − rhs|)`.
pub fn kl_product_decomposition_check(q: &[f64], p: &[f64], na: usize, nb: usize) -> Result<(f64, f64, f64)> {
    for (name, d) in [("q", q), ("p", p)] {
        if d.len() != na * nb {
            return Err(Error::ShapeError { expected: na * nb, found: d.len() });
        }
        if let Some(k) = d.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidDistribution(format!("{name} has non-positive mass at cell {k}")));
        }
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("{name} sums to {total}")));
        }
    }
    let lhs: f64 = q.iter().zip(p).map(|(q, p)| q * log(q / p)).sum();
    let mut rhs = 0.0;
    for a in 0..na {
        let qa: f64 = q[a * nb..(a + 1) * nb].iter().sum();
        let pa: f64 = p[a * nb..(a + 1) * nb].iter().sum();
        rhs += qa * log(qa / pa);
        let cond: f64 = (0..nb)
            .map(|b| {
                let qb = q[a * nb + b] / qa;
                let pb = p[a * nb + b] / pa;
                qb * log(qb / pb)
            })
            .sum();
        rhs += qa * cond;
    }
    Ok((lhs, rhs, (lhs - rhs).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anneal_ranges() {
        let cfg = CsdConfig { total_iters: 4000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(cfg.switch_iter(), 2000);
        for _ in 0..1000 {
            let t = anneal_time_sample(&mut rng, 0, &cfg);
            assert!((0.02..=0.98).contains(&t));
            let t = anneal_time_sample(&mut rng, 2000, &cfg);
            assert!((0.02..=0.50).contains(&t));
        }
    }

    #[test]
    fn anneal_covers_range() {
        let cfg = CsdConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ts: Vec<f64> = (0..10_000).map(|_| anneal_time_sample(&mut rng, 5, &cfg)).collect();
        let lo = ts.iter().cloned().fold(1.0, f64::min);
        let hi = ts.iter().cloned().fold(0.0, f64::max);
        assert!(lo - 0.02 < 0.01 && 0.98 - hi < 0.01);
    }

    #[test]
    fn config_validation() {
        assert!(CsdConfig::default().validate().is_ok());
        assert!(CsdConfig { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(CsdConfig { lambda: 0.0, ablation: true, ..Default::default() }.validate().is_ok());
        assert!(CsdConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
        let bad_t = TimeSchedule { initial: (0.0, 0.5), ..Default::default() };
        assert!(CsdConfig { time: bad_t, ..Default::default() }.validate().is_err());
        let late = TimeSchedule { switch_iter: Some(5000), ..Default::default() };
        assert!(CsdConfig { time: late, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn resolution_schedule() {
        let s = ResolutionSchedule { cap: 4096, ..Default::default() };
        assert_eq!(s.resolution(0, 1000), 128);
        assert_eq!(s.resolution(100, 1000), 256);
        assert_eq!(s.resolution(299, 1000), 256);
        assert_eq!(s.resolution(300, 1000), 512);
        assert_eq!(s.resolution(999, 1000), 1024);
        assert_eq!(ResolutionSchedule::default().resolution(999, 1000), 128);
    }

    #[test]
    fn kl_identity_trivial_cases() {
        let q = [0.1, 0.2, 0.3, 0.4];
        let (l, r, g) = kl_product_decomposition_check(&q, &q, 2, 2).unwrap();
        assert_eq!((l, r, g), (0.0, 0.0, 0.0));
        // independent with matching marginal over A: only the B term remains
        let (qa, qb, pb) = ([0.3, 0.7], [0.6, 0.4], [0.2, 0.8]);
        let qj: Vec<f64> = qa.iter().flat_map(|a| qb.iter().map(move |b| a * b)).collect();
        let pj: Vec<f64> = qa.iter().flat_map(|a| pb.iter().map(move |b| a * b)).collect();
        let (l, _, g) = kl_product_decomposition_check(&qj, &pj, 2, 2).unwrap();
        let kl_b: f64 = qb.iter().zip(&pb).map(|(q, p)| q * (q / p).ln()).sum();
        assert!((l - kl_b).abs() < 1e-15);
        assert!(g < 1e-15);
        assert!(matches!(kl_product_decomposition_check(&[0.5, 0.5, 0.0, 0.0], &q, 2, 2), Err(Error::InvalidDistribution(_))));
    }
}
