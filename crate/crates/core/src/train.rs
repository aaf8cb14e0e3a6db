//! The optimization loop: per iteration, sample an orthogonal camera quad,
//! take one distillation step on the cloud, train the adapter on the chosen
//! view, and densify on schedule.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::adapter::{adapter_train_step, AdapterConfig, AdapterModel};
use crate::camera::{sample_orthogonal_quad, CameraQuad, CameraRanges};
use crate::csd::{anneal_time_sample, csd_gradient, Baseline, CsdConfig, CsdInputs, Method};
use crate::densify::{densify_and_prune, should_densify, DensifyConfig, DensifyReport, DensifyStats};
use crate::diffusion::{Condition, NoiseSchedule};
use crate::error::{Error, Result};
use crate::gaussian::{init_cloud, GaussianCloud};
use crate::math::Vec3;
use crate::optim::{CloudOptimizer, LearningRates};
use crate::score::{MultiViewScoreProvider, ScoreProvider};

/// Random initialization of the cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub count: usize,
    pub radius: f64,
    pub opacity: f64,
    pub color: Vec3,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { count: 1000, radius: 0.5, opacity: 0.1, color: [0.5; 3] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub csd: CsdConfig,
    pub rates: LearningRates,
    pub densify: Option<DensifyConfig>,
    pub cameras: CameraRanges,
    pub init: InitConfig,
    pub adapter: AdapterConfig,
    /// Consecutive-or-not rejected steps tolerated before aborting.
    pub rejected_budget: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            csd: CsdConfig::default(),
            rates: LearningRates::default(),
            densify: Some(DensifyConfig::default()),
            cameras: CameraRanges::default(),
            init: InitConfig::default(),
            adapter: AdapterConfig::default(),
            rejected_budget: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.csd.validate()?;
        self.rates.validate()?;
        if let Some(d) = &self.densify {
            d.validate()?;
        }
        self.cameras.validate()
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: u64,
    pub t: f64,
    pub view: usize,
    pub resolution: usize,
    pub lambda_term_norm: f64,
    pub single_term_norm: f64,
    /// Denoising loss of the adapter step, when one ran.
    pub adapter_loss: Option<f64>,
    pub gaussians: usize,
}

/// Receives progress from [`run_optimization`].
pub trait Observer {
    /// Called after every completed iteration with the updated state.
    fn on_iteration(&mut self, _record: &IterationRecord, _cloud: &GaussianCloud, _adapter: &AdapterModel) -> Result<()> {
        Ok(())
    }

    /// Called after densify and prune with the resulting cloud.
    fn on_densify(&mut self, _iter: u64, _report: &DensifyReport, _cloud: &GaussianCloud) -> Result<()> {
        Ok(())
    }

    fn on_rejected(&mut self, _iter: u64, _error: &Error) {}
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {}

/// Providers wired into a run.
pub struct Providers<'a> {
    pub single: &'a dyn ScoreProvider,
    pub multi: &'a dyn MultiViewScoreProvider,
}

pub struct RunOutput {
    pub cloud: GaussianCloud,
    pub adapter: AdapterModel,
    pub rejected: usize,
}

/// Runs the optimization from the configured random initialization.
pub fn run_optimization(
    config: &TrainConfig,
    providers: &Providers<'_>,
    schedule: &NoiseSchedule,
    observer: &mut dyn Observer,
) -> Result<RunOutput> {
    config.validate()?;
    let init = &config.init;
    let cloud = init_cloud(init.count, init.radius, init.opacity, init.color, config.csd.seed)?;
    run_from(cloud, config, providers, schedule, observer)
}

/// Runs the optimization starting from `cloud`.
pub fn run_from(
    mut cloud: GaussianCloud,
    config: &TrainConfig,
    providers: &Providers<'_>,
    schedule: &NoiseSchedule,
    observer: &mut dyn Observer,
) -> Result<RunOutput> {
    config.validate()?;
    let csd = &config.csd;
    // the stream is decorrelated from the initialization, which also uses the seed
    let mut rng = ChaCha8Rng::seed_from_u64(csd.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adapter = AdapterModel::new(AdapterConfig { seed: csd.seed, ..config.adapter })?;
    let mut adapter_state = adapter.optimizer();
    let mut optimizer = CloudOptimizer::new(cloud.len(), config.rates);
    let mut stats = DensifyStats::new(&cloud);
    let mut rejected = 0usize;
    let uses_adapter = csd.method == Method::Csd;

    for iter in 0..csd.total_iters {
        let t = anneal_time_sample(&mut rng, iter, csd);
        let res = csd.resolution.resolution(iter, csd.total_iters);
        let quad: CameraQuad = sample_orthogonal_quad(&mut rng, &config.cameras, res, res)?;
        let view = rng.random_range(0..4usize);
        let px = res * res * 3;
        let eps: Vec<Vec<f64>> = (0..4).map(|_| (0..px).map(|_| rng.sample(StandardNormal)).collect()).collect();

        let inputs = CsdInputs {
            single: providers.single,
            baseline: Baseline::Provider(&adapter),
            multi: providers.multi,
            t,
            eps: &eps,
            view,
        };
        let step = csd_gradient(&cloud, &quad, &inputs, csd, schedule);
        let step = match step.and_then(|s| {
            if s.update.grads.is_finite() {
                Ok(s)
            } else {
                Err(Error::RejectedStep("non-finite cloud gradient".into()))
            }
        }) {
            Ok(s) => s,
            Err(e @ Error::RejectedStep(_)) => {
                reject(&mut rejected, config.rejected_budget, iter, e, observer)?;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Err(e) = optimizer.step(&mut cloud, &step.update.grads, iter) {
            match e {
                Error::RejectedStep(_) => {
                    reject(&mut rejected, config.rejected_budget, iter, e, observer)?;
                    continue;
                }
                e => return Err(e),
            }
        }
        stats.accumulate(&step.update.grads)?;

        let mut adapter_loss = None;
        if uses_adapter && (iter + 1) % csd.adapter_every == 0 {
            let x0 = &step.renders[view].as_ref().expect("single view rendered").rgb;
            let cond = Condition::with_camera(csd.prompt, quad.cameras[view]);
            match adapter_train_step(&mut adapter, &mut adapter_state, x0, t, &eps[view], &cond, csd.adapter_lr, schedule) {
                Ok(loss) => adapter_loss = Some(loss),
                Err(e @ Error::RejectedStep(_)) => reject(&mut rejected, config.rejected_budget, iter, e, observer)?,
                Err(e) => return Err(e),
            }
        }

        let record = IterationRecord {
            iter: iter + 1,
            t,
            view,
            resolution: res,
            lambda_term_norm: step.update.multi_norm,
            single_term_norm: step.update.single_norm,
            adapter_loss,
            gaussians: cloud.len(),
        };
        observer.on_iteration(&record, &cloud, &adapter)?;

        if let Some(dcfg) = &config.densify {
            if should_densify(iter + 1, dcfg) {
                let report = densify_and_prune(&mut cloud, &mut stats, dcfg, &mut rng)?;
                optimizer.remap(&report.sources);
                observer.on_densify(iter + 1, &report, &cloud)?;
            }
        }
    }
    Ok(RunOutput { cloud, adapter, rejected })
}

fn reject(count: &mut usize, budget: usize, iter: u64, e: Error, observer: &mut dyn Observer) -> Result<()> {
    *count += 1;
    observer.on_rejected(iter + 1, &e);
    if *count > budget {
        return Err(Error::Aborted { rejected: *count, last: e.to_string() });
    }
    Ok(())
}

/// Mean per-view L2 distance between renders of `cloud` and `targets`.
pub fn mean_view_distance(
    cloud: &GaussianCloud,
    quad: &CameraQuad,
    targets: &[crate::image::Image],
    background: &Vec3,
) -> Result<f64> {
    if targets.len() != 4 {
        return Err(Error::ShapeError { expected: 4, found: targets.len() });
    }
    let mut total = 0.0;
    for (cam, target) in quad.cameras.iter().zip(targets) {
        let img = crate::render::render(cloud, cam, background)?;
        if !img.rgb.same_shape(target) {
            return Err(Error::InvalidParameter(format!("target shape does not match camera {}x{}", cam.width, cam.height)));
        }
        total += img.rgb.l2_distance(target);
    }
    Ok(total / 4.0)
}
