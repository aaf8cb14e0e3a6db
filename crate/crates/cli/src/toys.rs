//! Small end-to-end experiments with analytic providers standing in for
//! pretrained diffusion models.

use csd_core::adapter::{AdapterConfig, Parameterization};
use csd_core::camera::{CameraQuad, CameraRanges, Range};
use csd_core::csd::{CsdConfig, Method, ResolutionSchedule};
use csd_core::gaussian::{Gaussian, GaussianCloud};
use csd_core::image::Image;
use csd_core::score::{
    AnalyticGaussianProvider, AnalyticJointProvider, AnalyticMixtureProvider, BucketTargets, ConstantTarget, Covariance,
    GaussianPrior, ReferenceScene, TargetField,
};
use csd_core::train::{
    run_optimization, InitConfig, IterationRecord, NoObserver, Observer, Providers, RunOutput, TrainConfig,
};
use csd_core::adapter::AdapterModel;
use csd_core::{Condition, NoiseSchedule, Result};

use crate::patterns;

pub const TOY_RESOLUTION: usize = 32;
pub const TOY_GAUSSIANS: usize = 64;

/// Cameras used for toy training: a band around the equator.
pub fn toy_cameras() -> CameraRanges {
    CameraRanges {
        azimuth: Range::new(-180.0, 180.0),
        elevation: Range::new(-10.0, 30.0),
        radius: Range::new(2.0, 2.5),
        fov_y: Range::new(45.0, 55.0),
    }
}

/// Fixed evaluation views at azimuths 0, 90, 180 and 270.
pub fn eval_quad() -> CameraQuad {
    CameraQuad::canonical(15.0, 2.2, 50.0, TOY_RESOLUTION, TOY_RESOLUTION).expect("valid canonical quad")
}

pub fn toy_config(method: Method, lambda: f64, iterations: u64, seed: u64) -> TrainConfig {
    TrainConfig {
        csd: CsdConfig {
            method,
            lambda,
            ablation: true,
            guidance_scale: 0.0,
            total_iters: iterations,
            resolution: ResolutionSchedule::fixed(TOY_RESOLUTION),
            seed,
            ..Default::default()
        },
        densify: None,
        cameras: toy_cameras(),
        init: InitConfig { count: TOY_GAUSSIANS, ..Default::default() },
        adapter: AdapterConfig { grid: TOY_RESOLUTION, ..Default::default() },
        ..Default::default()
    }
}

/// A few large, saturated Gaussians: smooth images that 64 Gaussians can
/// reproduce.
pub fn reference_scene() -> GaussianCloud {
    let g = |p: [f64; 3], s: f64, c: [f64; 3]| Gaussian::new(p, [s; 3], c, 0.95);
    GaussianCloud::new(vec![
        g([0.0, 0.0, 0.0], 0.22, [0.9, 0.2, 0.1]),
        g([0.3, 0.15, 0.1], 0.15, [0.1, 0.7, 0.2]),
        g([-0.3, 0.1, -0.1], 0.15, [0.1, 0.3, 0.9]),
        g([0.0, -0.3, 0.2], 0.14, [0.9, 0.8, 0.1]),
        g([0.1, 0.3, -0.3], 0.13, [0.6, 0.1, 0.7]),
        g([-0.15, -0.15, -0.3], 0.14, [0.1, 0.8, 0.8]),
    ])
}

/// Distance and KL recorded every `every` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iter: u64,
    pub distance: f64,
    pub kl: f64,
}

/// Observer that evaluates the cloud on fixed views.
pub struct Monitor<'a> {
    pub every: u64,
    pub quad: CameraQuad,
    pub targets: Vec<Image>,
    pub kl_provider: Option<&'a AnalyticGaussianProvider>,
    pub kl_t: f64,
    pub schedule: NoiseSchedule,
    pub background: [f64; 3],
    pub checkpoints: Vec<Checkpoint>,
    pub records: Vec<IterationRecord>,
}

impl<'a> Monitor<'a> {
    pub fn new(every: u64, targets: Vec<Image>, kl_provider: Option<&'a AnalyticGaussianProvider>) -> Self {
        Self {
            every,
            quad: eval_quad(),
            targets,
            kl_provider,
            kl_t: 0.5,
            schedule: NoiseSchedule::default(),
            background: [1.0; 3],
            checkpoints: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn evaluate(&self, iter: u64, cloud: &GaussianCloud) -> Result<Checkpoint> {
        let mut distance = 0.0;
        let mut kl = 0.0;
        for (cam, target) in self.quad.cameras.iter().zip(&self.targets) {
            let img = csd_core::render::render(cloud, cam, &self.background)?.rgb;
            distance += img.l2_distance(target) / 4.0;
            if let Some(p) = self.kl_provider {
                kl += p.kl_divergence(&img, self.kl_t, &Condition::with_camera(0, *cam), &self.schedule)?;
            }
        }
        Ok(Checkpoint { iter, distance, kl })
    }
}

impl Observer for Monitor<'_> {
    fn on_iteration(&mut self, record: &IterationRecord, cloud: &GaussianCloud, _adapter: &AdapterModel) -> Result<()> {
        self.records.push(record.clone());
        if record.iter % self.every == 0 {
            let c = self.evaluate(record.iter, cloud)?;
            self.checkpoints.push(c);
        }
        Ok(())
    }
}

/// Renders `field` from each view of `quad`.
pub fn target_images(field: &dyn TargetField, quad: &CameraQuad) -> Result<Vec<Image>> {
    quad.cameras.iter().map(|c| field.mean(&Condition::with_camera(0, *c), c.width, c.height)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOutcome {
    pub cloud: GaussianCloud,
    pub initial: Checkpoint,
    pub checkpoints: Vec<Checkpoint>,
    pub records: Vec<IterationRecord>,
}

impl ConvergenceOutcome {
    pub fn distance_drop(&self) -> f64 {
        let last = self.checkpoints.last().map_or(self.initial.distance, |c| c.distance);
        1.0 - last / self.initial.distance
    }

    /// Checkpoints (including the initial state) where the KL went up.
    pub fn kl_increases(&self) -> usize {
        let mut prev = self.initial.kl;
        let mut count = 0;
        for c in &self.checkpoints {
            if c.kl > prev {
                count += 1;
            }
            prev = c.kl;
        }
        count
    }
}

pub struct ConvergenceToy {
    pub single_gamma: f64,
    pub joint_gamma: f64,
    pub rho: f64,
    pub config: TrainConfig,
}

/// Training views at the evaluation elevation, radius and field of view with
/// free azimuth.
pub fn ring_cameras() -> CameraRanges {
    CameraRanges {
        azimuth: Range::new(-180.0, 180.0),
        elevation: Range::new(15.0, 15.0),
        radius: Range::new(2.2, 2.2),
        fov_y: Range::new(50.0, 50.0),
    }
}

impl Default for ConvergenceToy {
    fn default() -> Self {
        let mut config = toy_config(Method::Csd, 1.0, 2000, 0);
        config.cameras = ring_cameras();
        config.adapter.parameterization = Parameterization::Velocity;
        config.csd.time.annealed = (0.02, 0.15);
        config.csd.time.switch_iter = Some(300);
        config.rates.decay_factor = 0.03;
        config.rates.decay_steps = 2000;
        Self { single_gamma: 1e-4, joint_gamma: 1e-4, rho: 0.0, config }
    }
}

impl ConvergenceToy {
    pub fn run(&self) -> Result<ConvergenceOutcome> {
        let scene = ReferenceScene::new(reference_scene(), [1.0; 3]);
        let single = AnalyticGaussianProvider::new(scene.clone(), Covariance::Isotropic(self.single_gamma))?;
        let joint = AnalyticJointProvider::new(scene.clone(), self.joint_gamma, self.rho)?;
        let config = &self.config;
        let quad = eval_quad();
        let mut monitor = Monitor::new(100, target_images(&scene, &quad)?, Some(&single));
        let init = csd_core::gaussian::init_cloud(
            config.init.count,
            config.init.radius,
            config.init.opacity,
            config.init.color,
            config.csd.seed,
        )?;
        let initial = monitor.evaluate(0, &init)?;
        let out =
            run_optimization(config, &Providers { single: &single, multi: &joint }, &monitor.schedule.clone(), &mut monitor)?;
        Ok(ConvergenceOutcome { cloud: out.cloud, initial, checkpoints: monitor.checkpoints, records: monitor.records })
    }
}

/// Back-view distances of one Janus seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JanusSeed {
    pub seed: u64,
    pub csd: f64,
    pub sds: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// A single-view prior that sees the face from every side and a joint prior
/// that knows the back of the head.
pub struct JanusToy {
    pub single_gamma: f64,
    pub joint_gamma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub iterations: u64,
    pub seeds: Vec<u64>,
}

impl Default for JanusToy {
    fn default() -> Self {
        Self { single_gamma: 1.0, joint_gamma: 0.01, rho: 0.0, lambda: 1.0, iterations: 2000, seeds: (0..5).collect() }
    }
}

/// The back view used for evaluation.
pub fn back_camera() -> csd_core::Camera {
    eval_quad().cameras[2]
}

impl JanusToy {
    pub fn config(&self, method: Method, seed: u64) -> TrainConfig {
        let mut config = toy_config(method, self.lambda, self.iterations, seed);
        config.cameras = ring_cameras();
        config
    }

    fn back_distance(&self, method: Method, seed: u64) -> Result<f64> {
        let face = patterns::face(TOY_RESOLUTION);
        let back = patterns::back(TOY_RESOLUTION);
        let single = AnalyticGaussianProvider::new(
            BucketTargets { images: [face.clone(), face.clone(), face.clone(), face.clone()] },
            Covariance::Isotropic(self.single_gamma),
        )?;
        let joint = AnalyticJointProvider::new(
            BucketTargets { images: [face.clone(), face.clone(), back.clone(), face] },
            self.joint_gamma,
            self.rho,
        )?;
        let config = self.config(method, seed);
        let out = run_optimization(&config, &Providers { single: &single, multi: &joint }, &NoiseSchedule::default(), &mut NoObserver)?;
        Ok(render_view(&out, &back_camera())?.l2_distance(&back))
    }

    pub fn run(&self) -> Result<Vec<JanusSeed>> {
        self.seeds
            .iter()
            .map(|&seed| {
                Ok(JanusSeed { seed, csd: self.back_distance(Method::Csd, seed)?, sds: self.back_distance(Method::Sds, seed)? })
            })
            .collect()
    }
}

fn render_view(out: &RunOutput, cam: &csd_core::Camera) -> Result<Image> {
    Ok(csd_core::render::render(&out.cloud, cam, &[1.0; 3])?.rgb)
}

pub const RED: [f64; 3] = [0.9, 0.1, 0.1];
pub const BLUE: [f64; 3] = [0.1, 0.1, 0.9];

/// Which mixture mode a run ended in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Red,
    Blue,
}

/// A two-mode single-view prior against a joint prior that is the
/// moment-matched Gaussian of the same mixture.
pub struct DiversityToy {
    pub gamma: f64,
    /// Weight of the red mode.
    pub weight: f64,
    pub lambda: f64,
    pub iterations: u64,
    pub seeds: Vec<u64>,
}

impl Default for DiversityToy {
    fn default() -> Self {
        Self { gamma: 0.01, weight: 0.53, lambda: 0.1, iterations: 1000, seeds: (0..10).collect() }
    }
}

impl DiversityToy {
    pub fn config(&self, method: Method, seed: u64) -> TrainConfig {
        let mut config = toy_config(method, self.lambda, self.iterations, seed);
        config.cameras = ring_cameras();
        config
    }

    /// Mixture mean and per-pixel variance averaged over channels.
    pub fn moments(&self) -> ([f64; 3], f64) {
        let w = self.weight;
        let mean = std::array::from_fn(|k| w * RED[k] + (1.0 - w) * BLUE[k]);
        let spread = (0..3).map(|k| w * (1.0 - w) * (RED[k] - BLUE[k]).powi(2)).sum::<f64>() / 3.0;
        (mean, self.gamma + spread)
    }

    fn mode(&self, method: Method, seed: u64) -> Result<Mode> {
        let component = |c| GaussianPrior::new(ConstantTarget::color(c), Covariance::Isotropic(self.gamma));
        let single =
            AnalyticMixtureProvider::new(vec![(self.weight, component(RED)?), (1.0 - self.weight, component(BLUE)?)])?;
        let (mean, variance) = self.moments();
        let joint = AnalyticJointProvider::new(ConstantTarget::color(mean), variance, 0.0)?;
        let config = self.config(method, seed);
        let out = run_optimization(&config, &Providers { single: &single, multi: &joint }, &NoiseSchedule::default(), &mut NoObserver)?;
        let (mut red, mut blue) = (0.0, 0.0);
        for cam in &eval_quad().cameras {
            let img = render_view(&out, cam)?;
            red += img.l2_distance(&Image::filled(img.width, img.height, RED));
            blue += img.l2_distance(&Image::filled(img.width, img.height, BLUE));
        }
        Ok(if red <= blue { Mode::Red } else { Mode::Blue })
    }

    /// Mode per seed for the given method.
    pub fn run(&self, method: Method) -> Result<Vec<Mode>> {
        self.seeds.iter().map(|&seed| self.mode(method, seed)).collect()
    }
}

pub fn mode_counts(modes: &[Mode]) -> (usize, usize) {
    let red = modes.iter().filter(|m| **m == Mode::Red).count();
    (red, modes.len() - red)
}
