//! Run configuration: defaults, a TOML file and `section.key=value`
//! overrides, in increasing precedence.

use std::path::{Path, PathBuf};

use csd_core::adapter::{AdapterConfig, Parameterization};
use csd_core::camera::{CameraRanges, Range};
use csd_core::csd::{CsdConfig, Method, ResolutionSchedule, TimeSchedule};
use csd_core::densify::DensifyConfig;
use csd_core::diffusion::{NoiseSchedule, ScheduleKind, Weighting};
use csd_core::mesh::FitConfig;
use csd_core::optim::LearningRates;
use csd_core::render::RenderSettings;
use csd_core::score::{
    AnalyticGaussianProvider, AnalyticJointProvider, AnalyticMixtureProvider, BucketTargets, ConstantTarget, Covariance,
    GaussianPrior, ReferenceScene, ScoreProvider, TargetField, ZeroProvider,
};
use csd_core::train::{InitConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::files::read_text;
use crate::patterns;

pub const OUTPUT_ROOT_ENV: &str = "CSD_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub csd: CsdSection,
    pub schedule: ScheduleSection,
    pub resolution: ResolutionSection,
    pub render: RenderSection,
    pub rates: RatesSection,
    pub densify: DensifySection,
    pub cameras: CameraSection,
    pub init: InitSection,
    pub adapter: AdapterSection,
    pub provider: ProviderSection,
    pub mesh: MeshSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            csd: CsdSection::default(),
            schedule: ScheduleSection::default(),
            resolution: ResolutionSection::default(),
            render: RenderSection::default(),
            rates: RatesSection::default(),
            densify: DensifySection::default(),
            cameras: CameraSection::default(),
            init: InitSection::default(),
            adapter: AdapterSection::default(),
            provider: ProviderSection::default(),
            mesh: MeshSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Output directory; empty means `$CSD_OUTPUT_ROOT/<config name>`.
    pub output: String,
    /// Iterations between PNG snapshots of the canonical views; 0 disables.
    pub snapshot_every: u64,
    /// Iterations between cloud and adapter checkpoints; 0 keeps only the final one.
    pub checkpoint_every: u64,
    pub rejected_budget: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, output: String::new(), snapshot_every: 500, checkpoint_every: 1000, rejected_budget: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Csd,
    Sds,
    MultiViewOnly,
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Csd => Method::Csd,
            MethodName::Sds => Method::Sds,
            MethodName::MultiViewOnly => Method::MultiViewOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsdSection {
    pub method: MethodName,
    pub lambda: f64,
    pub ablation: bool,
    pub guidance_scale: f64,
    pub prompt: u32,
    pub total: u64,
    pub time_initial: [f64; 2],
    pub time_annealed: [f64; 2],
    /// Iteration of the time-range switch; 0 defers to `switch_fraction`.
    pub switch_iter: u64,
    /// Switch point as a fraction of `total`; unset means half.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub switch_fraction: Option<f64>,
    pub adapter_every: u64,
    pub adapter_lr: f64,
    pub background: [f64; 3],
}

impl Default for CsdSection {
    fn default() -> Self {
        let c = CsdConfig::default();
        Self {
            method: MethodName::Csd,
            lambda: c.lambda,
            ablation: c.ablation,
            guidance_scale: c.guidance_scale,
            prompt: c.prompt,
            total: c.total_iters,
            time_initial: c.time.initial.into(),
            time_annealed: c.time.annealed.into(),
            switch_iter: 0,
            switch_fraction: None,
            adapter_every: c.adapter_every,
            adapter_lr: c.adapter_lr,
            background: c.background,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleName {
    Linear,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingName {
    SigmaSquared,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleName,
    pub steps: usize,
    pub weighting: WeightingName,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { kind: ScheduleName::Linear, steps: csd_core::diffusion::DEFAULT_STEPS, weighting: WeightingName::SigmaSquared }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionSection {
    pub base: usize,
    /// `[fraction of total, resolution]` pairs.
    pub milestones: Vec<(f64, usize)>,
    pub cap: usize,
}

impl Default for ResolutionSection {
    fn default() -> Self {
        let r = ResolutionSchedule::default();
        Self { base: r.base, milestones: r.milestones, cap: r.cap }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    pub tile_culling: bool,
    /// 0 disables early termination.
    pub early_stop_transmittance: f64,
    /// 0 disables the per-splat alpha cutoff.
    pub min_splat_alpha: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        let r = RenderSettings::default();
        Self {
            tile_culling: r.tile_culling,
            early_stop_transmittance: r.early_stop_transmittance.unwrap_or(0.0),
            min_splat_alpha: r.min_splat_alpha.unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    pub position_init: f64,
    pub position_final: f64,
    pub position_decay_steps: u64,
    pub color: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
    pub decay_factor: f64,
    pub decay_steps: u64,
}

impl Default for RatesSection {
    fn default() -> Self {
        let r = LearningRates::default();
        Self {
            position_init: r.position_init,
            position_final: r.position_final,
            position_decay_steps: r.position_decay_steps,
            color: r.color,
            opacity: r.opacity,
            scale: r.scale,
            rotation: r.rotation,
            decay_factor: r.decay_factor,
            decay_steps: r.decay_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifySection {
    pub enabled: bool,
    pub interval: u64,
    pub stop_iter: u64,
    pub grad_threshold: f64,
    pub min_opacity: f64,
    pub max_scale: f64,
    pub clone_max_scale: f64,
    pub split_divisor: f64,
}

impl Default for DensifySection {
    fn default() -> Self {
        let d = DensifyConfig::default();
        Self {
            enabled: true,
            interval: d.interval,
            stop_iter: d.stop_iter,
            grad_threshold: d.grad_threshold,
            min_opacity: d.min_opacity,
            max_scale: d.max_scale,
            clone_max_scale: d.clone_max_scale,
            split_divisor: d.split_divisor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    pub azimuth: [f64; 2],
    pub elevation: [f64; 2],
    pub radius: [f64; 2],
    pub fov_y: [f64; 2],
}

impl Default for CameraSection {
    fn default() -> Self {
        let c = CameraRanges::default();
        let r = |r: Range| [r.min, r.max];
        Self { azimuth: r(c.azimuth), elevation: r(c.elevation), radius: r(c.radius), fov_y: r(c.fov_y) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    pub count: usize,
    pub radius: f64,
    pub opacity: f64,
    pub color: [f64; 3],
}

impl Default for InitSection {
    fn default() -> Self {
        let i = InitConfig::default();
        Self { count: i.count, radius: i.radius, opacity: i.opacity, color: i.color }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterizationName {
    Epsilon,
    Velocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterSection {
    pub hidden: usize,
    pub grid: usize,
    pub parameterization: ParameterizationName,
    pub weight_decay: f64,
}

impl Default for AdapterSection {
    fn default() -> Self {
        let a = AdapterConfig::default();
        Self { hidden: a.hidden, grid: a.grid, parameterization: ParameterizationName::Epsilon, weight_decay: a.weight_decay }
    }
}

/// Where a provider's clean-image mean comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Renders of the built-in reference scene.
    Scene,
    Constant { color: [f64; 3] },
    /// A procedural pattern, `face` or `back`.
    Pattern { name: String },
    /// An image file; relative paths resolve against the config file.
    Png { path: PathBuf },
    /// One target per view bucket.
    Buckets { front: Box<TargetSpec>, side: Box<TargetSpec>, back: Box<TargetSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub gamma: f64,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SingleSpec {
    Gaussian { gamma: f64, target: TargetSpec },
    Mixture { components: Vec<ComponentSpec> },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub gamma: f64,
    pub rho: f64,
    pub target: TargetSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSection {
    pub single: SingleSpec,
    pub multi: JointSpec,
}

impl Default for ProviderSection {
    fn default() -> Self {
        Self {
            single: SingleSpec::Gaussian { gamma: 1e-4, target: TargetSpec::Scene },
            multi: JointSpec { gamma: 1e-4, rho: 0.0, target: TargetSpec::Scene },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshFormat {
    Obj,
    Ply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Voxels per axis of the density query.
    pub resolution: usize,
    pub threshold: f64,
    /// Vertices per axis of the tetrahedral grid.
    pub tet_resolution: usize,
    pub fit_iterations: usize,
    pub fit_lr: f64,
    pub fit_samples: usize,
    pub format: MeshFormat,
}

impl Default for MeshSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            resolution: 64,
            threshold: 0.2,
            tet_resolution: 128,
            fit_iterations: f.iterations,
            fit_lr: f.learning_rate,
            fit_samples: f.samples,
            format: MeshFormat::Obj,
        }
    }
}

/// Names the `section.key` whose line contains byte `offset` of `text`.
fn field_at(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if offset < start + line.len() {
            let key = trimmed.split('=').next().unwrap_or("").trim();
            return match (section.is_empty(), key.is_empty() || trimmed.starts_with('[')) {
                (true, true) => "<root>".into(),
                (true, false) => key.into(),
                (false, true) => section,
                (false, false) => format!("{section}.{key}"),
            };
        }
        start += line.len();
    }
    section
}

fn parse_error(text: &str, e: &toml::de::Error) -> CliError {
    let field = e.span().map_or_else(|| "<root>".to_string(), |s| field_at(text, s.start));
    CliError::config(field, e.message().to_string())
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `a.b.c=value` override to `table`.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        return Err(CliError::Usage(format!("override `{spec}` is not of the form section.key=value")));
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Usage(format!("override key `{key}` has an empty component")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::config(key.trim(), format!("`{part}` is not a section"))),
        };
    }
    node.insert(path[path.len() - 1].to_string(), override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text and applies overrides; unknown keys are errors.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        // reparse the merged document so errors point at a named line
        let merged = toml::to_string(&table).expect("table serializes");
        let config: RunConfig = toml::from_str(&merged).map_err(|e| parse_error(&merged, &e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => read_text(p)?,
            None => String::new(),
        };
        let mut config = Self::from_toml(&text, overrides)?;
        if let Some(dir) = path.and_then(Path::parent) {
            config.provider.resolve_paths(dir);
        }
        Ok(config)
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let core = |field: &str, r: csd_core::Result<()>| r.map_err(|e| CliError::config(field, e.to_string()));
        if let Some(f) = self.csd.switch_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(CliError::config("csd.switch_fraction", "must lie in [0, 1]"));
            }
        }
        core("csd", self.csd_config().validate())?;
        core("rates", self.rates().validate())?;
        core("cameras", self.cameras().validate())?;
        if self.densify.enabled {
            core("densify", self.densify_config().validate())?;
        }
        core("schedule", self.schedule().map(|_| ()))?;
        if self.init.count == 0 {
            return Err(CliError::config("init.count", "must be at least 1"));
        }
        if !(self.init.radius > 0.0) || !(self.init.opacity > 0.0 && self.init.opacity < 1.0) {
            return Err(CliError::config("init", "radius must be positive and opacity in (0, 1)"));
        }
        if self.adapter.hidden == 0 || self.adapter.grid == 0 {
            return Err(CliError::config("adapter", "hidden width and grid must be positive"));
        }
        if self.mesh.resolution < 8 || self.mesh.tet_resolution < 2 {
            return Err(CliError::config("mesh", "density grid needs at least 8 voxels and the tet grid 2 vertices per axis"));
        }
        if !(self.mesh.threshold.is_finite() && self.mesh.threshold >= 0.0) {
            return Err(CliError::config("mesh.threshold", "must be finite and non-negative"));
        }
        if let SingleSpec::Mixture { components } = &self.provider.single {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if components.is_empty() || (total - 1.0).abs() > 1e-9 {
                return Err(CliError::config("provider.single.components", "weights must be positive and sum to 1"));
            }
        }
        Ok(())
    }

    pub fn csd_config(&self) -> CsdConfig {
        let c = &self.csd;
        let r = &self.render;
        CsdConfig {
            method: c.method.into(),
            lambda: c.lambda,
            ablation: c.ablation,
            guidance_scale: c.guidance_scale,
            prompt: c.prompt,
            time: TimeSchedule {
                initial: (c.time_initial[0], c.time_initial[1]),
                annealed: (c.time_annealed[0], c.time_annealed[1]),
                switch_iter: if c.switch_iter > 0 {
                    Some(c.switch_iter)
                } else {
                    c.switch_fraction.map(|f| (c.total as f64 * f) as u64)
                },
            },
            total_iters: c.total,
            adapter_every: c.adapter_every,
            adapter_lr: c.adapter_lr,
            resolution: ResolutionSchedule {
                base: self.resolution.base,
                milestones: self.resolution.milestones.clone(),
                cap: self.resolution.cap,
            },
            background: c.background,
            render: RenderSettings {
                tile_culling: r.tile_culling,
                early_stop_transmittance: (r.early_stop_transmittance > 0.0).then_some(r.early_stop_transmittance),
                min_splat_alpha: (r.min_splat_alpha > 0.0).then_some(r.min_splat_alpha),
            },
            seed: self.run.seed,
        }
    }

    pub fn rates(&self) -> LearningRates {
        let r = &self.rates;
        LearningRates {
            position_init: r.position_init,
            position_final: r.position_final,
            position_decay_steps: r.position_decay_steps,
            color: r.color,
            opacity: r.opacity,
            scale: r.scale,
            rotation: r.rotation,
            decay_factor: r.decay_factor,
            decay_steps: r.decay_steps,
        }
    }

    pub fn densify_config(&self) -> DensifyConfig {
        let d = &self.densify;
        DensifyConfig {
            interval: d.interval,
            stop_iter: d.stop_iter,
            grad_threshold: d.grad_threshold,
            min_opacity: d.min_opacity,
            max_scale: d.max_scale,
            clone_max_scale: d.clone_max_scale,
            split_divisor: d.split_divisor,
        }
    }

    pub fn cameras(&self) -> CameraRanges {
        let c = &self.cameras;
        let r = |v: [f64; 2]| Range::new(v[0], v[1]);
        CameraRanges { azimuth: r(c.azimuth), elevation: r(c.elevation), radius: r(c.radius), fov_y: r(c.fov_y) }
    }

    pub fn schedule(&self) -> csd_core::Result<NoiseSchedule> {
        let kind = match self.schedule.kind {
            ScheduleName::Linear => ScheduleKind::Linear,
            ScheduleName::Cosine => ScheduleKind::Cosine,
        };
        let weighting = match self.schedule.weighting {
            WeightingName::SigmaSquared => Weighting::SigmaSquared,
            WeightingName::Constant => Weighting::Constant,
        };
        NoiseSchedule::new(kind, self.schedule.steps, weighting)
    }

    pub fn train_config(&self) -> TrainConfig {
        let a = &self.adapter;
        TrainConfig {
            csd: self.csd_config(),
            rates: self.rates(),
            densify: self.densify.enabled.then(|| self.densify_config()),
            cameras: self.cameras(),
            init: InitConfig {
                count: self.init.count,
                radius: self.init.radius,
                opacity: self.init.opacity,
                color: self.init.color,
            },
            adapter: AdapterConfig {
                hidden: a.hidden,
                grid: a.grid,
                prompts: self.csd.prompt as usize + 1,
                parameterization: match a.parameterization {
                    ParameterizationName::Epsilon => Parameterization::Epsilon,
                    ParameterizationName::Velocity => Parameterization::Velocity,
                },
                weight_decay: a.weight_decay,
                seed: self.run.seed,
            },
            rejected_budget: self.run.rejected_budget,
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            iterations: self.mesh.fit_iterations,
            learning_rate: self.mesh.fit_lr,
            samples: self.mesh.fit_samples,
            seed: self.run.seed,
        }
    }

    /// Output directory: the configured one, else `name` under the output
    /// root taken from the environment (default `runs`).
    pub fn output_dir(&self, name: &str) -> PathBuf {
        if !self.run.output.is_empty() {
            return PathBuf::from(&self.run.output);
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(name)
    }
}

impl TargetSpec {
    fn resolve_paths(&mut self, dir: &Path) {
        match self {
            TargetSpec::Png { path } if path.is_relative() => *path = dir.join(&*path),
            TargetSpec::Buckets { front, side, back } => {
                front.resolve_paths(dir);
                side.resolve_paths(dir);
                back.resolve_paths(dir);
            }
            _ => {}
        }
    }

    pub fn build(&self) -> Result<Box<dyn TargetField>> {
        Ok(match self {
            TargetSpec::Scene => Box::new(ReferenceScene::new(crate::toys::reference_scene(), [1.0; 3])),
            TargetSpec::Constant { color } => Box::new(ConstantTarget::color(*color)),
            TargetSpec::Pattern { name } => Box::new(ConstantTarget(
                patterns::by_name(name, patterns::PATTERN_SIZE)
                    .ok_or_else(|| CliError::config("provider.target.name", format!("unknown pattern `{name}`")))?,
            )),
            TargetSpec::Png { path } => Box::new(ConstantTarget(crate::png_io::read_png(path)?)),
            TargetSpec::Buckets { front, side, back } => {
                let image = |t: &TargetSpec| -> Result<csd_core::Image> {
                    match t {
                        TargetSpec::Constant { color } => Ok(csd_core::Image::filled(1, 1, *color)),
                        TargetSpec::Pattern { name } => patterns::by_name(name, patterns::PATTERN_SIZE)
                            .ok_or_else(|| CliError::config("provider.target.name", format!("unknown pattern `{name}`"))),
                        TargetSpec::Png { path } => crate::png_io::read_png(path),
                        _ => Err(CliError::config("provider.target", "bucket entries must be constant, pattern or png")),
                    }
                };
                let (f, s, b) = (image(front)?, image(side)?, image(back)?);
                Box::new(BucketTargets { images: [f, s.clone(), b, s] })
            }
        })
    }
}

impl ProviderSection {
    fn resolve_paths(&mut self, dir: &Path) {
        match &mut self.single {
            SingleSpec::Gaussian { target, .. } => target.resolve_paths(dir),
            SingleSpec::Mixture { components } => components.iter_mut().for_each(|c| c.target.resolve_paths(dir)),
            SingleSpec::Zero => {}
        }
        self.multi.target.resolve_paths(dir);
    }

    pub fn single(&self) -> Result<Box<dyn ScoreProvider>> {
        Ok(match &self.single {
            SingleSpec::Gaussian { gamma, target } => {
                Box::new(AnalyticGaussianProvider::new(target.build()?, Covariance::Isotropic(*gamma))?)
            }
            SingleSpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| Ok((c.weight, GaussianPrior::new(c.target.build()?, Covariance::Isotropic(c.gamma))?)))
                    .collect::<Result<Vec<_>>>()?;
                Box::new(AnalyticMixtureProvider::new(parts)?)
            }
            SingleSpec::Zero => Box::new(ZeroProvider),
        })
    }

    pub fn multi(&self) -> Result<AnalyticJointProvider> {
        let m = &self.multi;
        AnalyticJointProvider::new(m.target.build()?, m.gamma, m.rho).map_err(|e| CliError::config("provider.multi", e.to_string()))
    }
}
