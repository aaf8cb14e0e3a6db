//! Variance-preserving noise schedules, forward diffusion, classifier-free
//! guidance and prediction-parameterization conversion.

use alloc::format;
use alloc::vec::Vec;

use crate::camera::{view_bucket, Camera, ViewBucket};
use crate::error::{Error, Result};
use crate::math::{cos, sqrt};

pub const DEFAULT_STEPS: usize = 1000;

/// How ᾱ is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// ᾱ from a linear β ramp 1e-4 → 0.02.
    Linear,
    /// ᾱ(t) = cos²((t + 0.008)/1.008 · π/2), normalized.
    Cosine,
}

/// The weighting ω(t) applied to distillation residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// ω(t) = σ_t².
    SigmaSquared,
    /// ω(t) = 1.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
    weighting: Weighting,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::new(ScheduleKind::Linear, DEFAULT_STEPS, Weighting::SigmaSquared).expect("default schedule is valid")
    }
}

impl NoiseSchedule {
    pub fn new(kind: ScheduleKind, steps: usize, weighting: Weighting) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidParameter(format!("schedule needs at least 2 steps, got {steps}")));
        }
        let alpha_bar = match kind {
            ScheduleKind::Linear => {
                let (b0, b1) = (1e-4, 0.02);
                let mut acc = 1.0;
                (0..steps)
                    .map(|i| {
                        let beta = b0 + (b1 - b0) * i as f64 / (steps - 1) as f64;
                        acc *= 1.0 - beta;
                        acc
                    })
                    .collect()
            }
            ScheduleKind::Cosine => {
                let f = |t: f64| {
                    let c = cos((t + 0.008) / 1.008 * core::f64::consts::FRAC_PI_2);
                    c * c
                };
                let mut acc = 1.0;
                (0..steps)
                    .map(|i| {
                        let beta = (1.0 - f((i + 1) as f64 / steps as f64) / f(i as f64 / steps as f64)).min(0.999);
                        acc *= 1.0 - beta;
                        acc
                    })
                    .collect()
            }
        };
        Self::from_alpha_bar(alpha_bar, weighting)
    }

    /// Builds a schedule from an explicit ᾱ table, which must be strictly
    /// decreasing within (0, 1].
    pub fn from_alpha_bar(alpha_bar: Vec<f64>, weighting: Weighting) -> Result<Self> {
        if alpha_bar.is_empty() {
            return Err(Error::InvalidParameter("empty alpha-bar table".into()));
        }
        if alpha_bar.iter().any(|a| !(a.is_finite() && *a > 0.0 && *a <= 1.0)) {
            return Err(Error::InvalidParameter("alpha-bar entries must lie in (0, 1]".into()));
        }
        if alpha_bar.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("alpha-bar must be strictly decreasing".into()));
        }
        Ok(Self { alpha_bar, weighting })
    }

    pub fn steps(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn alpha_bar_table(&self) -> &[f64] {
        &self.alpha_bar
    }

    /// Table index ⌊t·(N−1)⌋ for continuous t, clamped into the table.
    pub fn index(&self, t: f64) -> usize {
        let n = self.alpha_bar.len();
        let i = (t.clamp(0.0, 1.0) * (n - 1) as f64) as usize;
        i.min(n - 1)
    }

    pub fn alpha_bar(&self, t: f64) -> f64 {
        self.alpha_bar[self.index(t)]
    }

    pub fn alpha(&self, t: f64) -> f64 {
        sqrt(self.alpha_bar(t))
    }

    pub fn sigma(&self, t: f64) -> f64 {
        sqrt(1.0 - self.alpha_bar(t))
    }

    /// (α_t, σ_t).
    pub fn coefficients(&self, t: f64) -> (f64, f64) {
        let ab = self.alpha_bar(t);
        (sqrt(ab), sqrt(1.0 - ab))
    }

    pub fn weight(&self, t: f64) -> f64 {
        match self.weighting {
            Weighting::SigmaSquared => 1.0 - self.alpha_bar(t),
            Weighting::Constant => 1.0,
        }
    }
}

/// A conditioning signal: an opaque prompt id plus optional view information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    prompt: Option<u32>,
    view: Option<ViewBucket>,
    camera: Option<Camera>,
}

impl Condition {
    /// The empty-prompt sentinel.
    pub fn unconditional() -> Self {
        Self { prompt: None, view: None, camera: None }
    }

    pub fn prompt(id: u32) -> Self {
        Self { prompt: Some(id), view: None, camera: None }
    }

    /// Prompt with the camera and its view bucket attached.
    pub fn with_camera(id: u32, camera: Camera) -> Self {
        Self { prompt: Some(id), view: Some(view_bucket(&camera)), camera: Some(camera) }
    }

    pub fn with_view(id: u32, view: ViewBucket) -> Self {
        Self { prompt: Some(id), view: Some(view), camera: None }
    }

    pub fn is_unconditional(&self) -> bool {
        self.prompt.is_none()
    }

    pub fn prompt_id(&self) -> Option<u32> {
        self.prompt
    }

    pub fn view(&self) -> Option<ViewBucket> {
        self.view
    }

    pub fn camera(&self) -> Option<&Camera> {
        self.camera.as_ref()
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeError { expected, found })
    }
}

/// x_t = α_t x0 + σ_t ε.
pub fn forward_diffuse(x0: &[f64], t: f64, eps: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    check_len(x0.len(), eps.len())?;
    let (a, s) = schedule.coefficients(t);
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + s * e).collect())
}

/// (1 + s) ε_c − s ε_u.
pub fn cfg_combine(eps_cond: &[f64], eps_uncond: &[f64], scale: f64) -> Result<Vec<f64>> {
    check_len(eps_cond.len(), eps_uncond.len())?;
    if !(scale >= 0.0) {
        return Err(Error::InvalidParameter(format!("guidance scale must be non-negative, got {scale}")));
    }
    Ok(eps_cond.iter().zip(eps_uncond).map(|(c, u)| (1.0 + scale) * c - scale * u).collect())
}

/// ε = α_t v + σ_t x_t.
pub fn v_to_eps(v: &[f64], x_t: &[f64], t: f64, schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    check_len(v.len(), x_t.len())?;
    let (a, s) = schedule.coefficients(t);
    Ok(v.iter().zip(x_t).map(|(v, x)| a * v + s * x).collect())
}
