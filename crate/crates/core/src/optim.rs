//! Adam and AdamW over flat parameter vectors, plus the per-group learning
//! rates used for Gaussian clouds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::{GaussianCloud, COLOR, LOG_SCALE, OPACITY, PARAMS_PER_GAUSSIAN, POSITION, ROTATION};
use crate::math::{exp, log, pow, sqrt};
use crate::render::RenderGradients;

/// Bias-corrected Adam with optional decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    /// Adam with (β₁, β₂) = (0.9, 0.99) and eps = 1e-15, the settings used
    /// for Gaussian parameters.
    pub fn for_gaussians(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.99, eps: 1e-15, weight_decay: 0.0 }
    }

    /// AdamW with (β₁, β₂) = (0.9, 0.999) and eps = 1e-8.
    pub fn adamw(len: usize, weight_decay: f64) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One update with a per-element learning rate. Rejects non-finite
    /// gradients without touching any state.
    pub fn step_with(&mut self, params: &mut [f64], grads: &[f64], lr: impl Fn(usize) -> f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::ShapeError { expected: self.m.len(), found: params.len() });
        }
        if grads.len() != self.m.len() {
            return Err(Error::ShapeError { expected: self.m.len(), found: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::RejectedStep(format!("non-finite gradient at index {i}")));
        }
        self.step += 1;
        let c1 = 1.0 - pow(self.beta1, self.step as f64);
        let c2 = 1.0 - pow(self.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grads[i];
            let eta = lr(i);
            if self.weight_decay != 0.0 {
                params[i] -= eta * self.weight_decay * params[i];
            }
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= eta * m_hat / (sqrt(v_hat) + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        self.step_with(params, grads, |_| lr)
    }
}

/// Learning rates per Gaussian parameter group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub position_init: f64,
    pub position_final: f64,
    /// Iterations over which the position rate decays exponentially.
    pub position_decay_steps: u64,
    pub color: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
    /// Factor the color, opacity, scale and rotation rates reach after
    /// `decay_steps` iterations, decaying exponentially; 1 keeps them fixed.
    pub decay_factor: f64,
    pub decay_steps: u64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position_init: 1e-3,
            position_final: 2e-5,
            position_decay_steps: 1500,
            color: 0.01,
            opacity: 0.05,
            scale: 5e-3,
            rotation: 1e-3,
            decay_factor: 1.0,
            decay_steps: 0,
        }
    }
}

impl LearningRates {
    pub fn position(&self, iter: u64) -> f64 {
        if self.position_decay_steps == 0 {
            return self.position_final;
        }
        let r = (iter as f64 / self.position_decay_steps as f64).min(1.0);
        if r == 0.0 {
            return self.position_init;
        }
        if r == 1.0 {
            return self.position_final;
        }
        if self.position_init <= 0.0 || self.position_final <= 0.0 {
            return self.position_init * (1.0 - r) + self.position_final * r;
        }
        exp(log(self.position_init) * (1.0 - r) + log(self.position_final) * r)
    }

    /// Multiplier on the non-position rates at `iter`.
    pub fn decay(&self, iter: u64) -> f64 {
        if self.decay_factor == 1.0 || self.decay_steps == 0 {
            return 1.0;
        }
        let r = (iter as f64 / self.decay_steps as f64).min(1.0);
        exp(log(self.decay_factor) * r)
    }

    /// Learning rate for flat parameter slot `k` (within one Gaussian).
    pub fn for_slot(&self, k: usize, iter: u64) -> f64 {
        if POSITION.contains(&k) {
            return self.position(iter);
        }
        let base = if LOG_SCALE.contains(&k) {
            self.scale
        } else if ROTATION.contains(&k) {
            self.rotation
        } else if COLOR.contains(&k) {
            self.color
        } else {
            debug_assert_eq!(k, OPACITY);
            self.opacity
        };
        base * self.decay(iter)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.position_init, self.position_final, self.color, self.opacity, self.scale, self.rotation];
        if rates.iter().all(|r| r.is_finite() && *r >= 0.0) && self.decay_factor > 0.0 && self.decay_factor <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("learning rates must be finite and non-negative, decay factor in (0, 1]".into()))
        }
    }
}

/// Adam over a Gaussian cloud with per-group learning rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudOptimizer {
    pub state: AdamState,
    pub rates: LearningRates,
}

impl CloudOptimizer {
    pub fn new(count: usize, rates: LearningRates) -> Self {
        Self { state: AdamState::for_gaussians(count * PARAMS_PER_GAUSSIAN), rates }
    }

    /// One Adam step at iteration `iter`; quaternions are renormalized
    /// afterwards.
    pub fn step(&mut self, cloud: &mut GaussianCloud, grads: &RenderGradients, iter: u64) -> Result<()> {
        if grads.len() != cloud.len() {
            return Err(Error::ShapeError { expected: cloud.len(), found: grads.len() });
        }
        let mut params = cloud.params();
        let rates = self.rates;
        self.state.step_with(&mut params, &grads.params, |i| rates.for_slot(i % PARAMS_PER_GAUSSIAN, iter))?;
        cloud.set_params(&params)?;
        for g in &mut cloud.gaussians {
            g.normalize_rotation();
        }
        Ok(())
    }

    /// Rebuilds moments after a structural edit: entry `k` of `sources` names
    /// the old Gaussian whose moments new Gaussian `k` inherits, or `None`
    /// for fresh zeros.
    pub fn remap(&mut self, sources: &[Option<usize>]) {
        let p = PARAMS_PER_GAUSSIAN;
        let mut m = vec![0.0; sources.len() * p];
        let mut v = vec![0.0; sources.len() * p];
        for (k, src) in sources.iter().enumerate() {
            if let Some(s) = src {
                m[k * p..(k + 1) * p].copy_from_slice(&self.state.m[s * p..(s + 1) * p]);
                v[k * p..(k + 1) * p].copy_from_slice(&self.state.v[s * p..(s + 1) * p]);
            }
        }
        self.state.m = m;
        self.state.v = v;
    }
}
