//! A small trainable noise predictor for rendered images, trained online with
//! the diffusion denoising objective.
//!
//! The network sees the diffused image resampled to a fixed grid together
//! with time, camera and prompt features:
//!
//! ```text
//! h₁ = silu(W₁ [x_grid, e(t), e(cam), onehot(y)] + b₁)
//! h₂ = silu(W₂ h₁ + b₂)
//! y  = W₃ h₂ + b₃ + (uᵀh₂ + c) · x_grid
//! ```
//!
//! and `y` is upsampled bilinearly to the input resolution. `W₃`, `b₃`, `u`
//! and `c` start at zero, so a fresh adapter predicts zero noise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusion::{forward_diffuse, v_to_eps, Condition, NoiseSchedule};
use crate::error::{Error, Result};
use crate::image::{bilinear_taps, Image};
use crate::math::{cos, exp, log, sigmoid, sin, sqrt};
use crate::optim::AdamState;
use crate::score::ScoreProvider;

pub const TIME_EMBEDDING: usize = 16;
pub const CAMERA_FEATURES: usize = 5;

/// What the network output represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Epsilon,
    /// Output is `v = α_t ε − σ_t x0`, converted with `v_to_eps`.
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdapterConfig {
    pub hidden: usize,
    /// Side of the square working grid.
    pub grid: usize,
    /// Size of the prompt one-hot.
    pub prompts: usize,
    pub parameterization: Parameterization,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self { hidden: 128, grid: 32, prompts: 1, parameterization: Parameterization::Epsilon, weight_decay: 0.01, seed: 0 }
    }
}

/// A named parameter block, for checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layout {
    input: usize,
    hidden: usize,
    output: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    u: usize,
    c: usize,
    len: usize,
}

impl Layout {
    fn new(cfg: &AdapterConfig) -> Self {
        let output = cfg.grid * cfg.grid * 3;
        let input = output + TIME_EMBEDDING + CAMERA_FEATURES + cfg.prompts;
        let h = cfg.hidden;
        let w1 = 0;
        let b1 = w1 + h * input;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + output * h;
        let u = b3 + output;
        let c = u + h;
        Self { input, hidden: h, output, w1, b1, w2, b2, w3, b3, u, c, len: c + 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterModel {
    config: AdapterConfig,
    layout: Layout,
    params: Vec<f64>,
}

struct Activations {
    input: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    /// Network output on the working grid.
    grid_out: Vec<f64>,
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

/// Sinusoidal embedding of `t ∈ (0, 1)` on the 1000-step scale.
pub fn time_embedding(t: f64) -> [f64; TIME_EMBEDDING] {
    let mut e = [0.0; TIME_EMBEDDING];
    let half = TIME_EMBEDDING / 2;
    for k in 0..half {
        let freq = exp(-log(10_000.0) * k as f64 / half as f64);
        e[k] = sin(1000.0 * t * freq);
        e[k + half] = cos(1000.0 * t * freq);
    }
    e
}

fn linear(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        *o = b[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl AdapterModel {
    pub fn new(config: AdapterConfig) -> Result<Self> {
        if config.hidden == 0 || config.grid == 0 {
            return Err(Error::InvalidParameter("adapter hidden width and grid must be positive".into()));
        }
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let b = 1.0 / sqrt(layout.input as f64);
        for w in &mut params[layout.w1..layout.b1] {
            *w = rng.random_range(-b..b);
        }
        let b = 1.0 / sqrt(layout.hidden as f64);
        for w in &mut params[layout.w2..layout.b2] {
            *w = rng.random_range(-b..b);
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// A fresh AdamW state sized for this model.
    pub fn optimizer(&self) -> AdamState {
        AdamState::adamw(self.params.len(), self.config.weight_decay)
    }

    fn features(&self, x_t: &Image, t: f64, cond: &Condition) -> Result<Vec<f64>> {
        let cam = cond.camera().ok_or(Error::InvalidCondition("adapter needs a camera"))?;
        let g = self.config.grid;
        let mut input = Vec::with_capacity(self.layout.input);
        if x_t.width == g && x_t.height == g {
            input.extend_from_slice(&x_t.data);
        } else {
            input.extend_from_slice(&x_t.resize_bilinear(g, g).data);
        }
        input.extend_from_slice(&time_embedding(t));
        let (az, el) = (cam.azimuth.to_radians(), cam.elevation.to_radians());
        input.extend_from_slice(&[sin(az), cos(az), sin(el), cos(el), cam.radius]);
        let mut onehot = vec![0.0; self.config.prompts];
        if let Some(id) = cond.prompt_id() {
            let slot = onehot.get_mut(id as usize).ok_or(Error::InvalidCondition("prompt id outside the adapter's range"))?;
            *slot = 1.0;
        }
        input.extend_from_slice(&onehot);
        Ok(input)
    }

    fn forward(&self, x_t: &Image, t: f64, cond: &Condition) -> Result<Activations> {
        let l = &self.layout;
        let p = &self.params;
        let input = self.features(x_t, t, cond)?;
        let mut z1 = vec![0.0; l.hidden];
        linear(&p[l.w1..l.b1], &p[l.b1..l.w2], &input, &mut z1);
        let h1: Vec<f64> = z1.iter().map(|z| silu(*z)).collect();
        let mut z2 = vec![0.0; l.hidden];
        linear(&p[l.w2..l.b2], &p[l.b2..l.w3], &h1, &mut z2);
        let h2: Vec<f64> = z2.iter().map(|z| silu(*z)).collect();
        let gain = p[l.c] + p[l.u..l.c].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();
        let mut grid_out = vec![0.0; l.output];
        linear(&p[l.w3..l.b3], &p[l.b3..l.u], &h2, &mut grid_out);
        for (o, x) in grid_out.iter_mut().zip(&input[..l.output]) {
            *o += gain * x;
        }
        Ok(Activations { input, z1, h1, z2, h2, grid_out })
    }

    fn upsample(&self, grid_out: &[f64], width: usize, height: usize) -> Vec<f64> {
        let g = self.config.grid;
        if width == g && height == g {
            return grid_out.to_vec();
        }
        let mut out = vec![0.0; width * height * 3];
        for (y, x, taps) in bilinear_taps(g, g, width, height) {
            for c in 0..3 {
                out[(y * width + x) * 3 + c] = taps.iter().map(|(i, w)| w * grid_out[i * 3 + c]).sum();
            }
        }
        out
    }

    fn upsample_backward(&self, d_out: &[f64], width: usize, height: usize) -> Vec<f64> {
        let g = self.config.grid;
        if width == g && height == g {
            return d_out.to_vec();
        }
        let mut d = vec![0.0; g * g * 3];
        for (y, x, taps) in bilinear_taps(g, g, width, height) {
            for c in 0..3 {
                let v = d_out[(y * width + x) * 3 + c];
                for (i, w) in taps {
                    d[i * 3 + c] += w * v;
                }
            }
        }
        d
    }

    /// Raw network output at the input resolution.
    fn output(&self, x_t: &Image, t: f64, cond: &Condition) -> Result<(Activations, Vec<f64>)> {
        let act = self.forward(x_t, t, cond)?;
        let out = self.upsample(&act.grid_out, x_t.width, x_t.height);
        Ok((act, out))
    }

    fn backward(&self, act: &Activations, d_grid: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let p = &self.params;
        let mut g = vec![0.0; l.len];
        let x_grid = &act.input[..l.output];
        let d_gain: f64 = d_grid.iter().zip(x_grid).map(|(a, b)| a * b).sum();
        g[l.c] = d_gain;
        let mut d_h2: Vec<f64> = p[l.u..l.c].iter().map(|u| u * d_gain).collect();
        for (k, h) in act.h2.iter().enumerate() {
            g[l.u + k] = d_gain * h;
        }
        for (i, d) in d_grid.iter().enumerate() {
            g[l.b3 + i] = *d;
            if *d == 0.0 {
                continue;
            }
            let row = l.w3 + i * l.hidden;
            for k in 0..l.hidden {
                g[row + k] = d * act.h2[k];
                d_h2[k] += d * p[row + k];
            }
        }
        let d_z2: Vec<f64> = d_h2.iter().zip(&act.z2).map(|(d, z)| d * silu_grad(*z)).collect();
        let mut d_h1 = vec![0.0; l.hidden];
        for (i, d) in d_z2.iter().enumerate() {
            g[l.b2 + i] = *d;
            let row = l.w2 + i * l.hidden;
            for k in 0..l.hidden {
                g[row + k] = d * act.h1[k];
                d_h1[k] += d * p[row + k];
            }
        }
        for (i, (d, z)) in d_h1.iter().zip(&act.z1).enumerate() {
            let d = d * silu_grad(*z);
            g[l.b1 + i] = d;
            let row = l.w1 + i * l.input;
            for (k, x) in act.input.iter().enumerate() {
                g[row + k] = d * x;
            }
        }
        g
    }

    /// Deterministic noise prediction for `x_t`.
    pub fn predict(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        let (_, out) = self.output(x_t, t, cond)?;
        let data = match self.config.parameterization {
            Parameterization::Epsilon => out,
            Parameterization::Velocity => v_to_eps(&out, &x_t.data, t, schedule)?,
        };
        Ok(Image { width: x_t.width, height: x_t.height, data })
    }

    /// Denoising loss `‖ε_φ(x_t) − ε‖²` (or its velocity counterpart) and its
    /// gradient with respect to the weights, for `x_t = α_t x0 + σ_t ε`.
    pub fn loss_and_gradient(
        &self,
        x0: &Image,
        t: f64,
        eps: &[f64],
        cond: &Condition,
        schedule: &NoiseSchedule,
    ) -> Result<(f64, Vec<f64>)> {
        let xt = forward_diffuse(&x0.data, t, eps, schedule)?;
        let x_t = Image { width: x0.width, height: x0.height, data: xt };
        let (act, out) = self.output(&x_t, t, cond)?;
        let target: Vec<f64> = match self.config.parameterization {
            Parameterization::Epsilon => eps.to_vec(),
            Parameterization::Velocity => {
                let (a, s) = schedule.coefficients(t);
                eps.iter().zip(&x0.data).map(|(e, x)| a * e - s * x).collect()
            }
        };
        let resid: Vec<f64> = out.iter().zip(&target).map(|(o, e)| o - e).collect();
        let loss = resid.iter().map(|r| r * r).sum::<f64>();
        let d_out: Vec<f64> = resid.iter().map(|r| 2.0 * r).collect();
        let d_grid = self.upsample_backward(&d_out, x0.width, x0.height);
        Ok((loss, self.backward(&act, &d_grid)))
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        let l = &self.layout;
        let block = |name: &str, shape: Vec<usize>, r: core::ops::Range<usize>| Tensor {
            name: name.into(),
            shape,
            data: self.params[r].to_vec(),
        };
        vec![
            block("w1", vec![l.hidden, l.input], l.w1..l.b1),
            block("b1", vec![l.hidden], l.b1..l.w2),
            block("w2", vec![l.hidden, l.hidden], l.w2..l.b2),
            block("b2", vec![l.hidden], l.b2..l.w3),
            block("w3", vec![l.output, l.hidden], l.w3..l.b3),
            block("b3", vec![l.output], l.b3..l.u),
            block("gain_w", vec![l.hidden], l.u..l.c),
            block("gain_b", vec![1], l.c..l.len),
        ]
    }

    /// Restores weights from blocks produced by [`AdapterModel::tensors`].
    pub fn load_tensors(&mut self, tensors: &[Tensor]) -> Result<()> {
        let expected = self.tensors();
        if tensors.len() != expected.len() {
            return Err(Error::ShapeError { expected: expected.len(), found: tensors.len() });
        }
        let mut params = Vec::with_capacity(self.params.len());
        for (t, e) in tensors.iter().zip(&expected) {
            if t.name != e.name || t.shape != e.shape || t.data.len() != e.data.len() {
                return Err(Error::InvalidParameter(format!("tensor {} does not match the adapter layout", t.name)));
            }
            params.extend_from_slice(&t.data);
        }
        self.params = params;
        Ok(())
    }
}

impl ScoreProvider for AdapterModel {
    fn predict_noise(&self, x_t: &Image, t: f64, cond: &Condition, schedule: &NoiseSchedule) -> Result<Image> {
        self.predict(x_t, t, cond, schedule)
    }
}

/// One AdamW step on the denoising loss at `(x0, t, ε)`. Returns the loss
/// before the step. Steps producing a non-finite loss or non-finite weights
/// leave the model untouched.
#[allow(clippy::too_many_arguments)]
pub fn adapter_train_step(
    model: &mut AdapterModel,
    state: &mut AdamState,
    x0: &Image,
    t: f64,
    eps: &[f64],
    cond: &Condition,
    lr: f64,
    schedule: &NoiseSchedule,
) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t must lie in (0, 1), got {t}")));
    }
    let (loss, grad) = model.loss_and_gradient(x0, t, eps, cond, schedule)?;
    if !loss.is_finite() {
        return Err(Error::RejectedStep(format!("non-finite adapter loss {loss}")));
    }
    let mut params = model.params.clone();
    let mut next = state.clone();
    next.step(&mut params, &grad, lr)?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::RejectedStep("adapter weights became non-finite".into()));
    }
    model.params = params;
    *state = next;
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Camera;
    use rand_distr::StandardNormal;

    fn small() -> AdapterConfig {
        AdapterConfig { hidden: 16, grid: 4, prompts: 2, ..Default::default() }
    }

    fn cond() -> Condition {
        Condition::with_camera(1, Camera::new(30.0, 10.0, 2.2, 50.0, 6, 6).unwrap())
    }

    fn sample(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn fresh_adapter_predicts_zero() {
        let m = AdapterModel::new(small()).unwrap();
        let x = Image::from_data(6, 6, sample(1, 108)).unwrap();
        let e = m.predict(&x, 0.4, &cond(), &NoiseSchedule::default()).unwrap();
        assert!(e.data.iter().all(|v| *v == 0.0));
        assert_eq!(e.width, 6);
        assert_eq!(e, m.predict(&x, 0.4, &cond(), &NoiseSchedule::default()).unwrap());
    }

    #[test]
    fn missing_camera_is_rejected() {
        let m = AdapterModel::new(small()).unwrap();
        let x = Image::new(6, 6);
        assert_eq!(
            m.predict(&x, 0.4, &Condition::prompt(0), &NoiseSchedule::default()),
            Err(Error::InvalidCondition("adapter needs a camera"))
        );
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let mut m = AdapterModel::new(small()).unwrap();
        let before = m.clone();
        let mut st = m.optimizer();
        let x0 = Image::from_data(6, 6, sample(2, 108)).unwrap();
        adapter_train_step(&mut m, &mut st, &x0, 0.5, &sample(3, 108), &cond(), 0.0, &NoiseSchedule::default()).unwrap();
        assert_eq!(m.params(), before.params());
    }

    #[test]
    fn tensors_round_trip() {
        let mut m = AdapterModel::new(small()).unwrap();
        let mut st = m.optimizer();
        let x0 = Image::from_data(6, 6, sample(2, 108)).unwrap();
        adapter_train_step(&mut m, &mut st, &x0, 0.5, &sample(3, 108), &cond(), 1e-2, &NoiseSchedule::default()).unwrap();
        let mut fresh = AdapterModel::new(AdapterConfig { seed: 9, ..small() }).unwrap();
        fresh.load_tensors(&m.tensors()).unwrap();
        assert_eq!(fresh.params(), m.params());
    }
}
