//! Gradient-driven cloning and splitting of Gaussians plus threshold pruning.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::{log, mat3_vec, quat_to_mat, Vec3};
use crate::render::RenderGradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensifyConfig {
    pub interval: u64,
    pub stop_iter: u64,
    /// Threshold on the mean screen-space positional gradient norm.
    pub grad_threshold: f64,
    pub min_opacity: f64,
    /// World-space cap on the largest activated scale.
    pub max_scale: f64,
    /// Largest activated scale that is cloned rather than split.
    pub clone_max_scale: f64,
    pub split_divisor: f64,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            interval: 250,
            stop_iter: 1500,
            grad_threshold: 0.01,
            min_opacity: 0.01,
            max_scale: 0.05,
            clone_max_scale: 0.01,
            split_divisor: 1.6,
        }
    }
}

impl DensifyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.grad_threshold, self.min_opacity, self.max_scale, self.clone_max_scale, self.split_divisor];
        if self.interval == 0 || positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("densify interval and thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// True when a densify/prune pass is due after `iter` completed iterations.
pub fn should_densify(iter: u64, cfg: &DensifyConfig) -> bool {
    iter > 0 && cfg.interval > 0 && iter % cfg.interval == 0 && iter <= cfg.stop_iter
}

/// Screen-space positional gradient norms accumulated between passes.
#[derive(Debug, Clone, PartialEq)]
pub struct DensifyStats {
    pub grad_sum: Vec<f64>,
    pub visits: Vec<u32>,
    /// Generation of the cloud these statistics index into.
    pub generation: u64,
}

impl DensifyStats {
    pub fn new(cloud: &GaussianCloud) -> Self {
        Self { grad_sum: vec![0.0; cloud.len()], visits: vec![0; cloud.len()], generation: cloud.generation }
    }

    pub fn accumulate(&mut self, grads: &RenderGradients) -> Result<()> {
        if grads.len() != self.visits.len() {
            return Err(Error::ShapeError { expected: self.visits.len(), found: grads.len() });
        }
        for (a, b) in self.grad_sum.iter_mut().zip(&grads.mean2d_grad_norm) {
            *a += b;
        }
        for (a, b) in self.visits.iter_mut().zip(&grads.visits) {
            *a += b;
        }
        Ok(())
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.visits[i] == 0 {
            0.0
        } else {
            self.grad_sum[i] / self.visits[i] as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensifyReport {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    /// For every Gaussian of the new cloud, the index of the Gaussian it
    /// descends from in the old cloud.
    pub sources: Vec<Option<usize>>,
}

/// `R (s ⊙ z)` with `z` standard normal, i.e. a draw from `N(0, Σ)`,
/// restricted to Mahalanobis radius 3.
fn sample_offset<R: Rng + ?Sized>(rng: &mut R, g: &Gaussian, scale: &Vec3) -> Vec3 {
    let r = quat_to_mat(&g.rotation);
    loop {
        let z: Vec3 = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        if z.iter().map(|v| v * v).sum::<f64>() <= 9.0 {
            return mat3_vec(&r, &[z[0] * scale[0], z[1] * scale[1], z[2] * scale[2]]);
        }
    }
}

/// Clones or splits every Gaussian whose mean positional gradient exceeds
/// the threshold, then prunes transparent and oversized Gaussians.
pub fn densify_and_prune<R: Rng + ?Sized>(
    cloud: &mut GaussianCloud,
    stats: &mut DensifyStats,
    cfg: &DensifyConfig,
    rng: &mut R,
) -> Result<DensifyReport> {
    if stats.generation != cloud.generation {
        return Err(Error::GenerationMismatch { cloud: cloud.generation, stats: stats.generation });
    }
    if stats.visits.len() != cloud.len() {
        return Err(Error::ShapeError { expected: cloud.len(), found: stats.visits.len() });
    }
    let mut kept: Vec<(Gaussian, usize)> = Vec::with_capacity(cloud.len());
    let mut added: Vec<(Gaussian, usize)> = Vec::new();
    let (mut cloned, mut split) = (0, 0);
    for (i, g) in cloud.gaussians.iter().enumerate() {
        if stats.mean(i) <= cfg.grad_threshold {
            kept.push((*g, i));
            continue;
        }
        let scale = g.scale();
        if g.max_scale() <= cfg.clone_max_scale {
            let off = sample_offset(rng, g, &scale);
            let mut c = *g;
            c.position = [g.position[0] + off[0], g.position[1] + off[1], g.position[2] + off[2]];
            kept.push((*g, i));
            added.push((c, i));
            cloned += 1;
        } else {
            let shrink = log(cfg.split_divisor);
            let child = |rng: &mut R| {
                let off = sample_offset(rng, g, &scale);
                let mut c = *g;
                c.position = [g.position[0] + off[0], g.position[1] + off[1], g.position[2] + off[2]];
                c.log_scale = [g.log_scale[0] - shrink, g.log_scale[1] - shrink, g.log_scale[2] - shrink];
                c
            };
            let a = child(rng);
            let b = child(rng);
            kept.push((a, i));
            added.push((b, i));
            split += 1;
        }
    }
    kept.extend(added);
    let before = kept.len();
    kept.retain(|(g, _)| g.opacity() >= cfg.min_opacity && g.max_scale() <= cfg.max_scale);
    let pruned = before - kept.len();
    cloud.gaussians = kept.iter().map(|(g, _)| *g).collect();
    cloud.generation += 1;
    *stats = DensifyStats::new(cloud);
    Ok(DensifyReport { cloned, split, pruned, sources: kept.iter().map(|(_, s)| Some(*s)).collect() })
}
