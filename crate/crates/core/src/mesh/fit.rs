//! Joint Adam fit of per-vertex SDF values and deformation offsets against a
//! target field.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::distance::SdfField;
use super::tet::TetGrid;
use crate::error::{Error, Result};
use crate::optim::AdamState;

/// Residuals below this (relative) level carry no gradient.
const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    /// Random points inside tets per iteration, on top of every vertex.
    pub samples: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { iterations: 200, learning_rate: 1e-3, samples: 4096, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Mean squared vertex residual before and after fitting.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Training loss per iteration.
    pub losses: Vec<f64>,
}

/// Mean of `(sᵢ − f(pᵢ))²` over deformed vertex positions.
fn vertex_loss(grid: &TetGrid, target: &dyn SdfField) -> f64 {
    let n = grid.num_vertices();
    (0..n)
        .map(|v| {
            let r = grid.sdf[v] - target.sdf(&grid.position(v));
            r * r
        })
        .sum::<f64>()
        / n as f64
}

/// Fits `grid` so its interpolated SDF matches `target` at every vertex and
/// at random points inside random tets. Offsets are clamped after each step.
pub fn fit_tetgrid(grid: &TetGrid, target: &dyn SdfField, cfg: &FitConfig) -> Result<(TetGrid, FitReport)> {
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidParameter("fit learning rate must be finite and non-negative".into()));
    }
    if grid.sdf.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidField);
    }
    let mut grid = grid.clone();
    let n = grid.num_vertices();
    let initial_loss = vertex_loss(&grid, target);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::adamw(4 * n, 0.0);
    let mut params = vec![0.0; 4 * n];
    let mut grads = vec![0.0; 4 * n];
    let mut losses = Vec::with_capacity(cfg.iterations);
    let samples = if grid.tets.is_empty() { 0 } else { cfg.samples };
    let count = (n + samples) as f64;

    for it in 0..cfg.iterations {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let add = |verts: &[(usize, f64)], grads: &mut [f64], grid: &TetGrid| {
            let mut p = [0.0; 3];
            let mut s = 0.0;
            for (v, b) in verts {
                let q = grid.position(*v);
                for a in 0..3 {
                    p[a] += b * q[a];
                }
                s += b * grid.sdf[*v];
            }
            let f = target.sdf(&p);
            let r = s - f;
            // rounding-level residuals would otherwise be amplified by Adam's
            // normalization into steps of size ~learning_rate
            if r.abs() <= ROUNDING * (1.0 + f.abs()) {
                return r * r / count;
            }
            let df = target.gradient(&p);
            for (v, b) in verts {
                grads[*v] += 2.0 * r * b / count;
                for a in 0..3 {
                    grads[n + 3 * v + a] -= 2.0 * r * b * df[a] / count;
                }
            }
            r * r / count
        };
        for v in 0..n {
            loss += add(&[(v, 1.0)], &mut grads, &grid);
        }
        for _ in 0..samples {
            let tet = grid.tets[rng.random_range(0..grid.tets.len())];
            // uniform barycentric coordinates from sorted uniforms
            let mut u = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            u.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            let b = [u[0], u[1] - u[0], u[2] - u[1], 1.0 - u[2]];
            let verts: [(usize, f64); 4] = core::array::from_fn(|k| (tet[k] as usize, b[k]));
            loss += add(&verts, &mut grads, &grid);
        }
        if !loss.is_finite() {
            return Err(Error::DivergedFit { start: initial_loss, end: loss });
        }
        losses.push(loss);
        if it >= 100 && loss > 1e-12 && loss > 5.0 * losses[it - 100] {
            return Err(Error::DivergedFit { start: losses[it - 100], end: loss });
        }
        params[..n].copy_from_slice(&grid.sdf);
        for (v, d) in grid.deform.iter().enumerate() {
            params[n + 3 * v..n + 3 * v + 3].copy_from_slice(d);
        }
        adam.step(&mut params, &grads, cfg.learning_rate)?;
        grid.sdf.copy_from_slice(&params[..n]);
        for (v, d) in grid.deform.iter_mut().enumerate() {
            d.copy_from_slice(&params[n + 3 * v..n + 3 * v + 3]);
        }
        grid.clamp_deformation();
    }
    let final_loss = vertex_loss(&grid, target);
    Ok((grid, FitReport { initial_loss, final_loss, losses }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Sphere;

    #[test]
    fn zero_learning_rate_leaves_grid_unchanged() {
        let s = Sphere { center: [0.0; 3], radius: 0.5 };
        let grid = TetGrid::from_field(6, [-1.0; 3], 0.4, &|p: &[f64; 3]| s.sdf(p) + 0.1).unwrap();
        let cfg = FitConfig { iterations: 20, learning_rate: 0.0, samples: 64, seed: 1 };
        let (out, _) = fit_tetgrid(&grid, &s, &cfg).unwrap();
        assert_eq!(out, grid);
    }

    #[test]
    fn fit_reduces_loss_and_respects_clamp() {
        let s = Sphere { center: [0.05, 0.0, -0.03], radius: 0.6 };
        let grid = TetGrid::from_field(8, [-1.0; 3], 2.0 / 7.0, &|p: &[f64; 3]| 1.3 * s.sdf(p) + 0.05).unwrap();
        let cfg = FitConfig { iterations: 100, learning_rate: 1e-2, samples: 256, seed: 2 };
        let (out, report) = fit_tetgrid(&grid, &s, &cfg).unwrap();
        assert!(report.final_loss < report.initial_loss);
        assert!(out.deformation_within_clamp());
    }
}
