//! Local density query: the opacity-weighted sum of Gaussian kernels sampled
//! at voxel centers and thresholded into an occupancy grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::{Gaussian, GaussianCloud};
use crate::math::{ceil, dot3, exp, floor, log, mat3_vec, quat_to_mat, sqrt, sub3, Mat3, Vec3};

/// Upper bound on the total kernel mass dropped by culling at any point.
const TAIL_MASS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    /// Cells per axis.
    pub resolution: usize,
    /// Corner of cell `(0, 0, 0)`.
    pub origin: Vec3,
    /// Edge length of the cubic cells.
    pub cell: f64,
    pub threshold: f64,
    pub density: Vec<f64>,
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + (i as f64 + 0.5) * self.cell,
            self.origin[1] + (j as f64 + 0.5) * self.cell,
            self.origin[2] + (k as f64 + 0.5) * self.cell,
        ]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    /// Same densities thresholded at a different level.
    pub fn with_threshold(&self, threshold: f64) -> Self {
        let occupied = self.density.iter().map(|d| *d > threshold).collect();
        Self { threshold, occupied, ..self.clone() }
    }

    /// Upper corner of the grid.
    pub fn max_corner(&self) -> Vec3 {
        let e = self.resolution as f64 * self.cell;
        [self.origin[0] + e, self.origin[1] + e, self.origin[2] + e]
    }
}

/// Inverse covariance `R S⁻² Rᵀ` of a Gaussian.
pub(crate) fn inverse_covariance(g: &Gaussian) -> Mat3 {
    let r = quat_to_mat(&g.rotation);
    let s = g.scale();
    let mut inv = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            inv[a][b] = (0..3).map(|k| r[a][k] * r[b][k] / (s[k] * s[k])).sum();
        }
    }
    inv
}

/// `α exp(−½ dᵀΣ⁻¹d)` and the Mahalanobis distance squared.
#[inline]
pub(crate) fn kernel(g: &Gaussian, inv: &Mat3, p: &Vec3) -> (f64, f64) {
    let d = sub3(p, &g.position);
    let m = dot3(&d, &mat3_vec(inv, &d));
    (g.opacity() * exp(-0.5 * m), m)
}

/// Unculled density at `p`.
pub fn density_at(cloud: &GaussianCloud, p: &Vec3) -> f64 {
    cloud.gaussians.iter().map(|g| kernel(g, &inverse_covariance(g), p).0).sum()
}

/// Cubic grid of `resolution³` cells enclosing every Gaussian's 3σ extent,
/// with `padding` empty cells on each side.
pub fn grid_bounds(cloud: &GaussianCloud, resolution: usize, padding: usize) -> Result<(Vec3, f64)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if resolution < 8 || 2 * padding >= resolution {
        return Err(Error::InvalidParameter("grid resolution must be at least 8 and exceed twice the padding".into()));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for g in &cloud.gaussians {
        let r = 3.0 * g.max_scale();
        for a in 0..3 {
            lo[a] = lo[a].min(g.position[a] - r);
            hi[a] = hi[a].max(g.position[a] + r);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if !extent.is_finite() {
        return Err(Error::InvalidParameter("cloud has non-finite extent".into()));
    }
    let cell = extent.max(1e-9) / (resolution - 2 * padding) as f64;
    let half = 0.5 * resolution as f64 * cell;
    let origin = [0.5 * (lo[0] + hi[0]) - half, 0.5 * (lo[1] + hi[1]) - half, 0.5 * (lo[2] + hi[2]) - half];
    Ok((origin, cell))
}

/// Samples the density at every cell center and thresholds it.
///
/// Each Gaussian is only splatted into cells inside the box around its
/// ellipsoid beyond which its kernel falls below `TAIL_MASS / n`; cells whose
/// culled density lies within the total dropped mass of the threshold are
/// re-summed without culling, so occupancy equals the exhaustive sum.
pub fn density_query(cloud: &GaussianCloud, resolution: usize, threshold: f64) -> Result<OccupancyGrid> {
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter("density threshold must be finite".into()));
    }
    let (origin, cell) = grid_bounds(cloud, resolution, 2)?;
    let n = resolution;
    let mut density = vec![0.0; n * n * n];
    let count = cloud.len() as f64;
    let mut dropped = 0.0;
    let invs: Vec<Mat3> = cloud.gaussians.iter().map(inverse_covariance).collect();
    for (g, inv) in cloud.gaussians.iter().zip(&invs) {
        let a = g.opacity();
        let ratio = a * count / TAIL_MASS;
        if ratio <= 1.0 {
            dropped += a;
            continue;
        }
        let k2 = 2.0 * log(ratio);
        dropped += a * exp(-0.5 * k2);
        let cov = {
            let r = quat_to_mat(&g.rotation);
            let s = g.scale();
            let mut c = [0.0; 3];
            for (ax, c) in c.iter_mut().enumerate() {
                *c = (0..3).map(|m| r[ax][m] * r[ax][m] * s[m] * s[m]).sum();
            }
            c
        };
        let mut range = [(0usize, 0usize); 3];
        let mut empty = false;
        for ax in 0..3 {
            let half = sqrt(k2 * cov[ax]);
            let lo = ceil((g.position[ax] - half - origin[ax]) / cell - 0.5).max(0.0);
            let hi = floor((g.position[ax] + half - origin[ax]) / cell - 0.5).min((n - 1) as f64);
            if lo > hi {
                empty = true;
                break;
            }
            range[ax] = (lo as usize, hi as usize);
        }
        if empty {
            continue;
        }
        for k in range[2].0..=range[2].1 {
            for j in range[1].0..=range[1].1 {
                for i in range[0].0..=range[0].1 {
                    let p = [
                        origin[0] + (i as f64 + 0.5) * cell,
                        origin[1] + (j as f64 + 0.5) * cell,
                        origin[2] + (k as f64 + 0.5) * cell,
                    ];
                    density[(k * n + j) * n + i] += kernel(g, inv, &p).0;
                }
            }
        }
    }
    let mut grid = OccupancyGrid { resolution: n, origin, cell, threshold, density, occupied: Vec::new() };
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let idx = grid.index(i, j, k);
                if (grid.density[idx] - threshold).abs() <= dropped {
                    let p = grid.center(i, j, k);
                    grid.density[idx] = cloud.gaussians.iter().zip(&invs).map(|(g, inv)| kernel(g, inv, &p).0).sum();
                }
            }
        }
    }
    grid.occupied = grid.density.iter().map(|d| *d > threshold).collect();
    Ok(grid)
}
