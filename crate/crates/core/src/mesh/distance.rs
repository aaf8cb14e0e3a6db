//! Exact Euclidean distance transform, signed distance grids and the
//! continuous fields the tet grid is fitted against.

use alloc::vec;
use alloc::vec::Vec;

use super::density::OccupancyGrid;
use crate::error::{Error, Result};
use crate::math::{floor, norm3, sqrt, sub3, Vec3};

const FAR: f64 = 1e20;

/// Lower envelope of parabolas: `d[q] = min_p (q − p)² + f[p]`.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let parabola = |p: usize| f[p] + (p * p) as f64;
        let mut s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        while s <= z[k] {
            k -= 1;
            s = (parabola(q) - parabola(v[k])) / (2.0 * (q - v[k]) as f64);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

/// Squared distance (in cells) from every cell to the nearest `true` cell of
/// an `n³` grid; `FAR` where there is none.
pub fn squared_distance_to(mask: &[bool], n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = mask.iter().map(|m| if *m { 0.0 } else { FAR }).collect();
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let strides = [1, n, n * n];
    for stride in strides {
        for base in 0..n * n * n {
            // visit each line once, starting from its first element
            if (base / stride) % n != 0 {
                continue;
            }
            for (q, fq) in f.iter_mut().enumerate() {
                *fq = g[base + q * stride];
            }
            edt_1d(&f, &mut d, &mut v, &mut z);
            for (q, dq) in d.iter().enumerate() {
                g[base + q * stride] = dq.min(FAR);
            }
        }
    }
    g
}

/// Signed distances at cell centers, in cell units, negative inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub resolution: usize,
    pub origin: Vec3,
    pub cell: f64,
    pub values: Vec<f64>,
}

/// Distance to the nearest occupied cell minus distance to the nearest free
/// cell.
pub fn sdf_from_occupancy(grid: &OccupancyGrid) -> Result<SdfGrid> {
    let occupied = grid.occupied_count();
    if occupied == 0 || occupied == grid.occupied.len() {
        return Err(Error::DegenerateField);
    }
    let n = grid.resolution;
    let free: Vec<bool> = grid.occupied.iter().map(|o| !o).collect();
    let to_occupied = squared_distance_to(&grid.occupied, n);
    let to_free = squared_distance_to(&free, n);
    let values = to_occupied.iter().zip(&to_free).map(|(a, b)| sqrt(*a) - sqrt(*b)).collect();
    Ok(SdfGrid { resolution: n, origin: grid.origin, cell: grid.cell, values })
}

/// A signed distance function in world space, negative inside.
pub trait SdfField: Sync {
    fn sdf(&self, p: &Vec3) -> f64;

    /// Central differences unless overridden.
    fn gradient(&self, p: &Vec3) -> Vec3 {
        let h = 1e-5;
        let mut g = [0.0; 3];
        for (a, ga) in g.iter_mut().enumerate() {
            let mut hi = *p;
            let mut lo = *p;
            hi[a] += h;
            lo[a] -= h;
            *ga = (self.sdf(&hi) - self.sdf(&lo)) / (2.0 * h);
        }
        g
    }
}

impl<F: Fn(&Vec3) -> f64 + Sync> SdfField for F {
    fn sdf(&self, p: &Vec3) -> f64 {
        self(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl SdfField for Sphere {
    fn sdf(&self, p: &Vec3) -> f64 {
        norm3(&sub3(p, &self.center)) - self.radius
    }

    fn gradient(&self, p: &Vec3) -> Vec3 {
        let d = sub3(p, &self.center);
        let n = norm3(&d);
        if n == 0.0 {
            [0.0; 3]
        } else {
            [d[0] / n, d[1] / n, d[2] / n]
        }
    }
}

impl SdfGrid {
    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(k * self.resolution + j) * self.resolution + i]
    }

    /// Trilinear interpolation between cell centers, clamped at the border,
    /// scaled to world units.
    pub fn sample(&self, p: &Vec3) -> f64 {
        let n = self.resolution;
        let mut idx = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = ((p[a] - self.origin[a]) / self.cell - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (floor(u) as usize).min(n - 2);
            idx[a] = i;
            frac[a] = u - i as f64;
        }
        let [i, j, k] = idx;
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.at(i, j, k), self.at(i + 1, j, k), fx);
        let c10 = lerp(self.at(i, j + 1, k), self.at(i + 1, j + 1, k), fx);
        let c01 = lerp(self.at(i, j, k + 1), self.at(i + 1, j, k + 1), fx);
        let c11 = lerp(self.at(i, j + 1, k + 1), self.at(i + 1, j + 1, k + 1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz) * self.cell
    }
}

impl SdfField for SdfGrid {
    fn sdf(&self, p: &Vec3) -> f64 {
        self.sample(p)
    }
}
