//! Mesh extraction from an optimized cloud: density query, signed distance
//! field, deformable tet grid fit, marching tetrahedra and color baking.

mod density;
mod distance;
mod fit;
mod tet;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

pub use density::{density_at, density_query, grid_bounds, OccupancyGrid};
pub use distance::{sdf_from_occupancy, squared_distance_to, SdfField, SdfGrid, Sphere};
pub use fit::{fit_tetgrid, FitConfig, FitReport};
pub use tet::{marching_tetrahedra, Lattice, TetGrid};

use crate::error::{Error, Result};
use crate::gaussian::GaussianCloud;
use crate::math::{cross3, norm3, sub3, Vec3};

/// Faces with a smaller area are dropped by [`Mesh::cleaned`].
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub colors: Option<Vec<Vec3>>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_area(&self, f: &[u32; 3]) -> f64 {
        let [a, b, c] = f.map(|v| self.vertices[v as usize]);
        0.5 * norm3(&cross3(&sub3(&b, &a), &sub3(&c, &a)))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.faces.iter().flatten().any(|v| *v as usize >= n) {
            return Err(Error::InvalidParameter("face index out of range".into()));
        }
        if let Some(c) = &self.colors {
            if c.len() != n {
                return Err(Error::ShapeError { expected: n, found: c.len() });
            }
        }
        Ok(())
    }

    /// Welds bitwise-identical vertices, drops collapsed and zero-area faces,
    /// and removes unreferenced vertices.
    pub fn cleaned(self) -> Mesh {
        let key = |p: &Vec3| p.map(f64::to_bits);
        let mut first: BTreeMap<[u64; 3], u32> = BTreeMap::new();
        let mut weld = Vec::with_capacity(self.vertices.len());
        for (i, p) in self.vertices.iter().enumerate() {
            weld.push(*first.entry(key(p)).or_insert(i as u32));
        }
        let mut faces: Vec<[u32; 3]> = Vec::with_capacity(self.faces.len());
        for f in &self.faces {
            let g = f.map(|v| weld[v as usize]);
            if g[0] == g[1] || g[1] == g[2] || g[0] == g[2] || self.face_area(&g) <= MIN_FACE_AREA {
                continue;
            }
            faces.push(g);
        }
        let mut remap = alloc::vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        for f in &mut faces {
            for v in f.iter_mut() {
                let old = *v as usize;
                if remap[old] == u32::MAX {
                    remap[old] = vertices.len() as u32;
                    vertices.push(self.vertices[old]);
                    if let (Some(out), Some(src)) = (&mut colors, &self.colors) {
                        out.push(src[old]);
                    }
                }
                *v = remap[old];
            }
        }
        Mesh { vertices, faces, colors }
    }

    /// Number of faces using each undirected edge.
    pub fn edge_counts(&self) -> BTreeMap<(u32, u32), usize> {
        let mut counts = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *counts.entry(if a < b { (a, b) } else { (b, a) }).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every edge shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.edge_counts().values().all(|c| *c == 2)
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = alloc::vec![false; self.vertices.len()];
        self.faces.iter().flatten().for_each(|v| used[*v as usize] = true);
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_counts().len() as i64 + self.faces.len() as i64
    }

    /// Each directed edge appears once, so neighbouring faces agree on
    /// orientation.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut seen = BTreeMap::new();
        for f in &self.faces {
            for k in 0..3 {
                if seen.insert((f[k], f[(k + 1) % 3]), ()).is_some() {
                    return false;
                }
            }
        }
        true
    }
}

/// Grey assigned to vertices no Gaussian reaches.
pub const FALLBACK_COLOR: Vec3 = [0.5, 0.5, 0.5];

/// Colors every vertex with the `αG`-weighted mean color of the Gaussians
/// whose 3σ ellipsoid contains it.
pub fn bake_vertex_colors(mesh: &Mesh, cloud: &GaussianCloud) -> Result<Mesh> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let invs: Vec<_> = cloud.gaussians.iter().map(density::inverse_covariance).collect();
    let colors = mesh
        .vertices
        .iter()
        .map(|p| {
            let mut sum = [0.0; 3];
            let mut total = 0.0;
            for (g, inv) in cloud.gaussians.iter().zip(&invs) {
                let (w, m) = density::kernel(g, inv, p);
                if m > 9.0 {
                    continue;
                }
                let c = g.clamped_color();
                for k in 0..3 {
                    sum[k] += w * c[k];
                }
                total += w;
            }
            if total < 1e-6 {
                FALLBACK_COLOR
            } else {
                sum.map(|s| s / total)
            }
        })
        .collect();
    Ok(Mesh { colors: Some(colors), ..mesh.clone() })
}
