//! Deformable tetrahedral grid and marching tetrahedra.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::distance::SdfField;
use super::Mesh;
use crate::error::{Error, Result};
use crate::math::{add3, cross3, dot3, floor, sub3, Vec3};

/// Regular lattice the grid was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    /// Vertices per axis.
    pub resolution: usize,
    pub origin: Vec3,
    pub spacing: f64,
}

impl Lattice {
    #[inline]
    pub fn vertex(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetGrid {
    /// Undeformed vertex positions.
    pub base: Vec<Vec3>,
    pub sdf: Vec<f64>,
    /// Per-vertex offset, each component within `±max_offset`.
    pub deform: Vec<Vec3>,
    pub tets: Vec<[u32; 4]>,
    pub max_offset: f64,
    pub lattice: Option<Lattice>,
}

/// Axis orders of the six tets sharing a cube's main diagonal.
const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn signed_volume(p: &[Vec3; 4]) -> f64 {
    let a = sub3(&p[1], &p[0]);
    let b = sub3(&p[2], &p[0]);
    let c = sub3(&p[3], &p[0]);
    dot3(&a, &cross3(&b, &c)) / 6.0
}

impl TetGrid {
    /// `resolution³` vertices spaced `spacing` apart, each cube split into six
    /// tets along its main diagonal. SDF starts at zero.
    pub fn lattice(resolution: usize, origin: Vec3, spacing: f64) -> Result<Self> {
        if resolution < 2 || !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter("tet grid needs at least 2 vertices per axis and positive spacing".into()));
        }
        let lat = Lattice { resolution, origin, spacing };
        let n = resolution;
        let mut base = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    base.push([
                        origin[0] + i as f64 * spacing,
                        origin[1] + j as f64 * spacing,
                        origin[2] + k as f64 * spacing,
                    ]);
                }
            }
        }
        let mut tets = Vec::with_capacity((n - 1) * (n - 1) * (n - 1) * 6);
        for k in 0..n - 1 {
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    for order in KUHN {
                        let mut c = [i, j, k];
                        let mut t = [0u32; 4];
                        t[0] = lat.vertex(c[0], c[1], c[2]) as u32;
                        for (s, axis) in order.iter().enumerate() {
                            c[*axis] += 1;
                            t[s + 1] = lat.vertex(c[0], c[1], c[2]) as u32;
                        }
                        let p = t.map(|v| base[v as usize]);
                        if signed_volume(&p) < 0.0 {
                            t.swap(2, 3);
                        }
                        tets.push(t);
                    }
                }
            }
        }
        let count = base.len();
        Ok(Self { base, sdf: vec![0.0; count], deform: vec![[0.0; 3]; count], tets, max_offset: 0.5 * spacing, lattice: Some(lat) })
    }

    /// Lattice grid with the SDF sampled from `field`.
    pub fn from_field(resolution: usize, origin: Vec3, spacing: f64, field: &dyn SdfField) -> Result<Self> {
        let mut grid = Self::lattice(resolution, origin, spacing)?;
        for (s, p) in grid.sdf.iter_mut().zip(&grid.base) {
            *s = field.sdf(p);
        }
        Ok(grid)
    }

    /// Arbitrary tet mesh without a lattice; offsets are capped at
    /// `max_offset`.
    pub fn from_parts(base: Vec<Vec3>, sdf: Vec<f64>, tets: Vec<[u32; 4]>, max_offset: f64) -> Result<Self> {
        if sdf.len() != base.len() {
            return Err(Error::ShapeError { expected: base.len(), found: sdf.len() });
        }
        if tets.iter().flatten().any(|v| *v as usize >= base.len()) {
            return Err(Error::InvalidParameter("tet references a missing vertex".into()));
        }
        let count = base.len();
        Ok(Self { base, sdf, deform: vec![[0.0; 3]; count], tets, max_offset, lattice: None })
    }

    pub fn num_vertices(&self) -> usize {
        self.base.len()
    }

    #[inline]
    pub fn position(&self, v: usize) -> Vec3 {
        add3(&self.base[v], &self.deform[v])
    }

    pub fn clamp_deformation(&mut self) {
        let m = self.max_offset;
        for d in &mut self.deform {
            for c in d.iter_mut() {
                *c = c.clamp(-m, m);
            }
        }
    }

    pub fn deformation_within_clamp(&self) -> bool {
        self.deform.iter().flatten().all(|c| c.abs() <= self.max_offset)
    }

    /// Signed volumes of all tets in deformed positions.
    pub fn min_volume(&self) -> f64 {
        self.tets.iter().map(|t| signed_volume(&t.map(|v| self.position(v as usize)))).fold(f64::INFINITY, f64::min)
    }

    /// Piecewise-linear SDF over the undeformed lattice; `None` without a
    /// lattice or outside it.
    pub fn interpolate(&self, p: &Vec3) -> Option<f64> {
        let lat = self.lattice?;
        let n = lat.resolution;
        let mut cube = [0usize; 3];
        let mut u = [0.0; 3];
        for a in 0..3 {
            let f = (p[a] - lat.origin[a]) / lat.spacing;
            if !(f >= 0.0 && f <= (n - 1) as f64) {
                return None;
            }
            let c = (floor(f) as usize).min(n - 2);
            cube[a] = c;
            u[a] = f - c as f64;
        }
        // walk the Kuhn path along axes in decreasing fractional order
        let mut order = [0usize, 1, 2];
        order.sort_by(|a, b| u[*b].partial_cmp(&u[*a]).unwrap_or(core::cmp::Ordering::Equal));
        let weights = [1.0 - u[order[0]], u[order[0]] - u[order[1]], u[order[1]] - u[order[2]], u[order[2]]];
        let mut c = cube;
        let mut value = weights[0] * self.sdf[lat.vertex(c[0], c[1], c[2])];
        for (s, axis) in order.iter().enumerate() {
            c[*axis] += 1;
            value += weights[s + 1] * self.sdf[lat.vertex(c[0], c[1], c[2])];
        }
        Some(value)
    }
}

/// The grid's own piecewise-linear field, extended by the nearest value
/// outside the lattice.
impl SdfField for TetGrid {
    fn sdf(&self, p: &Vec3) -> f64 {
        if let Some(v) = self.interpolate(p) {
            return v;
        }
        let Some(lat) = self.lattice else { return f64::NAN };
        let hi = lat.spacing * (lat.resolution - 1) as f64;
        let q = core::array::from_fn(|a| p[a].clamp(lat.origin[a], lat.origin[a] + hi));
        self.interpolate(&q).unwrap_or(f64::NAN)
    }
}

/// Zero crossing on the edge `(a, b)`, computed from the ordered pair so that
/// neighbouring tets agree bit for bit.
fn crossing(grid: &TetGrid, a: usize, b: usize) -> Vec3 {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    let (sa, sb) = (grid.sdf[a], grid.sdf[b]);
    let t = sa / (sa - sb);
    let pa = grid.position(a);
    let pb = grid.position(b);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]), pa[2] + t * (pb[2] - pa[2])]
}

/// Extracts the zero level set. Vertices with negative SDF are inside; each
/// crossed edge contributes one shared vertex and triangles face the positive
/// side.
pub fn marching_tetrahedra(grid: &TetGrid) -> Result<Mesh> {
    if grid.sdf.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidField);
    }
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();
    let mut edge_vertex: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut vertex_on = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
        let key = if a < b { (a, b) } else { (b, a) };
        *edge_vertex.entry(key).or_insert_with(|| {
            vertices.push(crossing(grid, a as usize, b as usize));
            (vertices.len() - 1) as u32
        })
    };
    for tet in &grid.tets {
        let inside: [bool; 4] = tet.map(|v| grid.sdf[v as usize] < 0.0);
        let count = inside.iter().filter(|i| **i).count();
        if count == 0 || count == 4 {
            continue;
        }
        let neg: Vec<u32> = (0..4).filter(|k| inside[*k]).map(|k| tet[k]).collect();
        let pos: Vec<u32> = (0..4).filter(|k| !inside[*k]).map(|k| tet[k]).collect();
        let centroid = |vs: &[u32]| {
            let mut c = [0.0; 3];
            for v in vs {
                c = add3(&c, &grid.position(*v as usize));
            }
            c.map(|x| x / vs.len() as f64)
        };
        let outward = sub3(&centroid(&pos), &centroid(&neg));
        let emit = |tri: [u32; 3], vertices: &Vec<Vec3>, faces: &mut Vec<[u32; 3]>| {
            let [a, b, c] = tri.map(|v| vertices[v as usize]);
            let n = cross3(&sub3(&b, &a), &sub3(&c, &a));
            faces.push(if dot3(&n, &outward) < 0.0 { [tri[0], tri[2], tri[1]] } else { tri });
        };
        match (neg.len(), pos.len()) {
            (1, 3) => {
                let tri = [0, 1, 2].map(|k| vertex_on(neg[0], pos[k], &mut vertices));
                emit(tri, &vertices, &mut faces);
            }
            (3, 1) => {
                let tri = [0, 1, 2].map(|k| vertex_on(pos[0], neg[k], &mut vertices));
                emit(tri, &vertices, &mut faces);
            }
            _ => {
                // the four crossed edges form the cycle a-c, a-d, b-d, b-c
                let (a, b, c, d) = (neg[0], neg[1], pos[0], pos[1]);
                let ac = vertex_on(a, c, &mut vertices);
                let ad = vertex_on(a, d, &mut vertices);
                let bd = vertex_on(b, d, &mut vertices);
                let bc = vertex_on(b, c, &mut vertices);
                emit([ac, ad, bd], &vertices, &mut faces);
                emit([ac, bd, bc], &vertices, &mut faces);
            }
        }
    }
    Ok(Mesh { vertices, faces, colors: None }.cleaned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_tets_are_positive_and_fill_the_cube() {
        let g = TetGrid::lattice(3, [0.0; 3], 0.5).unwrap();
        assert_eq!(g.tets.len(), 8 * 6);
        let vols: Vec<f64> = g.tets.iter().map(|t| signed_volume(&t.map(|v| g.base[v as usize]))).collect();
        assert!(vols.iter().all(|v| *v > 0.0));
        assert!((vols.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let f = |p: &Vec3| 0.3 * p[0] - 1.2 * p[1] + 0.7 * p[2] + 0.1;
        let g = TetGrid::from_field(5, [-1.0; 3], 0.5, &f).unwrap();
        for p in [[0.13, -0.42, 0.77], [-1.0, -1.0, -1.0], [1.0, 1.0, 1.0], [0.25, 0.25, 0.9]] {
            assert!((g.interpolate(&p).unwrap() - f(&p)).abs() < 1e-12);
        }
        assert_eq!(g.interpolate(&[1.5, 0.0, 0.0]), None);
    }

    #[test]
    fn single_tet_with_one_inside_vertex() {
        let base = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let grid = TetGrid::from_parts(base, vec![-0.5, 0.7, 1.3, 0.2], vec![[0, 1, 2, 3]], 0.0).unwrap();
        let mesh = marching_tetrahedra(&grid).unwrap();
        assert_eq!(mesh.faces.len(), 1);
        // the SDF is linear over the tet: s(p) = −0.5 + 1.2x + 1.8y + 0.7z
        for v in &mesh.vertices {
            assert!((-0.5 + 1.2 * v[0] + 1.8 * v[1] + 0.7 * v[2]).abs() < 1e-12);
        }
        let [a, b, c] = mesh.faces[0].map(|i| mesh.vertices[i as usize]);
        let n = cross3(&sub3(&b, &a), &sub3(&c, &a));
        assert!(dot3(&n, &[1.2, 1.8, 0.7]) > 0.0);
    }

    #[test]
    fn two_inside_vertices_make_a_quad() {
        let base = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let grid = TetGrid::from_parts(base, vec![-0.5, -0.2, 0.4, 0.3], vec![[0, 1, 2, 3]], 0.0).unwrap();
        let mesh = marching_tetrahedra(&grid).unwrap();
        assert_eq!((mesh.vertices.len(), mesh.faces.len()), (4, 2));
    }

    #[test]
    fn uniform_sign_gives_empty_mesh_and_nan_is_rejected() {
        let mut g = TetGrid::lattice(3, [0.0; 3], 1.0).unwrap();
        g.sdf.iter_mut().for_each(|s| *s = 1.0);
        assert!(marching_tetrahedra(&g).unwrap().faces.is_empty());
        g.sdf[4] = f64::NAN;
        assert_eq!(marching_tetrahedra(&g), Err(Error::InvalidField));
    }
}
