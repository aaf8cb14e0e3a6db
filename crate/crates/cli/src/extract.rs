//! Cloud to mesh: density query, signed distance, tet-grid fit, marching
//! tetrahedra and color baking.

use csd_core::gaussian::GaussianCloud;
use csd_core::mesh::{
    bake_vertex_colors, density_query, fit_tetgrid, marching_tetrahedra, sdf_from_occupancy, FitConfig, FitReport, Mesh,
    TetGrid,
};

use crate::config::MeshSection;
use crate::error::{CliError, Result};

pub const NO_OCCUPANCY: &str = "no occupied voxels at threshold";

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractReport {
    pub occupied: usize,
    pub voxels: usize,
    pub fit: FitReport,
}

pub fn extract_mesh(cloud: &GaussianCloud, mesh: &MeshSection, fit: &FitConfig) -> Result<(Mesh, ExtractReport)> {
    let grid = density_query(cloud, mesh.resolution, mesh.threshold)?;
    let occupied = grid.occupied_count();
    if occupied == 0 {
        return Err(CliError::Runtime(format!("{NO_OCCUPANCY} {}", mesh.threshold)));
    }
    let sdf = sdf_from_occupancy(&grid)?;
    let extent = grid.cell * grid.resolution as f64;
    let spacing = extent / (mesh.tet_resolution - 1) as f64;
    let tets = TetGrid::from_field(mesh.tet_resolution, grid.origin, spacing, &sdf)?;
    let (fitted, report) = fit_tetgrid(&tets, &sdf, fit)?;
    let surface = marching_tetrahedra(&fitted)?.cleaned();
    let colored = bake_vertex_colors(&surface, cloud)?;
    Ok((colored, ExtractReport { occupied, voxels: grid.occupied.len(), fit: report }))
}
