//! Fixtures shared by the benchmarks.

use steklov_core::{generate_cell_mesh, CellGeometry, CellMesh};

/// Default cell meshed at aperture scale `eps` with background size `h`.
pub fn default_mesh(eps: f64, h: f64) -> CellMesh {
    generate_cell_mesh(&CellGeometry::default_box(), eps, h, Some(0.5)).expect("default geometry meshes")
}
