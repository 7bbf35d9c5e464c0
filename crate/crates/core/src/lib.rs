//! Band structure of the Steklov (linear water-wave) problem in a periodic
//! channel of box containers joined by small apertures.

pub mod geometry;
pub mod mesh;
pub mod assembly;
pub mod spectral;
pub mod capacity;
pub mod asymptotics;
pub mod bands;

pub use assembly::{
    apply_quasi_periodic, assemble_stiffness, assemble_surface_mass, bloch_phase, eta_grid, AssemblyError, DofMap,
    QuasiPeriodicSystem, SparseHermitian,
};
pub use asymptotics::{
    correction_multiple, correction_simple, evaluate_at_probe, layer_coefficients, predict_band, AsymptoticModel,
    AsymptoticsError, BandPrediction, ProbeValues,
};
pub use bands::{
    extract_bands, fit_slope, fit_slope_data, sweep_eta, verify_bounds, BandError, BandStructure, BoundsReport, GapReport,
    SlopeFit, SweepContext, SweepParams,
};
pub use capacity::{capacity, capacity_analytic_disk, capacity_integral, CapacityError, CapacityMethod, CapacityResult};
pub use geometry::{aperture_trace, ApertureShape, ApertureTrace, CellGeometry, GeometryError, Wall};
pub use mesh::{generate_cell_mesh, generate_cell_mesh_with, validate_mesh, BoundaryFacet, CellMesh, FacetTag, MeshError, MeshParams, MeshReport};
pub use spectral::{
    box_sloshing_eigenvalues, residual_localize, solve_steklov, ModeSet, SolverOptions, SpectralError, SteklovOperator,
};
