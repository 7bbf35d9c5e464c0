//! Computations shared by the subcommands.

use rayon::prelude::*;
use steklov_core::asymptotics::AsymptoticModel;
use steklov_core::{
    capacity_analytic_disk, capacity_integral, extract_bands, ApertureShape, BandStructure, CapacityResult, CellMesh,
    GapReport, ModeSet, SweepContext,
};

use crate::config::{CapacityChoice, JobConfig};
use crate::CliError;

/// Sampled band widths below this are flagged degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

pub fn capacity_of(cfg: &JobConfig, shape: &ApertureShape) -> Result<CapacityResult, CliError> {
    let level = cfg.discretization.capacity_refinement;
    let r = match (cfg.discretization.capacity_method, shape) {
        (CapacityChoice::Auto | CapacityChoice::Analytic, ApertureShape::Disk { radius }) => capacity_analytic_disk(*radius),
        (CapacityChoice::Analytic, _) => {
            return Err(CliError::Config("analytic capacity is only available for disks".into()));
        }
        _ => capacity_integral(shape, level),
    };
    r.map_err(|e| CliError::Compute(e.to_string()))
}

pub struct LimitStudy {
    pub mesh: CellMesh,
    pub modes: ModeSet,
    pub model: AsymptoticModel,
    pub capacity: CapacityResult,
}

/// Limit problem on the structured mesh and the first-order model built from it.
pub fn limit_study(cfg: &JobConfig) -> Result<LimitStudy, CliError> {
    let geom = cfg.cell_geometry()?;
    let capacity = capacity_of(cfg, geom.aperture())?;
    // apertures only affect facet tags here; any admissible scale will do
    let eps = cfg.eps_list()[0];
    let ctx = SweepContext::new(&geom, eps, &cfg.limit_params()).map_err(CliError::from_band)?;
    let modes = ctx.limit(cfg.sweep.modes).map_err(CliError::from_band)?;
    let model = AsymptoticModel::build(
        &geom,
        &modes,
        &ctx.mesh,
        capacity.value,
        cfg.discretization.probe_radius,
        cfg.solver.cluster_tol,
    )
    .map_err(|e| CliError::Compute(e.to_string()))?;
    Ok(LimitStudy { mesh: ctx.mesh, modes, model, capacity })
}

pub struct ScaleStudy {
    pub eps: f64,
    /// Limit problem on this scale's mesh.
    pub limit: ModeSet,
    pub bands: BandStructure,
    pub gaps: GapReport,
}

/// Phase sweeps for every scale. Jobs run concurrently and are assembled by
/// index, so the result does not depend on scheduling.
pub fn scale_studies(cfg: &JobConfig) -> Result<Vec<ScaleStudy>, CliError> {
    let geom = cfg.cell_geometry()?;
    let params = cfg.sweep_params();
    let eps = cfg.eps_list();
    let grid = cfg.eta_grid();
    let count = cfg.sweep.modes;
    let ctxs: Vec<SweepContext> = eps
        .par_iter()
        .map(|&e| SweepContext::new(&geom, e, &params))
        .collect::<Result<_, _>>()
        .map_err(CliError::from_band)?;
    let jobs: Vec<(usize, Option<usize>)> = (0..ctxs.len())
        .flat_map(|c| std::iter::once((c, None)).chain((0..grid.len()).map(move |i| (c, Some(i)))))
        .collect();
    let results: Vec<ModeSet> = jobs
        .par_iter()
        .map(|&(c, job)| match job {
            None => ctxs[c].limit(count),
            Some(i) => ctxs[c].solve(grid[i], count),
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from_band)?;
    let provenance = params.describe();
    let per = grid.len() + 1;
    Ok(ctxs
        .iter()
        .enumerate()
        .map(|(c, ctx)| {
            let chunk = &results[c * per..(c + 1) * per];
            let bands = BandStructure::from_mode_sets(ctx.eps, &grid, &chunk[1..], &provenance);
            let gaps = extract_bands(&bands, DEGENERACY_TOL);
            ScaleStudy { eps: ctx.eps, limit: chunk[0].clone(), bands, gaps }
        })
        .collect())
}
