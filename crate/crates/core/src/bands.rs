//! Phase and scale sweeps: band tables, gaps, empirical slopes and the
//! two-sided eigenvalue bounds relative to the limit problem.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{
    apply_quasi_periodic, assemble_stiffness, assemble_surface_mass, AssemblyError, QuasiPeriodicSystem, SparseHermitian,
};
use crate::geometry::CellGeometry;
use crate::mesh::{generate_cell_mesh_with, CellMesh, MeshError, MeshParams};
use crate::spectral::{solve_steklov, ModeSet, SolverOptions, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BandError {
    #[error("empty eta grid")]
    EmptyGrid,
    #[error("eta = {0} outside [0, 2pi)")]
    EtaOutOfRange(f64),
    #[error("mode count must be at least 1")]
    NoModes,
    #[error("slope fit needs at least 3 distinct epsilon values, got {0}")]
    TooFewScales(usize),
    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEps(f64),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("solve failed at eps = {eps}, eta = {eta:?}: {source}")]
    Solve { eps: f64, eta: Option<f64>, source: SpectralError },
}

/// Mesh and solver settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub mesh: MeshParams,
    pub solver: SolverOptions,
}

impl SweepParams {
    pub fn describe(&self) -> String {
        let g = self.mesh.grading.map_or("none".to_string(), |g| format!("{g}"));
        format!(
            "h={} grading={} growth={} snap={} tol={:e} max_iter={} dense_threshold={}",
            self.mesh.h, g, self.mesh.growth, self.mesh.snap, self.solver.tol, self.solver.max_iter, self.solver.dense_threshold
        )
    }
}

/// Assembled forms on the mesh of one aperture scale.
pub struct SweepContext {
    pub eps: f64,
    pub mesh: CellMesh,
    stiffness: SparseHermitian,
    surface_mass: SparseHermitian,
    solver: SolverOptions,
}

impl SweepContext {
    pub fn new(geom: &CellGeometry, eps: f64, params: &SweepParams) -> Result<Self, BandError> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(BandError::InvalidEps(eps));
        }
        let mesh = generate_cell_mesh_with(geom, eps, &params.mesh)?;
        let stiffness = assemble_stiffness(&mesh)?;
        let surface_mass = assemble_surface_mass(&mesh);
        Ok(SweepContext { eps, mesh, stiffness, surface_mass, solver: params.solver.clone() })
    }

    /// The limit problem on this mesh (apertures closed).
    pub fn limit(&self, count: usize) -> Result<ModeSet, BandError> {
        let mut sys = QuasiPeriodicSystem::unconstrained(self.stiffness.clone(), self.surface_mass.clone());
        sys.eps = Some(self.eps);
        solve_steklov(&sys, count, &self.solver).map_err(|source| BandError::Solve { eps: self.eps, eta: None, source })
    }

    pub fn solve(&self, eta: f64, count: usize) -> Result<ModeSet, BandError> {
        let mut sys = apply_quasi_periodic(&self.stiffness, &self.surface_mass, &self.mesh, eta)?;
        sys.eps = Some(self.eps);
        solve_steklov(&sys, count, &self.solver).map_err(|source| BandError::Solve { eps: self.eps, eta: Some(eta), source })
    }

    pub fn sweep(&self, eta_grid: &[f64], count: usize, provenance: &str) -> Result<BandStructure, BandError> {
        check_grid(eta_grid, count)?;
        let sets: Vec<ModeSet> = eta_grid.par_iter().map(|&eta| self.solve(eta, count)).collect::<Result<_, _>>()?;
        Ok(BandStructure::from_mode_sets(self.eps, eta_grid, &sets, provenance))
    }
}

fn check_grid(eta_grid: &[f64], count: usize) -> Result<(), BandError> {
    if eta_grid.is_empty() {
        return Err(BandError::EmptyGrid);
    }
    if count == 0 {
        return Err(BandError::NoModes);
    }
    if let Some(&e) = eta_grid.iter().find(|e| !(0.0..2.0 * PI).contains(*e)) {
        return Err(BandError::EtaOutOfRange(e));
    }
    Ok(())
}

/// `Lambda_k(eta_i)` for one aperture scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub eps: f64,
    pub eta_grid: Vec<f64>,
    /// `values[i][k]` at `eta_grid[i]`.
    pub values: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub provenance: String,
}

impl BandStructure {
    pub fn from_mode_sets(eps: f64, eta_grid: &[f64], sets: &[ModeSet], provenance: &str) -> Self {
        BandStructure {
            eps,
            eta_grid: eta_grid.to_vec(),
            values: sets.iter().map(|s| s.eigenvalues.clone()).collect(),
            residuals: sets.iter().map(|s| s.residuals.clone()).collect(),
            provenance: provenance.to_string(),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn band(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|col| col[k]).collect()
    }

    /// Largest relative mismatch between `eta` and `2 pi - eta` over grid pairs.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &a) in self.eta_grid.iter().enumerate() {
            for (j, &b) in self.eta_grid.iter().enumerate() {
                if i < j && ((a + b) - 2.0 * PI).abs() < 1e-12 {
                    for (x, y) in self.values[i].iter().zip(&self.values[j]) {
                        worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
                    }
                }
            }
        }
        worst
    }
}

/// Sweeps the phase grid at one aperture scale.
pub fn sweep_eta(
    geom: &CellGeometry,
    eps: f64,
    eta_grid: &[f64],
    count: usize,
    params: &SweepParams,
) -> Result<BandStructure, BandError> {
    check_grid(eta_grid, count)?;
    let ctx = SweepContext::new(geom, eps, params)?;
    ctx.sweep(eta_grid, count, &params.describe())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// Sampled hull `[min_eta, max_eta]` of each band; an inner approximation.
    pub bands: Vec<(f64, f64)>,
    pub gaps: Vec<(f64, f64)>,
    pub degenerate: Vec<bool>,
    pub grid_size: usize,
}

impl GapReport {
    pub fn gaps_below(&self, lambda_max: f64) -> usize {
        self.gaps.iter().filter(|g| g.1 <= lambda_max).count()
    }

    /// Gap directly above band `k`, if any.
    pub fn gap_above(&self, k: usize) -> Option<(f64, f64)> {
        let top = self.bands[..=k].iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        let next = self.bands.get(k + 1)?.0;
        (next > top).then_some((top, next))
    }
}

pub fn extract_bands(bs: &BandStructure, degeneracy_tol: f64) -> GapReport {
    let mut bands = Vec::with_capacity(bs.num_modes());
    for k in 0..bs.num_modes() {
        let b = bs.band(k);
        bands.push((b.iter().copied().fold(f64::INFINITY, f64::min), b.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    }
    let degenerate = bands.iter().map(|b| b.1 - b.0 < degeneracy_tol).collect();
    let mut gaps = Vec::new();
    let mut top = f64::NEG_INFINITY;
    for k in 0..bands.len() {
        top = top.max(bands[k].1);
        if let Some(next) = bands.get(k + 1) {
            if next.0 > top {
                gaps.push((top, next.0));
            }
        }
    }
    GapReport { bands, gaps, degenerate, grid_size: bs.eta_grid.len() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub k: usize,
    pub eta: f64,
    pub eps: Vec<f64>,
    /// `Lambda_k^eps(eta) - Lambda_k^0` per scale.
    pub deltas: Vec<f64>,
    /// Fitted first-order slope in `delta = s eps + c eps^{3/2}`.
    pub slope: f64,
    pub remainder_coefficient: f64,
    pub target: f64,
    pub relative_deviation: f64,
    /// Log-log slope of `|delta - target eps|` against `eps`.
    pub remainder_exponent: f64,
    pub remainder_consistent: bool,
}

pub const REMAINDER_EXPONENT_MIN: f64 = 1.25;

/// Weighted least squares for `delta = s eps + c eps^{3/2}` with relative
/// weights `1 / eps^2`, which favour the small scales.
pub fn fit_slope_data(k: usize, eta: f64, eps: &[f64], deltas: &[f64], target: f64) -> Result<SlopeFit, BandError> {
    if eps.len() != deltas.len() {
        return Err(BandError::Shape(format!("{} scales, {} values", eps.len(), deltas.len())));
    }
    let mut distinct = eps.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(BandError::TooFewScales(distinct.len()));
    }
    if let Some(&e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(BandError::InvalidEps(e));
    }
    // rows (1, sqrt(eps)) against delta / eps
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&e, &d) in eps.iter().zip(deltas) {
        let (x, y) = (e.sqrt(), d / e);
        a11 += 1.0;
        a12 += x;
        a22 += x * x;
        b1 += y;
        b2 += x * y;
    }
    let det = a11 * a22 - a12 * a12;
    let slope = (a22 * b1 - a12 * b2) / det;
    let remainder_coefficient = (a11 * b2 - a12 * b1) / det;

    let points: Vec<(f64, f64)> = eps
        .iter()
        .zip(deltas)
        .map(|(&e, &d)| (e, (d - target * e).abs()))
        .filter(|&(_, r)| r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    let scale = deltas.iter().map(|d| d.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let remainder_exponent = if points.len() >= 2 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    } else if eps.iter().zip(deltas).all(|(&e, &d)| (d - target * e).abs() <= 1e-12 * scale) {
        // the first-order model is exact on this data
        f64::INFINITY
    } else {
        f64::NAN
    };
    Ok(SlopeFit {
        k,
        eta,
        eps: eps.to_vec(),
        deltas: deltas.to_vec(),
        slope,
        remainder_coefficient,
        target,
        relative_deviation: if target != 0.0 { (slope - target).abs() / target.abs() } else { slope.abs() },
        remainder_exponent,
        remainder_consistent: remainder_exponent >= REMAINDER_EXPONENT_MIN,
    })
}

/// Solves the limit and model problems on each scale's mesh and fits the slope
/// of mode `k` at phase `eta` against the first-order `target`.
pub fn fit_slope(
    geom: &CellGeometry,
    k: usize,
    eta: f64,
    eps_list: &[f64],
    params: &SweepParams,
    target: f64,
) -> Result<SlopeFit, BandError> {
    let mut distinct = eps_list.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(BandError::TooFewScales(distinct.len()));
    }
    let deltas: Vec<f64> = eps_list
        .par_iter()
        .map(|&eps| {
            let ctx = SweepContext::new(geom, eps, params)?;
            let l0 = ctx.limit(k + 1)?.eigenvalues[k];
            Ok(ctx.solve(eta, k + 1)?.eigenvalues[k] - l0)
        })
        .collect::<Result<_, BandError>>()?;
    fit_slope_data(k, eta, eps_list, &deltas, target)
}

/// Two-sided bound against the limit problem at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub eps: f64,
    /// `min_eta (Lambda_k^eps - Lambda_k^0)` per mode.
    pub lower_slack: Vec<f64>,
    pub lower_ok: Vec<bool>,
    /// Smallest `C_k` with `Lambda_k^eps <= Lambda_k^0 + C_k eps` on the grid.
    pub upper_constant: Vec<f64>,
}

pub const LOWER_BOUND_SLACK: f64 = 1e-9;

impl BoundsReport {
    pub fn all_lower_ok(&self) -> bool {
        self.lower_ok.iter().all(|&b| b)
    }
}

pub fn verify_bounds(bs: &BandStructure, limit: &ModeSet) -> BoundsReport {
    let n = bs.num_modes().min(limit.len());
    let mut lower_slack = vec![f64::INFINITY; n];
    let mut upper = vec![0.0f64; n];
    for col in &bs.values {
        for k in 0..n {
            let d = col[k] - limit.eigenvalues[k];
            lower_slack[k] = lower_slack[k].min(d);
            upper[k] = upper[k].max(d / bs.eps);
        }
    }
    BoundsReport {
        eps: bs.eps,
        lower_ok: lower_slack.iter().map(|&s| s >= -LOWER_BOUND_SLACK).collect(),
        lower_slack,
        upper_constant: upper,
    }
}

/// Upper constants are stable when none exceeds 1.5 times its value at the
/// largest scale (plus an absolute floor for modes the apertures do not move).
pub fn upper_bound_stable(reports: &[BoundsReport], k: usize, floor: f64) -> bool {
    let Some(largest) = reports.iter().max_by(|a, b| a.eps.total_cmp(&b.eps)) else {
        return false;
    };
    let reference = largest.upper_constant[k];
    reports.iter().all(|r| r.upper_constant[k].is_finite() && r.upper_constant[k] <= 1.5 * reference + floor)
}

/// Containment of sampled band hulls in the first-order prediction inflated by
/// `C eps^{3/2}`, with the smallest such `C` over the scale list.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    /// Constant needed at each scale.
    pub required: Vec<f64>,
    pub constant: f64,
    /// The inflation stays below `INFLATION_SHARE` of the predicted width at
    /// every scale, so the containment is not vacuous.
    pub holds: bool,
    /// `A = B`: the band width is not resolved at first order.
    pub unresolved: bool,
}

pub const INFLATION_SHARE: f64 = 0.25;

/// `scales[i] = (eps, lambda0 on that scale's mesh, sampled hull)`.
pub fn band_containment(k: usize, a: f64, b: f64, scales: &[(f64, f64, (f64, f64))]) -> Containment {
    let required: Vec<f64> = scales
        .iter()
        .map(|&(eps, l0, (lo, hi))| {
            let s = eps.powf(1.5);
            ((l0 + a * eps - lo) / s).max((hi - l0 - b * eps) / s).max(0.0)
        })
        .collect();
    let constant = required.iter().copied().fold(0.0, f64::max);
    let unresolved = (b - a).abs() <= 1e-12 * b.abs().max(1.0);
    let holds = !unresolved && scales.iter().all(|&(eps, _, _)| constant * eps.powf(1.5) <= INFLATION_SHARE * (b - a) * eps);
    Containment { k, a, b, required, constant, holds, unresolved }
}

#[cfg(test)]
mod tests;
