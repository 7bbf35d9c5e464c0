//! Job configuration: TOML with every block optional and unknown keys rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use steklov_core::{eta_grid, ApertureShape, CellGeometry, MeshParams, SolverOptions, SweepParams};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "STEKLOV_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ApertureConfig {
    Disk { radius: f64 },
    Ellipse { semi_x2: f64, semi_x3: f64 },
    Square { side: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ApertureConfig {
    pub fn shape(&self) -> ApertureShape {
        match self {
            ApertureConfig::Disk { radius } => ApertureShape::disk(*radius),
            ApertureConfig::Ellipse { semi_x2, semi_x3 } => ApertureShape::Ellipse { semi_x2: *semi_x2, semi_x3: *semi_x3 },
            ApertureConfig::Square { side } => ApertureShape::square(*side),
            ApertureConfig::Polygon { vertices } => ApertureShape::Polygon { vertices: vertices.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub ly: f64,
    pub depth: f64,
    /// `(P2, P3)` on the walls.
    pub probe: [f64; 2],
    pub aperture: ApertureConfig,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { ly: 1.0, depth: 1.0, probe: [0.5, -0.5], aperture: ApertureConfig::Disk { radius: 0.25 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityChoice {
    Auto,
    Analytic,
    Integral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    /// Background size of the aperture meshes.
    pub h: f64,
    /// Aperture element size as a fraction of `eps`.
    pub grading: f64,
    pub growth: f64,
    pub snap: bool,
    /// Structured mesh size of the limit problem.
    pub limit_h: f64,
    /// Probe averaging radius; three local wall sizes when absent.
    pub probe_radius: Option<f64>,
    pub capacity_method: CapacityChoice,
    pub capacity_refinement: u32,
    pub max_tets: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            h: 0.125,
            grading: 1.0 / 16.0,
            growth: 0.3,
            snap: true,
            limit_h: 0.05,
            probe_radius: None,
            capacity_method: CapacityChoice::Auto,
            capacity_refinement: steklov_core::capacity::DEFAULT_REFINEMENT,
            max_tets: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Uniform phase grid size; ignored when `eta` is given.
    pub eta_points: usize,
    pub eta: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    pub modes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { eta_points: 8, eta: None, eps: vec![0.05, 0.1, 0.15, 0.2], modes: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub dense_threshold: usize,
    pub block_size: usize,
    pub seed: u64,
    pub cluster_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            tol: o.tol,
            max_iter: o.max_iter,
            dense_threshold: o.dense_threshold,
            block_size: o.block_size,
            seed: o.seed,
            cluster_tol: steklov_core::spectral::DEFAULT_CLUSTER_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    /// Wide band table (one column per mode) for external plotting.
    Plot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("steklov-out"), formats: vec![Format::Csv] }
    }
}

/// Tolerances of the `verify` checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub oracle_tol: f64,
    pub capacity_tol: f64,
    pub scaling_tol: f64,
    pub lower_slack: f64,
    pub upper_growth: f64,
    pub kernel_tol: f64,
    pub symmetry_tol: f64,
    pub slope_tol: f64,
    pub flat_slope_fraction: f64,
    pub remainder_exponent: f64,
    pub gap_fraction: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            oracle_tol: 0.02,
            capacity_tol: 0.02,
            scaling_tol: 1e-3,
            lower_slack: 1e-9,
            upper_growth: 1.5,
            kernel_tol: 1e-10,
            symmetry_tol: 1e-8,
            slope_tol: 0.2,
            flat_slope_fraction: 0.05,
            remainder_exponent: 1.25,
            gap_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JobConfig {
    pub geometry: GeometryConfig,
    pub discretization: DiscretizationConfig,
    pub sweep: SweepConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl JobConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: JobConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&std::path::Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => JobConfig::default(),
        };
        if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
            cfg.output.dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.cell_geometry()?;
        let d = &self.discretization;
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(d.h > 0.0) || !(d.limit_h > 0.0) {
            return bad(format!("mesh sizes must be positive (h = {}, limit_h = {})", d.h, d.limit_h));
        }
        if !(d.grading > 0.0 && d.grading <= 1.0) {
            return bad(format!("grading must lie in (0, 1], got {}", d.grading));
        }
        if let Some(r) = d.probe_radius {
            if !(r > 0.0) {
                return bad(format!("probe_radius must be positive, got {r}"));
            }
        }
        if d.capacity_method == CapacityChoice::Analytic && !matches!(self.geometry.aperture, ApertureConfig::Disk { .. }) {
            return bad("analytic capacity is only available for disks".into());
        }
        if self.sweep.modes == 0 {
            return bad("sweep.modes must be at least 1".into());
        }
        if self.sweep.eps.is_empty() || self.sweep.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad(format!("sweep.eps entries must lie in (0, 1]: {:?}", self.sweep.eps));
        }
        let grid = self.eta_grid();
        if grid.is_empty() || grid.iter().any(|e| !(0.0..2.0 * std::f64::consts::PI).contains(e)) {
            return bad(format!("eta grid must be nonempty within [0, 2pi): {grid:?}"));
        }
        if !(self.solver.tol > 0.0) || self.solver.block_size == 0 || self.solver.max_iter == 0 {
            return bad("solver tolerances and counts must be positive".into());
        }
        Ok(())
    }

    pub fn cell_geometry(&self) -> Result<CellGeometry, CliError> {
        let g = &self.geometry;
        CellGeometry::new(g.ly, g.depth, g.probe, g.aperture.shape()).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Phase grid, ascending.
    pub fn eta_grid(&self) -> Vec<f64> {
        let mut g = match &self.sweep.eta {
            Some(list) => list.clone(),
            None => eta_grid(self.sweep.eta_points),
        };
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// The scale list sorted ascending without duplicates.
    pub fn eps_list(&self) -> Vec<f64> {
        let mut e = self.sweep.eps.clone();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions { tol: s.tol, max_iter: s.max_iter, dense_threshold: s.dense_threshold, block_size: s.block_size, seed: s.seed }
    }

    pub fn sweep_params(&self) -> SweepParams {
        let d = &self.discretization;
        SweepParams {
            mesh: MeshParams { h: d.h, grading: Some(d.grading), growth: d.growth, snap: d.snap, max_tets: d.max_tets },
            solver: self.solver_options(),
        }
    }

    pub fn limit_params(&self) -> SweepParams {
        let d = &self.discretization;
        SweepParams {
            mesh: MeshParams { h: d.limit_h, grading: None, growth: d.growth, snap: false, max_tets: d.max_tets },
            solver: self.solver_options(),
        }
    }

    /// SHA-256 of the resolved configuration without the output block, which
    /// does not influence any computed number.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let text = toml::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
