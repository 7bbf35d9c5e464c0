//! First-order band asymptotics from limit-problem data: probe values,
//! boundary-layer coefficients and the eigenvalue corrections they induce.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64 as c64;
use thiserror::Error;

use crate::geometry::{CellGeometry, Wall};
use crate::mesh::CellMesh;
use crate::spectral::ModeSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("probe point x1 = {0} is not on a wall")]
    ProbeOffWall(f64),
    #[error("probe radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("only {found} wall nodes within radius {radius}; try radius >= {suggested:.6}")]
    TooFewNodes { radius: f64, found: usize, suggested: f64 },
    #[error("eigenvalue has multiplicity {0}; use correction_multiple for clusters")]
    Cluster(usize),
    #[error("epsilon must be nonnegative and finite, got {0}")]
    InvalidEps(f64),
    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("mode has {got} entries but the mesh has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Limit-mode values at the two probe points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeValues {
    pub u0: c64,
    pub u1: c64,
    pub radius: f64,
}

fn wall_of(x1: f64) -> Result<Wall, AsymptoticsError> {
    if x1 == Wall::Near.x1() {
        Ok(Wall::Near)
    } else if x1 == Wall::Far.x1() {
        Ok(Wall::Far)
    } else {
        Err(AsymptoticsError::ProbeOffWall(x1))
    }
}

/// Default averaging radius: three local wall mesh sizes.
pub fn default_probe_radius(mesh: &CellMesh, p: [f64; 3]) -> Result<f64, AsymptoticsError> {
    let wall = wall_of(p[0])?;
    Ok(3.0 * mesh.local_wall_size(wall, [p[1], p[2]]))
}

/// Area-weighted mean of the nodal values on the wall within `radius` of `p`.
pub fn evaluate_at_probe(mode: &[c64], mesh: &CellMesh, p: [f64; 3], radius: f64) -> Result<c64, AsymptoticsError> {
    let wall = wall_of(p[0])?;
    if !(radius > 0.0) {
        return Err(AsymptoticsError::NonPositiveRadius(radius));
    }
    if mode.len() != mesh.vertices.len() {
        return Err(AsymptoticsError::DimensionMismatch { expected: mesh.vertices.len(), got: mode.len() });
    }
    let dist = |n: usize| {
        let v = mesh.vertices[n];
        (v[1] - p[1]).hypot(v[2] - p[2])
    };
    let mut weight = vec![0.0; mesh.vertices.len()];
    for f in mesh.wall_facets(wall) {
        let a = crate::mesh::triangle_area(mesh.facet_points(f)) / 3.0;
        for &n in &f.nodes {
            weight[n] += a;
        }
    }
    let mut near: Vec<(f64, usize)> = (0..weight.len()).filter(|&n| weight[n] > 0.0).map(|n| (dist(n), n)).collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let inside = near.iter().take_while(|(d, _)| *d <= radius).count();
    if inside < 2 {
        let suggested = near.get(1).map_or(f64::INFINITY, |x| x.0 * 1.01);
        return Err(AsymptoticsError::TooFewNodes { radius, found: inside, suggested });
    }
    let (mut s, mut w) = (c64::new(0.0, 0.0), 0.0);
    for &(_, n) in &near[..inside] {
        s += mode[n] * weight[n];
        w += weight[n];
    }
    Ok(s / w)
}

/// Boundary-layer coefficients `(a0, a1)` at the two apertures.
pub fn layer_coefficients(u0: c64, u1: c64, eta: f64) -> (c64, c64) {
    let a0 = (c64::from_polar(1.0, -eta) * u1 - u0) * 0.5;
    let a1 = -c64::from_polar(1.0, eta) * a0;
    (a0, a1)
}

fn jump(u0: c64, u1: c64, eta: f64) -> c64 {
    u0 - c64::from_polar(1.0, -eta) * u1
}

/// `pi cap |u0 - e^{-i eta} u1|^2` for a simple eigenvalue.
pub fn correction_simple(u0: c64, u1: c64, cap: f64, eta: f64) -> f64 {
    PI * cap * jump(u0, u1, eta).norm_sqr()
}

/// Eigenvalues of the rank-one matrix `pi cap conj(v) v^T` built from the rows
/// `(u0, u1)` of an orthonormal cluster basis, ascending: the `m - 1` zeros
/// come first and the trace last.
pub fn correction_multiple(values: &[[c64; 2]], cap: f64, eta: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    if let Some(last) = out.last_mut() {
        *last = PI * cap * values.iter().map(|r| jump(r[0], r[1], eta).norm_sqr()).sum::<f64>();
    }
    out
}

/// Range of `sum_j |u0_j - e^{-i eta} u1_j|^2` over all `eta`.
fn jump_range(rows: &[[c64; 2]]) -> (f64, f64) {
    let s: f64 = rows.iter().map(|r| r[0].norm_sqr() + r[1].norm_sqr()).sum();
    let w: c64 = rows.iter().map(|r| r[0].conj() * r[1]).sum();
    ((s - 2.0 * w.norm()).max(0.0), s + 2.0 * w.norm())
}

/// `(A, B)`: extreme first-order slopes of a simple band.
pub fn band_edges(u0: c64, u1: c64, cap: f64) -> (f64, f64) {
    let (lo, hi) = jump_range(&[[u0, u1]]);
    (PI * cap * lo, PI * cap * hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPrediction {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
    /// `A = B`: the band is a point at first order and its width is unresolved.
    pub degenerate: bool,
}

pub fn predict_band(
    lambda0: f64,
    probes: &ProbeValues,
    multiplicity: usize,
    cap: f64,
    eps: f64,
) -> Result<BandPrediction, AsymptoticsError> {
    if multiplicity > 1 {
        return Err(AsymptoticsError::Cluster(multiplicity));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(AsymptoticsError::InvalidEps(eps));
    }
    let (a, b) = band_edges(probes.u0, probes.u1, cap);
    Ok(BandPrediction { lo: lambda0 + a * eps, hi: lambda0 + b * eps, a, b, degenerate: is_degenerate(a, b) })
}

fn is_degenerate(a: f64, b: f64) -> bool {
    (b - a).abs() <= 1e-12 * b.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMode {
    pub lambda0: f64,
    pub probes: ProbeValues,
    pub multiplicity: usize,
    /// Indices of the cluster this mode belongs to.
    pub cluster: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticModel {
    pub cap: f64,
    pub modes: Vec<ModelMode>,
}

impl AsymptoticModel {
    /// Probe values of every limit mode, phase-fixed so the first nonzero probe
    /// value is real and positive, grouped into clusters.
    pub fn build(
        geom: &CellGeometry,
        limit: &ModeSet,
        mesh: &CellMesh,
        cap: f64,
        radius: Option<f64>,
        cluster_tol: f64,
    ) -> Result<Self, AsymptoticsError> {
        if !(cap > 0.0) {
            return Err(AsymptoticsError::NonPositiveCapacity(cap));
        }
        let (p0, p1) = (geom.probe_point(Wall::Near), geom.probe_point(Wall::Far));
        let r = match radius {
            Some(r) => r,
            None => default_probe_radius(mesh, p0)?.max(default_probe_radius(mesh, p1)?),
        };
        let clusters = limit.clusters(cluster_tol);
        let mut modes = Vec::with_capacity(limit.len());
        for cl in &clusters {
            for k in cl.clone() {
                let v = &limit.eigenvectors[k];
                let (mut u0, mut u1) = (evaluate_at_probe(v, mesh, p0, r)?, evaluate_at_probe(v, mesh, p1, r)?);
                let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
                if let Some(first) = [u0, u1].into_iter().find(|u| u.norm() > 1e-10 * scale) {
                    let phase = first.conj() / first.norm();
                    u0 *= phase;
                    u1 *= phase;
                }
                modes.push(ModelMode {
                    lambda0: limit.eigenvalues[k],
                    probes: ProbeValues { u0, u1, radius: r },
                    multiplicity: cl.len(),
                    cluster: cl.clone(),
                });
            }
        }
        Ok(AsymptoticModel { cap, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    fn rows(&self, cl: &Range<usize>) -> Vec<[c64; 2]> {
        self.modes[cl.clone()].iter().map(|m| [m.probes.u0, m.probes.u1]).collect()
    }

    fn cluster_ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for m in &self.modes {
            if out.last() != Some(&m.cluster) {
                out.push(m.cluster.clone());
            }
        }
        out
    }

    /// First-order corrections of every mode at the given phase.
    pub fn corrections(&self, eta: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for cl in self.cluster_ranges() {
            let rows = self.rows(&cl);
            if rows.len() == 1 {
                out.push(correction_simple(rows[0][0], rows[0][1], self.cap, eta));
            } else {
                out.extend(correction_multiple(&rows, self.cap, eta));
            }
        }
        out
    }

    /// Rotation-invariant `sum_j |v_j|^2` of the cluster containing mode `k`.
    pub fn cluster_trace(&self, k: usize, eta: f64) -> f64 {
        let cl = &self.modes[k].cluster;
        self.rows(cl).iter().map(|r| jump(r[0], r[1], eta).norm_sqr()).sum()
    }

    /// `(A_k, B_k)` per mode; inside a cluster only the last member moves.
    pub fn band_edges(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for cl in self.cluster_ranges() {
            let (lo, hi) = jump_range(&self.rows(&cl));
            out.extend(std::iter::repeat_n((0.0, 0.0), cl.len() - 1));
            out.push((PI * self.cap * lo, PI * self.cap * hi));
        }
        out
    }

    pub fn predict(&self, eps: f64) -> Result<Vec<BandPrediction>, AsymptoticsError> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(AsymptoticsError::InvalidEps(eps));
        }
        Ok(self
            .modes
            .iter()
            .zip(self.band_edges())
            .map(|(m, (a, b))| BandPrediction {
                lo: m.lambda0 + a * eps,
                hi: m.lambda0 + b * eps,
                a,
                b,
                degenerate: is_degenerate(a, b),
            })
            .collect())
    }
}
