//! P1 finite-element forms and the quasi-periodic reduction.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{self, Write};

use num_complex::Complex64 as c64;
use thiserror::Error;

use crate::mesh::{cross, dot, sub, tet_volume, triangle_area, CellMesh, FacetTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("degenerate element {tet}: volume {volume:e}")]
    DegenerateElement { tet: usize, volume: f64 },
    #[error("phase eta = {0} outside [0, 2pi)")]
    PhaseOutOfRange(f64),
    #[error("inconsistent aperture pairing: {0}")]
    InconsistentPairing(String),
}

/// Hermitian matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<c64>,
    real: bool,
}

impl SparseHermitian {
    /// Builds the matrix from upper-triangle contributions `(i, j, v)` with
    /// `i <= j`; duplicates are summed and the lower triangle is mirrored, so
    /// the result is exactly Hermitian.
    pub fn from_upper_triplets(dim: usize, mut triplets: Vec<(usize, usize, c64)>) -> Self {
        debug_assert!(triplets.iter().all(|&(i, j, _)| i <= j && j < dim));
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut upper: Vec<(usize, usize, c64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match upper.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => upper.push((i, j, v)),
            }
        }
        let mut full: Vec<(usize, usize, c64)> = Vec::with_capacity(2 * upper.len());
        for &(i, j, v) in &upper {
            if i == j {
                full.push((i, i, c64::new(v.re, 0.0)));
            } else {
                full.push((i, j, v));
                full.push((j, i, v.conj()));
            }
        }
        full.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        for &(i, _, _) in &full {
            row_ptr[i + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let real = full.iter().all(|e| e.2.im == 0.0);
        SparseHermitian {
            dim,
            row_ptr,
            col_idx: full.iter().map(|e| e.1).collect(),
            values: full.iter().map(|e| e.2).collect(),
            real,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => c64::new(0.0, 0.0),
        }
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![c64::new(0.0, 0.0); self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[c64], y: &mut [c64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = c64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `x^H A x`, real for Hermitian `A`.
    pub fn quadratic_form(&self, x: &[c64]) -> f64 {
        let ax = self.mul_vec(x);
        x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |a_ij - conj(a_ji)|` over stored entries.
    pub fn hermitian_defect(&self) -> f64 {
        self.entries().map(|(i, j, v)| (v - self.get(j, i).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> SparseHermitian {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    /// Entrywise sum of two matrices of equal dimension.
    pub fn add(&self, other: &SparseHermitian) -> SparseHermitian {
        assert_eq!(self.dim, other.dim);
        let trip = self
            .entries()
            .chain(other.entries())
            .filter(|&(i, j, _)| i <= j)
            .collect();
        SparseHermitian::from_upper_triplets(self.dim, trip)
    }

    pub fn sum_entries(&self) -> c64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<c64>> {
        let mut d = vec![vec![c64::new(0.0, 0.0); self.dim]; self.dim];
        for (i, j, v) in self.entries() {
            d[i][j] = v;
        }
        d
    }

    /// Coordinate dump: one `row col re im` record per stored entry.
    pub fn write_coo<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for (i, j, v) in self.entries() {
            writeln!(out, "{i} {j} {:.17e} {:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Gradients of the four barycentric coordinates and the volume.
pub(crate) fn p1_gradients(p: [[f64; 3]; 4]) -> ([[f64; 3]; 4], f64) {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let e3 = sub(p[3], p[0]);
    let c23 = cross(e2, e3);
    let det = dot(e1, c23);
    let g1 = c23.map(|x| x / det);
    let g2 = cross(e3, e1).map(|x| x / det);
    let g3 = cross(e1, e2).map(|x| x / det);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    ([g0, g1, g2, g3], det / 6.0)
}

/// Element stiffness matrix `vol * grad(phi_i) . grad(phi_j)`.
pub fn element_stiffness(p: [[f64; 3]; 4]) -> [[f64; 4]; 4] {
    let (g, vol) = p1_gradients(p);
    let mut k = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] = vol * dot(g[i], g[j]);
        }
    }
    k
}

/// Exact P1 mass matrix of a triangle of area `a`: `(a/12) (1 + delta_ij)`.
pub fn element_surface_mass(a: f64) -> [[f64; 3]; 3] {
    let mut m = [[a / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = a / 6.0;
    }
    m
}

pub fn assemble_stiffness(mesh: &CellMesh) -> Result<SparseHermitian, AssemblyError> {
    let mut trip = Vec::with_capacity(mesh.tets.len() * 10);
    for (t, tet) in mesh.tets.iter().enumerate() {
        let p = mesh.tet_points(t);
        let volume = tet_volume(p);
        if !(volume > 0.0) {
            return Err(AssemblyError::DegenerateElement { tet: t, volume });
        }
        let k = element_stiffness(p);
        for a in 0..4 {
            for b in 0..4 {
                if tet[a] <= tet[b] {
                    trip.push((tet[a], tet[b], c64::new(k[a][b], 0.0)));
                }
            }
        }
    }
    Ok(SparseHermitian::from_upper_triplets(mesh.vertices.len(), trip))
}

pub fn assemble_surface_mass(mesh: &CellMesh) -> SparseHermitian {
    let mut trip = Vec::new();
    for f in mesh.facets_with(FacetTag::FreeSurface) {
        let m = element_surface_mass(triangle_area(mesh.facet_points(f)));
        for a in 0..3 {
            for b in 0..3 {
                if f.nodes[a] <= f.nodes[b] {
                    trip.push((f.nodes[a], f.nodes[b], c64::new(m[a][b], 0.0)));
                }
            }
        }
    }
    SparseHermitian::from_upper_triplets(mesh.vertices.len(), trip)
}

/// `exp(-i eta)` with exact values at multiples of `pi/2`. Phases above `pi`
/// are the conjugates of their reflections, so `bloch_phase(2pi - eta)` is the
/// exact conjugate of `bloch_phase(eta)`.
pub fn bloch_phase(eta: f64) -> c64 {
    if eta > PI {
        return bloch_phase(2.0 * PI - eta).conj();
    }
    if eta == 0.0 {
        c64::new(1.0, 0.0)
    } else if eta == FRAC_PI_2 {
        c64::new(0.0, -1.0)
    } else if eta == PI {
        c64::new(-1.0, 0.0)
    } else {
        let (s, c) = eta.sin_cos();
        c64::new(c, -s)
    }
}

/// Uniform grid `2 pi i / n`, `i < n`. Each pair `(eta[i], eta[n - i])` is
/// rounded (by at most one ulp of `2pi`) so that both are exact reflections of
/// each other in floating point, making their phases exact conjugates.
pub fn eta_grid(n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for i in 1..n {
        if 2 * i < n {
            let r = 2.0 * PI - 2.0 * PI * i as f64 / n as f64;
            g[i] = 2.0 * PI - r;
            g[n - i] = r;
        } else if 2 * i == n {
            g[i] = PI;
        }
    }
    g
}

/// Map from full-mesh nodes to reduced unknowns: `u_full[n] = multiplier[n] * u_red[index[n]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub index: Vec<usize>,
    pub multiplier: Vec<c64>,
    pub reduced_dim: usize,
}

impl DofMap {
    pub fn identity(n: usize) -> Self {
        DofMap { index: (0..n).collect(), multiplier: vec![c64::new(1.0, 0.0); n], reduced_dim: n }
    }

    pub fn full_dim(&self) -> usize {
        self.index.len()
    }

    pub fn expand(&self, u: &[c64]) -> Vec<c64> {
        self.index.iter().zip(&self.multiplier).map(|(&i, &m)| m * u[i]).collect()
    }

    /// `P^H v` for a full-space vector.
    pub fn restrict_adjoint(&self, v: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.reduced_dim];
        for (n, &i) in self.index.iter().enumerate() {
            out[i] += self.multiplier[n].conj() * v[n];
        }
        out
    }

    fn reduce(&self, a: &SparseHermitian) -> SparseHermitian {
        let mut trip = Vec::with_capacity(a.nnz());
        for (n, m, v) in a.entries() {
            let (i, j) = (self.index[n], self.index[m]);
            if i <= j {
                let w = self.multiplier[n].conj() * self.multiplier[m];
                trip.push((i, j, v * w));
            }
        }
        SparseHermitian::from_upper_triplets(self.reduced_dim, trip)
    }
}

/// Reduced stiffness and surface-mass forms on the quasi-periodic subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPeriodicSystem {
    pub stiffness: SparseHermitian,
    pub surface_mass: SparseHermitian,
    pub eta: Option<f64>,
    pub eps: Option<f64>,
    pub dof_map: DofMap,
}

impl QuasiPeriodicSystem {
    /// The unconstrained pair: the limit problem on the given mesh.
    pub fn unconstrained(stiffness: SparseHermitian, surface_mass: SparseHermitian) -> Self {
        let n = stiffness.dim();
        QuasiPeriodicSystem { stiffness, surface_mass, eta: None, eps: None, dof_map: DofMap::identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    /// True when both reduced forms have real entries.
    pub fn is_real(&self) -> bool {
        self.stiffness.is_real() && self.surface_mass.is_real()
    }
}

/// Eliminates every wall-0 aperture node as `e^{-i eta}` times its wall-1 partner.
pub fn apply_quasi_periodic(
    k: &SparseHermitian,
    m: &SparseHermitian,
    mesh: &CellMesh,
    eta: f64,
) -> Result<QuasiPeriodicSystem, AssemblyError> {
    if !(0.0..2.0 * PI).contains(&eta) {
        return Err(AssemblyError::PhaseOutOfRange(eta));
    }
    let n = mesh.vertices.len();
    if k.dim() != n || m.dim() != n {
        return Err(AssemblyError::InconsistentPairing("matrix dimension differs from mesh".into()));
    }
    let mut master_of: Vec<Option<usize>> = vec![None; n];
    let mut is_master = vec![false; n];
    for &(s, ms) in &mesh.aperture_pairing {
        if s >= n || ms >= n || s == ms {
            return Err(AssemblyError::InconsistentPairing(format!("pair ({s},{ms})")));
        }
        if master_of[s].is_some() || is_master[ms] {
            return Err(AssemblyError::InconsistentPairing(format!("node repeated in pair ({s},{ms})")));
        }
        master_of[s] = Some(ms);
        is_master[ms] = true;
    }
    for &(s, _) in &mesh.aperture_pairing {
        if is_master[s] {
            return Err(AssemblyError::InconsistentPairing(format!("node {s} is both slave and master")));
        }
    }
    let phase = bloch_phase(eta);
    let mut index = vec![usize::MAX; n];
    let mut multiplier = vec![c64::new(1.0, 0.0); n];
    let mut next = 0;
    for v in 0..n {
        if master_of[v].is_none() {
            index[v] = next;
            next += 1;
        }
    }
    for v in 0..n {
        if let Some(ms) = master_of[v] {
            index[v] = index[ms];
            multiplier[v] = phase;
        }
    }
    let dof_map = DofMap { index, multiplier, reduced_dim: next };
    Ok(QuasiPeriodicSystem {
        stiffness: dof_map.reduce(k),
        surface_mass: dof_map.reduce(m),
        eta: Some(eta),
        eps: Some(mesh.eps),
        dof_map,
    })
}
