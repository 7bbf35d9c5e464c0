//! Generalized Steklov eigenproblem `K u = Lambda M u` solved through the
//! bounded operator `B = (K + M)^{-1} M` in the `(K + M)` inner product.

mod dense;
mod krylov;
mod oracle;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use thiserror::Error;

use crate::assembly::{QuasiPeriodicSystem, SparseHermitian};

pub use oracle::{box_mode_value, box_sloshing_eigenvalues, box_sloshing_modes, BoxMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("internal error: factorization of K + M failed: {0}")]
    Factorization(String),
    #[error("eigensolver did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid mode count {requested}: surface rank is {available}")]
    InvalidCount { requested: usize, available: usize },
    #[error("test field vanishes on free surface")]
    ZeroSurfaceNorm,
    #[error("vector length {got} does not match system dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Eigenvalues in nondecreasing order with eigenvectors normalized in `L2(gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub eigenvalues: Vec<f64>,
    /// Reduced-space eigenvectors.
    pub eigenvectors: Vec<Vec<c64>>,
    pub eta: Option<f64>,
    pub eps: Option<f64>,
    /// Residuals `||B x - mu x||` in the `(K + M)` norm with `||x|| = 1` in that norm.
    pub residuals: Vec<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Index ranges of eigenvalue clusters at the given relative tolerance.
    pub fn clusters(&self, rel_tol: f64) -> Vec<std::ops::Range<usize>> {
        clusters(&self.eigenvalues, rel_tol)
    }
}

/// Groups consecutive sorted values within `rel_tol` of each other.
pub fn clusters(values: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let (a, b) = (values[i - 1], values[i]);
            (b - a).abs() > rel_tol * a.abs().max(b.abs())
        };
        if split {
            out.push(start..i);
            start = i;
        }
    }
    out
}

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// `M = 1 / (1 + Lambda)`.
pub fn lambda_to_m(lambda: f64) -> f64 {
    1.0 / (1.0 + lambda)
}

/// `Lambda = 1 / M - 1`.
pub fn m_to_lambda(m: f64) -> f64 {
    1.0 / m - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold: `tau <= tol * (1 + Lambda)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Systems up to this dimension use a dense eigendecomposition.
    pub dense_threshold: usize,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 500, dense_threshold: 600, block_size: 4, seed: 0x5eed }
    }
}

/// The factorized operator `B = G^{-1} M` with `G = K + M`.
pub struct SteklovOperator<'a> {
    system: &'a QuasiPeriodicSystem,
    g: SparseHermitian,
    llt: faer::sparse::linalg::solvers::Llt<usize, c64>,
}

pub(crate) fn to_faer(a: &SparseHermitian) -> SparseColMat<usize, c64> {
    // lower triangle, column-major; Hermitian so row i of A is column i of A^H
    let trip: Vec<Triplet<usize, usize, c64>> = a
        .entries()
        .filter(|&(i, j, _)| i >= j)
        .map(|(i, j, v)| Triplet::new(i, j, v))
        .collect();
    SparseColMat::try_new_from_triplets(a.dim(), a.dim(), &trip).expect("valid sparse structure")
}

impl<'a> SteklovOperator<'a> {
    pub fn new(system: &'a QuasiPeriodicSystem) -> Result<Self, SpectralError> {
        let g = system.stiffness.add(&system.surface_mass);
        let llt = to_faer(&g)
            .sp_cholesky(Side::Lower)
            .map_err(|e| SpectralError::Factorization(format!("{e:?}")))?;
        Ok(SteklovOperator { system, g, llt })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn system(&self) -> &QuasiPeriodicSystem {
        self.system
    }

    pub fn g(&self) -> &SparseHermitian {
        &self.g
    }

    /// Solves `G X = R` for a block of right-hand sides in place.
    pub(crate) fn solve_block(&self, rhs: &mut Mat<c64>) {
        self.llt.solve_in_place(rhs.as_mut());
    }

    pub fn apply_b(&self, v: &[c64]) -> Vec<c64> {
        let mv = self.system.surface_mass.mul_vec(v);
        let mut x = Mat::<c64>::from_fn(v.len(), 1, |i, _| mv[i]);
        self.solve_block(&mut x);
        (0..v.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `(u, v)_eps = v^H G u`.
    pub fn inner(&self, u: &[c64], v: &[c64]) -> c64 {
        let gu = self.g.mul_vec(u);
        v.iter().zip(&gu).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self, u: &[c64]) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }
}

/// `v^H K v / v^H M v`.
pub fn rayleigh_quotient(system: &QuasiPeriodicSystem, v: &[c64]) -> Result<f64, SpectralError> {
    if v.len() != system.dim() {
        return Err(SpectralError::DimensionMismatch { expected: system.dim(), got: v.len() });
    }
    let den = system.surface_mass.quadratic_form(v);
    let scale: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>() * system.surface_mass.max_abs();
    if !(den > 1e-14 * scale) || den <= 0.0 {
        return Err(SpectralError::ZeroSurfaceNorm);
    }
    Ok(system.stiffness.quadratic_form(v).max(0.0) / den)
}

/// Localization interval `[mu - tau, mu + tau]` from a trial pair of `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    pub mu: f64,
    pub tau: f64,
    pub lo: f64,
    pub hi: f64,
    /// `tau < mu`: the interval is guaranteed to contain an eigenvalue of `B`.
    pub informative: bool,
}

pub fn residual_localize(op: &SteklovOperator<'_>, mu: f64, v: &[c64]) -> Result<Localization, SpectralError> {
    if v.len() != op.dim() {
        return Err(SpectralError::DimensionMismatch { expected: op.dim(), got: v.len() });
    }
    let n = op.norm(v);
    if !(n > 0.0) {
        return Err(SpectralError::ZeroSurfaceNorm);
    }
    let x: Vec<c64> = v.iter().map(|a| a / n).collect();
    let bx = op.apply_b(&x);
    let r: Vec<c64> = bx.iter().zip(&x).map(|(b, a)| b - a * mu).collect();
    let tau = op.norm(&r);
    Ok(Localization { mu, tau, lo: mu - tau, hi: mu + tau, informative: tau < mu })
}

/// Rotates a vector so its largest-modulus entry is real and positive
/// (first such entry on ties).
pub(crate) fn fix_phase(v: &mut [c64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        let a = x.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let p = v[best].conj() / best_abs;
        for x in v.iter_mut() {
            *x *= p;
        }
        v[best] = c64::new(v[best].re, 0.0);
    }
}

fn surface_rank(system: &QuasiPeriodicSystem) -> usize {
    (0..system.dim()).filter(|&i| system.surface_mass.row(i).next().is_some()).count()
}

/// The `count` smallest eigenvalues of `K u = Lambda M u`.
pub fn solve_steklov(system: &QuasiPeriodicSystem, count: usize, opts: &SolverOptions) -> Result<ModeSet, SpectralError> {
    let rank = surface_rank(system);
    if count == 0 || count > rank {
        return Err(SpectralError::InvalidCount { requested: count, available: rank });
    }
    let op = SteklovOperator::new(system)?;
    let (mus, vecs, residuals) = if system.dim() <= opts.dense_threshold {
        dense::largest(&op, count)?
    } else {
        krylov::largest(&op, count, opts)?
    };
    finish(system, mus, vecs, residuals)
}

/// Dense reference solve regardless of dimension (small systems only).
pub fn solve_steklov_dense(system: &QuasiPeriodicSystem, count: usize) -> Result<ModeSet, SpectralError> {
    let rank = surface_rank(system);
    if count == 0 || count > rank {
        return Err(SpectralError::InvalidCount { requested: count, available: rank });
    }
    let op = SteklovOperator::new(system)?;
    let (mus, vecs, residuals) = dense::largest(&op, count)?;
    finish(system, mus, vecs, residuals)
}

/// All nonzero `M`-eigenvalues of `B` by dense decomposition, descending.
pub fn dense_m_spectrum(system: &QuasiPeriodicSystem) -> Result<Vec<f64>, SpectralError> {
    let op = SteklovOperator::new(system)?;
    dense::m_spectrum(&op)
}

fn finish(
    system: &QuasiPeriodicSystem,
    mus: Vec<f64>,
    vecs: Vec<Vec<c64>>,
    residuals: Vec<f64>,
) -> Result<ModeSet, SpectralError> {
    let mut items: Vec<(f64, Vec<c64>, f64)> = Vec::with_capacity(mus.len());
    for ((mu, mut v), tau) in mus.into_iter().zip(vecs).zip(residuals) {
        let s = system.surface_mass.quadratic_form(&v).sqrt();
        for x in v.iter_mut() {
            *x /= s;
        }
        fix_phase(&mut v);
        debug_assert!(mu > 0.0);
        // the Rayleigh quotient stays accurate near Lambda = 0 where 1/mu - 1 cancels
        let lambda = system.stiffness.quadratic_form(&v).max(0.0) / system.surface_mass.quadratic_form(&v);
        items.push((lambda, v, tau));
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ModeSet {
        eigenvalues: items.iter().map(|x| x.0).collect(),
        residuals: items.iter().map(|x| x.2).collect(),
        eigenvectors: items.into_iter().map(|x| x.1).collect(),
        eta: system.eta,
        eps: system.eps,
    })
}

#[cfg(test)]
mod tests;
