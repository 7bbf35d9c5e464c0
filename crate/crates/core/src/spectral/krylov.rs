//! Thick-restart block Krylov iteration for the largest eigenvalues of `B`,
//! orthogonalized in the `G` inner product.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{m_to_lambda, SolverOptions, SpectralError, SteklovOperator};

const GUARD: usize = 2;

fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [c64], a: c64, x: &[c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Linear combination `sum_j cols[j] * coef[j]`.
fn combine(cols: &[Vec<c64>], coef: &[c64], n: usize) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); n];
    for (c, &w) in cols.iter().zip(coef) {
        if w != c64::new(0.0, 0.0) {
            axpy(&mut out, w, c);
        }
    }
    out
}

struct Basis<'o, 'a> {
    op: &'o SteklovOperator<'a>,
    v: Vec<Vec<c64>>,
    bv: Vec<Vec<c64>>,
    /// `M v`, equal to `G B v`.
    mv: Vec<Vec<c64>>,
    /// Projected matrix `V^H M V`.
    t: Vec<Vec<c64>>,
}

impl<'o, 'a> Basis<'o, 'a> {
    fn len(&self) -> usize {
        self.v.len()
    }

    /// G-orthogonalizes the block against the basis (two passes), normalizes
    /// each surviving column and appends it together with `B w` and `M w`.
    fn extend(&mut self, block: Vec<Vec<c64>>) -> usize {
        let g = self.op.g();
        let mut accepted: Vec<Vec<c64>> = Vec::new();
        for mut w in block {
            let n0 = dot(&w, &g.mul_vec(&w)).re.max(0.0).sqrt();
            if !(n0 > 0.0) {
                continue;
            }
            for _ in 0..2 {
                let gw = g.mul_vec(&w);
                for q in self.v.iter().chain(accepted.iter()) {
                    let c = dot(q, &gw);
                    axpy(&mut w, -c, q);
                }
            }
            let nrm = dot(&w, &g.mul_vec(&w)).re.max(0.0).sqrt();
            if nrm <= 1e-10 * n0 {
                continue;
            }
            for x in w.iter_mut() {
                *x /= nrm;
            }
            accepted.push(w);
        }
        if accepted.is_empty() {
            return 0;
        }
        let n = self.op.dim();
        let m = &self.op.system().surface_mass;
        let mws: Vec<Vec<c64>> = accepted.iter().map(|w| m.mul_vec(w)).collect();
        let mut rhs = Mat::<c64>::from_fn(n, accepted.len(), |i, j| mws[j][i]);
        self.op.solve_block(&mut rhs);
        let added = accepted.len();
        for (j, (w, mw)) in accepted.into_iter().zip(mws).enumerate() {
            let k = self.v.len();
            let mut row: Vec<c64> = (0..k).map(|i| dot(&self.v[i], &mw)).collect();
            for (i, r) in self.t.iter_mut().enumerate() {
                r.push(row[i]);
            }
            for x in row.iter_mut() {
                *x = x.conj();
            }
            row.push(c64::new(dot(&w, &mw).re, 0.0));
            self.t.push(row);
            self.bv.push((0..n).map(|i| rhs[(i, j)]).collect());
            self.v.push(w);
            self.mv.push(mw);
        }
        added
    }

    /// Eigenpairs of the projected matrix, descending.
    fn ritz(&self, real: bool) -> Result<(Vec<f64>, Vec<Vec<c64>>), SpectralError> {
        let k = self.len();
        let err = |e| SpectralError::Factorization(format!("projected eigenproblem: {e:?}"));
        let (vals, vecs): (Vec<f64>, Vec<Vec<c64>>) = if real {
            let t = Mat::<f64>::from_fn(k, k, |i, j| self.t[i][j].re);
            let evd = t.self_adjoint_eigen(Side::Lower).map_err(err)?;
            let s = evd.S().column_vector();
            let u = evd.U();
            (
                (0..k).map(|i| s[i]).collect(),
                (0..k).map(|j| (0..k).map(|i| c64::new(u[(i, j)], 0.0)).collect()).collect(),
            )
        } else {
            let t = Mat::<c64>::from_fn(k, k, |i, j| self.t[i][j]);
            let evd = t.self_adjoint_eigen(Side::Lower).map_err(err)?;
            let s = evd.S().column_vector();
            let u = evd.U();
            (
                (0..k).map(|i| s[i].re).collect(),
                (0..k).map(|j| (0..k).map(|i| u[(i, j)]).collect()).collect(),
            )
        };
        Ok((vals.into_iter().rev().collect(), vecs.into_iter().rev().collect()))
    }

    /// Replaces the basis by the given Ritz combinations (thick restart).
    fn restart(&mut self, thetas: &[f64], ys: &[Vec<c64>]) {
        let n = self.op.dim();
        let v: Vec<Vec<c64>> = ys.iter().map(|y| combine(&self.v, y, n)).collect();
        let bv: Vec<Vec<c64>> = ys.iter().map(|y| combine(&self.bv, y, n)).collect();
        let mv: Vec<Vec<c64>> = ys.iter().map(|y| combine(&self.mv, y, n)).collect();
        let k = ys.len();
        self.t = (0..k)
            .map(|i| (0..k).map(|j| if i == j { c64::new(thetas[i], 0.0) } else { c64::new(0.0, 0.0) }).collect())
            .collect();
        self.v = v;
        self.bv = bv;
        self.mv = mv;
    }
}

pub(super) fn largest(
    op: &SteklovOperator<'_>,
    count: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<c64>>, Vec<f64>), SpectralError> {
    let n = op.dim();
    let real = op.system().is_real();
    let b = opts.block_size.max(1);
    let nwant = (count + GUARD).min(n);
    let max_basis = (nwant + 3 * b).max(2 * nwant).min(n);
    let keep = (nwant + b).min(max_basis.saturating_sub(b)).max(nwant);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Vec<c64>> = (0..b.max(nwant))
        .map(|_| (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), 0.0)).collect())
        .collect();
    let mut basis = Basis { op, v: Vec::new(), bv: Vec::new(), mv: Vec::new(), t: Vec::new() };
    basis.extend(start);

    let g = op.g();
    let mut worst = f64::INFINITY;
    for _iter in 0..opts.max_iter {
        let (thetas, ys) = basis.ritz(real)?;
        let k = basis.len();
        let m = nwant.min(k);
        let mut xs = Vec::with_capacity(m);
        let mut taus = Vec::with_capacity(m);
        let mut residuals = Vec::with_capacity(m);
        for j in 0..m {
            let x = combine(&basis.v, &ys[j], n);
            let mut r = combine(&basis.bv, &ys[j], n);
            axpy(&mut r, c64::new(-thetas[j], 0.0), &x);
            let tau = dot(&r, &g.mul_vec(&r)).re.max(0.0).sqrt();
            xs.push(x);
            taus.push(tau);
            residuals.push(r);
        }
        let converged = |j: usize| thetas[j] > 0.0 && taus[j] <= opts.tol * (1.0 + m_to_lambda(thetas[j]));
        worst = (0..count.min(m)).map(|j| taus[j]).fold(0.0, f64::max);
        if m >= count && (0..count).all(converged) {
            return Ok((thetas[..count].to_vec(), xs.into_iter().take(count).collect(), taus[..count].to_vec()));
        }
        let mut block: Vec<Vec<c64>> = Vec::new();
        for j in 0..m {
            if block.len() == b {
                break;
            }
            if !converged(j) {
                block.push(residuals[j].clone());
            }
        }
        if block.is_empty() {
            // all wanted pairs converged except possibly missing ones; widen with a random vector
            block.push((0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), 0.0)).collect());
        }
        if k + block.len() > max_basis {
            let kk = keep.min(k);
            basis.restart(&thetas[..kk], &ys[..kk]);
        }
        if basis.extend(block) == 0 {
            let fresh = (0..b).map(|_| (0..n).map(|_| c64::new(rng.random_range(-1.0..1.0), 0.0)).collect()).collect();
            if basis.len() + b > max_basis {
                let (thetas, ys) = basis.ritz(real)?;
                let kk = keep.min(basis.len()).min(max_basis - b);
                basis.restart(&thetas[..kk], &ys[..kk]);
            }
            basis.extend(fresh);
        }
    }
    Err(SpectralError::NotConverged { iterations: opts.max_iter, residual: worst })
}
