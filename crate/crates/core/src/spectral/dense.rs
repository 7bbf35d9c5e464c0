//! Dense reference eigensolver for small systems.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use super::{SpectralError, SteklovOperator};

fn dense(a: &crate::assembly::SparseHermitian) -> Mat<c64> {
    let mut m = Mat::<c64>::zeros(a.dim(), a.dim());
    for (i, j, v) in a.entries() {
        m[(i, j)] = v;
    }
    m
}

/// Cholesky factor `L` of `G` and the congruent matrix `C = L^{-1} M L^{-H}`.
fn congruence(op: &SteklovOperator<'_>) -> Result<(Mat<c64>, Mat<c64>), SpectralError> {
    let g = dense(op.g());
    let m = dense(&op.system().surface_mass);
    let llt = g
        .llt(Side::Lower)
        .map_err(|e| SpectralError::Factorization(format!("{e:?}")))?;
    let l = llt.L().to_owned();
    let mut x = m;
    l.solve_lower_triangular_in_place(x.as_mut());
    let mut c = x.adjoint().to_owned();
    l.solve_lower_triangular_in_place(c.as_mut());
    // symmetrize against rounding
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = (c[(i, j)] + c[(j, i)].conj()) * 0.5;
            c[(i, j)] = v;
            c[(j, i)] = v.conj();
        }
        c[(i, i)] = c64::new(c[(i, i)].re, 0.0);
    }
    Ok((l, c))
}

/// Eigenpairs of `C` in descending order; real systems use a real decomposition.
fn eig_desc(c: &Mat<c64>, real: bool) -> Result<(Vec<f64>, Mat<c64>), SpectralError> {
    let n = c.nrows();
    let err = |e| SpectralError::Factorization(format!("dense eigendecomposition: {e:?}"));
    let (vals, vecs) = if real {
        let cr = Mat::<f64>::from_fn(n, n, |i, j| c[(i, j)].re);
        let evd = cr.self_adjoint_eigen(Side::Lower).map_err(err)?;
        let s = evd.S().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let u = evd.U();
        (vals, Mat::<c64>::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0)))
    } else {
        let evd = c.self_adjoint_eigen(Side::Lower).map_err(err)?;
        let s = evd.S().column_vector();
        let vals: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        (vals, evd.U().to_owned())
    };
    let order: Vec<usize> = (0..n).rev().collect();
    let vals = order.iter().map(|&i| vals[i]).collect();
    let vecs = Mat::<c64>::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok((vals, vecs))
}

pub(super) fn largest(
    op: &SteklovOperator<'_>,
    count: usize,
) -> Result<(Vec<f64>, Vec<Vec<c64>>, Vec<f64>), SpectralError> {
    let (l, c) = congruence(op)?;
    let (vals, y) = eig_desc(&c, op.system().is_real())?;
    let n = c.nrows();
    let mut x = Mat::<c64>::from_fn(n, count, |i, j| y[(i, j)]);
    l.adjoint().solve_upper_triangular_in_place(x.as_mut());
    let mut mus = Vec::with_capacity(count);
    let mut vecs = Vec::with_capacity(count);
    let mut res = Vec::with_capacity(count);
    for j in 0..count {
        let v: Vec<c64> = (0..n).map(|i| x[(i, j)]).collect();
        let mu = vals[j];
        let loc = super::residual_localize(op, mu, &v)?;
        mus.push(mu);
        vecs.push(v);
        res.push(loc.tau);
    }
    Ok((mus, vecs, res))
}

pub(super) fn m_spectrum(op: &SteklovOperator<'_>) -> Result<Vec<f64>, SpectralError> {
    let (_, c) = congruence(op)?;
    let (vals, _) = eig_desc(&c, op.system().is_real())?;
    Ok(vals)
}
