use super::*;
use crate::assembly::{apply_quasi_periodic, assemble_stiffness, assemble_surface_mass, eta_grid};
use crate::geometry::CellGeometry;
use crate::mesh::{generate_cell_mesh, CellMesh};
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn forms(mesh: &CellMesh) -> (SparseHermitian, SparseHermitian) {
    (assemble_stiffness(mesh).unwrap(), assemble_surface_mass(mesh))
}

fn coarse_graded() -> CellMesh {
    // about 500 nodes: small enough for the dense reference
    generate_cell_mesh(&CellGeometry::default_box(), 0.6, 0.34, Some(0.5)).unwrap()
}

fn krylov_only() -> SolverOptions {
    SolverOptions { dense_threshold: 0, ..SolverOptions::default() }
}

#[test]
fn limit_problem_kernel_and_box_oracle() {
    let mesh = generate_cell_mesh(&CellGeometry::default_box(), 0.1, 0.125, None).unwrap();
    let (k, m) = forms(&mesh);
    let sys = QuasiPeriodicSystem::unconstrained(k, m);
    let modes = solve_steklov(&sys, 4, &SolverOptions::default()).unwrap();
    assert!(modes.eigenvalues[0].abs() < 1e-10);
    let v0 = &modes.eigenvectors[0];
    for x in v0 {
        assert!((x - v0[0]).norm() < 1e-8);
    }
    assert_relative_eq!(v0[0].re, 1.0, max_relative = 1e-9);
    let exact = box_sloshing_eigenvalues(1.0, 1.0, 4);
    for j in 1..4 {
        assert!((modes.eigenvalues[j] - exact[j]).abs() < 0.1 * exact[j], "{:?}", modes.eigenvalues);
    }
    // the background grid has the symmetry of the square, so the pair is an exact double
    assert_eq!(modes.clusters(DEFAULT_CLUSTER_TOL)[1], 1..3);
}

#[test]
fn iterative_matches_dense() {
    let mesh = coarse_graded();
    assert!(mesh.vertices.len() <= 600, "{}", mesh.vertices.len());
    let (k, m) = forms(&mesh);
    for eta in [0.0, 0.7, std::f64::consts::PI] {
        let sys = apply_quasi_periodic(&k, &m, &mesh, eta).unwrap();
        let dense = solve_steklov_dense(&sys, 6).unwrap();
        let iter = solve_steklov(&sys, 6, &krylov_only()).unwrap();
        for j in 0..6 {
            let (a, b) = (dense.eigenvalues[j], iter.eigenvalues[j]);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-3), "eta={eta} j={j}: {a} vs {b}");
        }
        // L2(gamma) Gram matrix
        for (i, u) in iter.eigenvectors.iter().enumerate() {
            let mu = sys.surface_mass.mul_vec(u);
            for (j, w) in iter.eigenvectors.iter().enumerate() {
                let g: c64 = w.iter().zip(&mu).map(|(a, b)| a.conj() * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).norm() < 1e-9, "gram ({i},{j}) = {g}");
            }
        }
        assert!(iter.residuals.iter().zip(&iter.eigenvalues).all(|(t, l)| *t <= 1e-9 * (1.0 + l)));
    }
}

#[test]
fn model_problem_bounds_and_symmetry() {
    let mesh = coarse_graded();
    let (k, m) = forms(&mesh);
    let limit = solve_steklov(&QuasiPeriodicSystem::unconstrained(k.clone(), m.clone()), 6, &krylov_only()).unwrap();
    let grid = eta_grid(8);
    let sweeps: Vec<ModeSet> = grid
        .iter()
        .map(|&eta| solve_steklov(&apply_quasi_periodic(&k, &m, &mesh, eta).unwrap(), 6, &krylov_only()).unwrap())
        .collect();
    assert!(sweeps[0].eigenvalues[0].abs() < 1e-10);
    for (i, s) in sweeps.iter().enumerate() {
        for j in 0..6 {
            assert!(s.eigenvalues[j] >= limit.eigenvalues[j] - 1e-9);
        }
        if i > 0 {
            assert!(s.eigenvalues[0] > 1e-6);
            let r = &sweeps[8 - i];
            for j in 0..6 {
                let (a, b) = (s.eigenvalues[j], r.eigenvalues[j]);
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "eta index {i}, mode {j}: {a} vs {b}");
            }
        }
    }
    // equality only for the constant mode at eta = 0
    for j in 1..6 {
        assert!(sweeps[0].eigenvalues[j] > limit.eigenvalues[j] + 1e-9 || j > 1);
    }
}

#[test]
fn rayleigh_quotient_properties() {
    let mesh = coarse_graded();
    let (k, m) = forms(&mesh);
    let limit = QuasiPeriodicSystem::unconstrained(k.clone(), m.clone());
    let ones = vec![c64::new(1.0, 0.0); limit.dim()];
    assert!(rayleigh_quotient(&limit, &ones).unwrap().abs() < 1e-12);
    let sys = apply_quasi_periodic(&k, &m, &mesh, 1.3).unwrap();
    let modes = solve_steklov(&sys, 4, &SolverOptions::default()).unwrap();
    for (l, v) in modes.eigenvalues.iter().zip(&modes.eigenvectors) {
        assert_relative_eq!(rayleigh_quotient(&sys, v).unwrap(), *l, max_relative = 1e-9);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let v: Vec<c64> = (0..sys.dim()).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        assert!(rayleigh_quotient(&sys, &v).unwrap() >= modes.eigenvalues[0] - 1e-9);
    }
    // a field supported away from the surface
    let surface = mesh.free_surface_nodes();
    let v: Vec<c64> = (0..limit.dim())
        .map(|i| if surface.binary_search(&i).is_ok() { c64::new(0.0, 0.0) } else { c64::new(1.0, 0.0) })
        .collect();
    assert_eq!(rayleigh_quotient(&limit, &v), Err(SpectralError::ZeroSurfaceNorm));
}

#[test]
fn localization_intervals() {
    let mesh = coarse_graded();
    let (k, m) = forms(&mesh);
    let sys = apply_quasi_periodic(&k, &m, &mesh, 2.0).unwrap();
    let op = SteklovOperator::new(&sys).unwrap();
    let spectrum = dense_m_spectrum(&sys).unwrap();
    let modes = solve_steklov_dense(&sys, 3).unwrap();
    let contains = |loc: &Localization| spectrum.iter().any(|&s| s >= loc.lo - 1e-12 && s <= loc.hi + 1e-12);
    for (l, v) in modes.eigenvalues.iter().zip(&modes.eigenvectors) {
        let mu = lambda_to_m(*l);
        let exact = residual_localize(&op, mu, v).unwrap();
        assert!(exact.tau <= 1e-9 && exact.informative && contains(&exact));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pert: Vec<c64> = v.iter().map(|x| x + c64::new(1e-3 * rng.random_range(-1.0..1.0), 0.0)).collect();
        let loc = residual_localize(&op, mu, &pert).unwrap();
        assert!(loc.informative && contains(&loc));
        let doubled = residual_localize(&op, 2.0 * mu, v).unwrap();
        assert_relative_eq!(doubled.tau, mu, max_relative = 1e-8);
        assert!(doubled.informative && contains(&doubled));
    }
}

#[test]
fn rejects_bad_counts() {
    let mesh = coarse_graded();
    let (k, m) = forms(&mesh);
    let sys = QuasiPeriodicSystem::unconstrained(k, m);
    assert!(matches!(solve_steklov(&sys, 0, &SolverOptions::default()), Err(SpectralError::InvalidCount { .. })));
    assert!(matches!(solve_steklov(&sys, 10_000, &SolverOptions::default()), Err(SpectralError::InvalidCount { .. })));
}

#[test]
fn cluster_grouping() {
    assert_eq!(clusters(&[0.0, 1.0, 1.0 + 1e-9, 2.0], 1e-6), vec![0..1, 1..3, 3..4]);
    assert_eq!(clusters(&[], 1e-6), Vec::<std::ops::Range<usize>>::new());
}

proptest! {
    #[test]
    fn m_lambda_roundtrip(l in 0.0f64..1000.0) {
        let back = m_to_lambda(lambda_to_m(l));
        prop_assert!((back - l).abs() <= 1e-14 * l.max(1.0) * 1000.0_f64.min(1.0 + l));
    }
}
