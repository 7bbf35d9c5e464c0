use super::*;
use crate::assembly::eta_grid;
use crate::spectral::solve_steklov_dense;
use approx::assert_relative_eq;
use proptest::prelude::*;

fn coarse() -> SweepParams {
    SweepParams { mesh: MeshParams::graded(0.34, 0.5), solver: SolverOptions::default() }
}

fn table(eps: f64, cols: Vec<Vec<f64>>) -> BandStructure {
    let n = cols.len();
    BandStructure {
        eps,
        eta_grid: (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect(),
        residuals: cols.iter().map(|c| vec![0.0; c.len()]).collect(),
        values: cols,
        provenance: String::new(),
    }
}

#[test]
fn kernel_at_zero_phase() {
    let g = CellGeometry::default_box();
    let bs = sweep_eta(&g, 0.2, &[0.0], 3, &coarse()).unwrap();
    assert!(bs.values[0][0].abs() < 1e-10);
    assert!(bs.residuals[0][0] <= 1e-9);
}

#[test]
fn first_band_rises_at_pi() {
    let g = CellGeometry::default_box();
    let ctx = SweepContext::new(&g, 0.2, &coarse()).unwrap();
    let bs = ctx.sweep(&[0.0, PI], 2, "").unwrap();
    assert!(bs.values[1][0] > bs.values[0][0] + 1e-3);
    let sys = apply_quasi_periodic(&ctx.stiffness, &ctx.surface_mass, &ctx.mesh, PI).unwrap();
    let dense = solve_steklov_dense(&sys, 2).unwrap();
    assert_relative_eq!(dense.eigenvalues[0], bs.values[1][0], max_relative = 1e-9);
}

#[test]
fn symmetric_grid_and_bounds() {
    let g = CellGeometry::default_box();
    let ctx = SweepContext::new(&g, 0.2, &coarse()).unwrap();
    let grid = eta_grid(8);
    let bs = ctx.sweep(&grid, 6, "coarse").unwrap();
    assert!(bs.symmetry_defect() <= 1e-8);
    for col in &bs.values {
        assert!(col.windows(2).all(|w| w[0] <= w[1]));
    }
    let limit = ctx.limit(6).unwrap();
    let rep = verify_bounds(&bs, &limit);
    assert!(rep.all_lower_ok(), "{:?}", rep.lower_slack);
    assert!(rep.upper_constant.iter().all(|c| c.is_finite() && *c >= 0.0));
    // equality with the limit problem at eta = 0 only for the constant mode
    assert!((bs.values[0][0] - limit.eigenvalues[0]).abs() < 1e-10);
    assert!(bs.values[0][1] - limit.eigenvalues[1] > -1e-9);
    // same parameters, same table
    assert_eq!(ctx.sweep(&grid, 6, "coarse").unwrap(), bs);
}

#[test]
fn grid_validation() {
    let g = CellGeometry::default_box();
    assert_eq!(sweep_eta(&g, 0.2, &[], 2, &coarse()).unwrap_err(), BandError::EmptyGrid);
    assert_eq!(sweep_eta(&g, 0.2, &[2.0 * PI], 2, &coarse()).unwrap_err(), BandError::EtaOutOfRange(2.0 * PI));
    assert_eq!(sweep_eta(&g, 0.2, &[0.0], 0, &coarse()).unwrap_err(), BandError::NoModes);
    assert!(matches!(sweep_eta(&g, 1.5, &[0.0], 1, &coarse()), Err(BandError::InvalidEps(_))));
}

#[test]
fn synthetic_gaps() {
    let r = extract_bands(&table(0.1, vec![vec![0.0, 3.0], vec![1.0, 4.0], vec![0.5, 3.5]]), 1e-9);
    assert_eq!(r.bands, vec![(0.0, 1.0), (3.0, 4.0)]);
    assert_eq!(r.gaps, vec![(1.0, 3.0)]);
    assert_eq!(r.gap_above(0), Some((1.0, 3.0)));
    assert_eq!(r.gaps_below(3.0), 1);
    let o = extract_bands(&table(0.1, vec![vec![0.0, 1.0], vec![2.0, 3.0]]), 1e-9);
    assert!(o.gaps.is_empty());
    assert_eq!(o.gap_above(0), None);
    let d = extract_bands(&table(0.1, vec![vec![0.0, 5.0], vec![1.0, 5.0 + 1e-12]]), 1e-9);
    assert_eq!(d.degenerate, vec![false, true]);
    assert_eq!(d.gaps, vec![(1.0, 5.0)]);
}

#[test]
fn manufactured_slope() {
    let eps = [0.05, 0.1, 0.15, 0.2];
    let d: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e + e.powf(1.5)).collect();
    let fit = fit_slope_data(0, PI, &eps, &d, 3.0).unwrap();
    assert_relative_eq!(fit.slope, 3.0, max_relative = 1e-10);
    assert_relative_eq!(fit.remainder_coefficient, 1.0, max_relative = 1e-9);
    assert_relative_eq!(fit.remainder_exponent, 1.5, max_relative = 1e-9);
    assert!(fit.remainder_consistent);
    // with a wrong target the remainder is first order and fails the check
    let wrong = fit_slope_data(0, PI, &eps, &d, 2.0).unwrap();
    assert!(!wrong.remainder_consistent);
    assert!(matches!(fit_slope_data(0, PI, &eps[..2], &d[..2], 3.0), Err(BandError::TooFewScales(2))));
    assert!(matches!(fit_slope_data(0, PI, &[0.1, 0.1, 0.2], &d[..3], 3.0), Err(BandError::TooFewScales(2))));
}

proptest! {
    #[test]
    fn refined_scales_recover_slope(base in 0.001f64..0.01, s in -2.0f64..5.0, c in -3.0f64..3.0) {
        let eps: Vec<f64> = (1..=4).map(|i| base * i as f64).collect();
        let d: Vec<f64> = eps.iter().map(|e| s * e + c * e.powf(1.5) + 0.3 * e * e).collect();
        let fit = fit_slope_data(0, 0.0, &eps, &d, s).unwrap();
        prop_assert!((fit.slope - s).abs() <= 0.05 * s.abs().max(1.0));
    }
}

#[test]
fn stability_and_containment_rules() {
    let rep = |eps: f64, c: f64| BoundsReport { eps, lower_slack: vec![0.0], lower_ok: vec![true], upper_constant: vec![c] };
    assert!(upper_bound_stable(&[rep(0.05, 2.0), rep(0.1, 1.9), rep(0.2, 1.8)], 0, 0.0));
    assert!(!upper_bound_stable(&[rep(0.05, 4.0), rep(0.2, 1.8)], 0, 0.0));
    assert!(upper_bound_stable(&[rep(0.05, 1e-9), rep(0.2, 0.0)], 0, 1e-6));

    let ok = band_containment(0, 0.0, 2.0, &[(0.05, 0.0, (0.0, 0.1004)), (0.2, 0.0, (0.0, 0.38))]);
    assert!(ok.holds && !ok.unresolved);
    assert_relative_eq!(ok.constant, 0.0004 / 0.05f64.powf(1.5), max_relative = 1e-9);
    // slope 3 against a prediction of 2: the needed inflation is first order
    let bad = band_containment(0, 0.0, 2.0, &[(0.05, 0.0, (0.0, 0.15)), (0.2, 0.0, (0.0, 0.6))]);
    assert!(!bad.holds);
    let flat = band_containment(3, 0.0, 0.0, &[(0.1, 4.0, (4.0, 4.0))]);
    assert!(flat.unresolved && !flat.holds);
}
