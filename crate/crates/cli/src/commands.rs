//! Subcommands. `run` computes file contents without touching the disk;
//! `execute` also writes them.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use steklov_core::bands::{band_containment, INFLATION_SHARE};
use steklov_core::{box_sloshing_eigenvalues, capacity_integral, fit_slope_data, verify_bounds, ApertureShape, BoundsReport};

use crate::config::{Format, JobConfig};
use crate::output::{fmt_num, provenance_line, write_all, Csv};
use crate::study::{capacity_of, limit_study, scale_studies, LimitStudy, ScaleStudy};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Limit,
    Bands,
    Predict,
    Capacity,
    Verify,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<Csv>,
    pub stdout: String,
    /// False only when a verification check failed.
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: String,
    pub tolerance: String,
}

fn check(name: &str, ok: bool, measured: String, tolerance: String) -> Check {
    Check { name: name.into(), status: Status::of(ok), measured, tolerance }
}

fn skip(name: &str, why: &str) -> Check {
    Check { name: name.into(), status: Status::Skip, measured: why.into(), tolerance: String::new() }
}

pub fn run(cmd: Command, cfg: &JobConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let prov = provenance_line(&cfg.hash());
    match cmd {
        Command::Limit => {
            let lim = limit_study(cfg)?;
            Ok(RunOutput { files: vec![limit_csv(&lim, &prov)], stdout: String::new(), success: true })
        }
        Command::Bands => {
            let scales = scale_studies(cfg)?;
            Ok(RunOutput { files: band_files(cfg, &scales, &prov), stdout: String::new(), success: true })
        }
        Command::Predict => {
            let lim = limit_study(cfg)?;
            let (csv, notes) = predict_csv(cfg, &lim, &prov);
            Ok(RunOutput { files: vec![csv], stdout: notes, success: true })
        }
        Command::Capacity => {
            let geom = cfg.cell_geometry()?;
            let r = capacity_of(cfg, geom.aperture())?;
            let err = if r.estimated_error.is_nan() { "n/a".to_string() } else { fmt_num(r.estimated_error) };
            let stdout = format!(
                "shape={} method={} value={} estimated_error={}{}\n",
                geom.aperture().describe(),
                r.method.name(),
                fmt_num(r.value),
                err,
                r.mesh_size.map_or(String::new(), |n| format!(" triangles={n}"))
            );
            Ok(RunOutput { files: Vec::new(), stdout, success: true })
        }
        Command::Verify => verify(cfg, &prov),
    }
}

pub fn execute(cmd: Command, cfg: &JobConfig) -> Result<(RunOutput, Vec<PathBuf>), CliError> {
    let out = run(cmd, cfg)?;
    let paths = if out.files.is_empty() { Vec::new() } else { write_all(&cfg.output.dir, &out.files)? };
    Ok((out, paths))
}

fn limit_csv(lim: &LimitStudy, prov: &str) -> Csv {
    let mut csv = Csv::new("limit.csv", "k,lambda0,u_P0,u_P1,multiplicity", prov);
    for (k, m) in lim.model.modes.iter().enumerate() {
        csv.row(&[
            (k + 1).to_string(),
            fmt_num(m.lambda0),
            fmt_num(m.probes.u0.re),
            fmt_num(m.probes.u1.re),
            m.multiplicity.to_string(),
        ]);
    }
    csv
}

fn band_files(cfg: &JobConfig, scales: &[ScaleStudy], prov: &str) -> Vec<Csv> {
    let mut bands = Csv::new("bands.csv", "epsilon,eta,k,lambda,residual", prov);
    let mut gaps = Csv::new("gaps.csv", "epsilon,gap_lo,gap_hi", prov);
    let k_max = cfg.sweep.modes;
    let header = std::iter::once("epsilon,eta".to_string())
        .chain((1..=k_max).map(|k| format!("lambda_{k}")))
        .collect::<Vec<_>>()
        .join(",");
    let mut plot = Csv::new("bands_plot.csv", &header, prov);
    for s in scales {
        for (i, &eta) in s.bands.eta_grid.iter().enumerate() {
            for k in 0..s.bands.num_modes() {
                bands.row(&[
                    fmt_num(s.eps),
                    fmt_num(eta),
                    (k + 1).to_string(),
                    fmt_num(s.bands.values[i][k]),
                    fmt_num(s.bands.residuals[i][k]),
                ]);
            }
            let mut row = vec![fmt_num(s.eps), fmt_num(eta)];
            row.extend(s.bands.values[i].iter().map(|&v| fmt_num(v)));
            plot.row(&row);
        }
        for &(lo, hi) in &s.gaps.gaps {
            gaps.row(&[fmt_num(s.eps), fmt_num(lo), fmt_num(hi)]);
        }
    }
    let mut files = Vec::new();
    if cfg.output.formats.contains(&Format::Csv) {
        files.push(bands);
        files.push(gaps);
    }
    if cfg.output.formats.contains(&Format::Plot) {
        files.push(plot);
    }
    files
}

fn predict_csv(cfg: &JobConfig, lim: &LimitStudy, prov: &str) -> (Csv, String) {
    let mut csv = Csv::new("predict.csv", "k,lambda0,A,B,eps,pred_lo,pred_hi", prov);
    let mut notes = String::new();
    let scales: Vec<f64> = std::iter::once(0.0).chain(cfg.eps_list()).collect();
    let edges = lim.model.band_edges();
    for (k, m) in lim.model.modes.iter().enumerate() {
        let (a, b) = edges[k];
        for &eps in &scales {
            csv.row(&[
                (k + 1).to_string(),
                fmt_num(m.lambda0),
                fmt_num(a),
                fmt_num(b),
                fmt_num(eps),
                fmt_num(m.lambda0 + a * eps),
                fmt_num(m.lambda0 + b * eps),
            ]);
        }
        if (b - a).abs() <= 1e-12 * b.abs().max(1.0) {
            let _ = writeln!(notes, "k={}: degenerate at first order (A = B), band width unresolved", k + 1);
        }
    }
    (csv, notes)
}

fn verify(cfg: &JobConfig, prov: &str) -> Result<RunOutput, CliError> {
    let tol = &cfg.verify;
    let geom = cfg.cell_geometry()?;
    let lim = limit_study(cfg)?;
    let scales = scale_studies(cfg)?;
    let grid = cfg.eta_grid();
    let kk = cfg.sweep.modes;
    let l0 = &lim.modes.eigenvalues;
    let mut checks = Vec::new();

    // limit problem against separation of variables
    let oracle = box_sloshing_eigenvalues(geom.ly(), geom.depth(), kk.max(3));
    if kk >= 2 {
        let rel = (l0[1] - oracle[1]).abs() / oracle[1];
        checks.push(check("limit_oracle", rel <= tol.oracle_tol, fmt_num(rel), fmt_num(tol.oracle_tol)));
    } else {
        checks.push(skip("limit_oracle", "needs 2 modes"));
    }
    if kk >= 3 {
        let expect = oracle.iter().filter(|&&o| (o - oracle[1]).abs() <= 1e-12 * oracle[1]).count();
        let got = lim.model.modes[1].multiplicity;
        checks.push(check("limit_cluster", got == expect, format!("{got}"), format!("{expect}")));
    } else {
        checks.push(skip("limit_cluster", "needs 3 modes"));
    }

    // capacity
    let level = cfg.discretization.capacity_refinement;
    let shape = geom.aperture();
    let integral = capacity_integral(shape, level).map_err(|e| CliError::Compute(e.to_string()))?;
    if let ApertureShape::Disk { radius } = shape {
        let exact = 2.0 * radius / PI;
        let rel = (integral.value - exact).abs() / exact;
        checks.push(check("capacity_integral", rel <= tol.capacity_tol, fmt_num(rel), fmt_num(tol.capacity_tol)));
    } else {
        checks.push(skip("capacity_integral", "no closed form for this shape"));
    }
    let doubled = capacity_integral(&shape.scaled(2.0), level).map_err(|e| CliError::Compute(e.to_string()))?;
    let scale_err = (doubled.value / (2.0 * integral.value) - 1.0).abs();
    checks.push(check("capacity_scaling", scale_err <= tol.scaling_tol, fmt_num(scale_err), fmt_num(tol.scaling_tol)));

    // two-sided bounds against the limit problem on the same mesh
    let reports: Vec<BoundsReport> = scales.iter().map(|s| verify_bounds(&s.bands, &s.limit)).collect();
    let min_slack = reports.iter().flat_map(|r| r.lower_slack.iter().copied()).fold(f64::INFINITY, f64::min);
    checks.push(check("lower_bound", min_slack >= -tol.lower_slack, fmt_num(min_slack), fmt_num(-tol.lower_slack)));
    if scales.len() >= 2 {
        // first-order flat bands have C(eps) -> 0, so only boundedness is meaningful there
        let edges = lim.model.band_edges();
        let mut worst = 0.0f64;
        let mut stable = true;
        for k in 0..kk {
            let flat = edges[k].1 <= FLAT_SLOPE;
            let (ok, dev) = upper_constant_stability(&reports, k, tol.upper_growth, flat);
            stable &= ok;
            worst = worst.max(dev);
        }
        checks.push(check("upper_bound_stability", stable, fmt_num(worst), fmt_num(tol.upper_growth - 1.0)));
    } else {
        checks.push(skip("upper_bound_stability", "needs 2 scales"));
    }

    // kernel and symmetry
    if let Some(i0) = grid.iter().position(|&e| e == 0.0) {
        let worst = scales.iter().map(|s| s.bands.values[i0][0].abs()).fold(0.0, f64::max);
        checks.push(check("kernel_zero", worst <= tol.kernel_tol, fmt_num(worst), fmt_num(tol.kernel_tol)));
    } else {
        checks.push(skip("kernel_zero", "grid lacks eta = 0"));
    }
    let positive = scales
        .iter()
        .flat_map(|s| s.bands.eta_grid.iter().zip(&s.bands.values).filter(|(e, _)| **e != 0.0).map(|(_, c)| c[0]))
        .fold(f64::INFINITY, f64::min);
    if positive.is_finite() {
        checks.push(check("kernel_positive", positive > 0.0, fmt_num(positive), "> 0".into()));
    } else {
        checks.push(skip("kernel_positive", "grid has only eta = 0"));
    }
    let sym = scales.iter().map(|s| s.bands.symmetry_defect()).fold(0.0, f64::max);
    checks.push(check("band_symmetry", sym <= tol.symmetry_tol, fmt_num(sym), fmt_num(tol.symmetry_tol)));

    // first-order slopes of the lowest band
    let mut slopes = Csv::new("slopes.csv", "k,eta,slope,target,relative_deviation,remainder_exponent", prov);
    let eps: Vec<f64> = scales.iter().map(|s| s.eps).collect();
    let spread = if kk >= 2 { l0[1] - l0[0] } else { f64::NAN };
    for (name, eta) in [("slope_pi", PI), ("slope_zero", 0.0)] {
        let Some(i) = grid.iter().position(|&e| e == eta) else {
            checks.push(skip(name, "phase not in grid"));
            continue;
        };
        let deltas: Vec<f64> = scales.iter().map(|s| s.bands.values[i][0] - s.limit.eigenvalues[0]).collect();
        let target = lim.model.corrections(eta)[0];
        match fit_slope_data(0, eta, &eps, &deltas, target) {
            Ok(fit) => {
                let flat = fit.target.abs() <= 1e-12;
                slopes.row(&[
                    "1".into(),
                    fmt_num(eta),
                    fmt_num(fit.slope),
                    fmt_num(fit.target),
                    // relative measures are undefined for a flat target
                    if flat { "n/a".into() } else { fmt_num(fit.relative_deviation) },
                    if flat { "n/a".into() } else { fmt_num(fit.remainder_exponent) },
                ]);
                if eta == PI {
                    checks.push(check(name, fit.relative_deviation <= tol.slope_tol, fmt_num(fit.relative_deviation), fmt_num(tol.slope_tol)));
                    checks.push(check(
                        "remainder_order",
                        fit.remainder_exponent >= tol.remainder_exponent,
                        fmt_num(fit.remainder_exponent),
                        fmt_num(tol.remainder_exponent),
                    ));
                } else if spread.is_finite() {
                    let bound = tol.flat_slope_fraction * spread;
                    checks.push(check(name, fit.slope.abs() < bound, fmt_num(fit.slope.abs()), fmt_num(bound)));
                } else {
                    checks.push(skip(name, "needs 2 modes"));
                }
            }
            Err(e) => {
                checks.push(skip(name, &e.to_string()));
                if eta == PI {
                    checks.push(skip("remainder_order", &e.to_string()));
                }
            }
        }
    }

    // containment of simple bands in the inflated prediction
    let mut contain = Csv::new("containment.csv", "k,A,B,constant,holds,unresolved", prov);
    let edges = lim.model.band_edges();
    for k in 0..kk.min(3) {
        let name = format!("containment_k{}", k + 1);
        let m = &lim.model.modes[k];
        if m.multiplicity > 1 {
            checks.push(skip(&name, "multiple eigenvalue"));
            continue;
        }
        let (a, b) = edges[k];
        let data: Vec<(f64, f64, (f64, f64))> =
            scales.iter().map(|s| (s.eps, s.limit.eigenvalues[k], s.gaps.bands[k])).collect();
        let c = band_containment(k, a, b, &data);
        contain.row(&[
            (k + 1).to_string(),
            fmt_num(a),
            fmt_num(b),
            fmt_num(c.constant),
            c.holds.to_string(),
            c.unresolved.to_string(),
        ]);
        if c.unresolved {
            checks.push(skip(&name, "unresolved at first order"));
        } else {
            checks.push(check(&name, c.holds, fmt_num(c.constant), format!("inflation <= {} of width", INFLATION_SHARE)));
        }
    }

    // gaps
    if spread.is_finite() {
        let s = &scales[0];
        let width = s.gaps.gap_above(0).map_or(0.0, |g| g.1 - g.0);
        let need = tol.gap_fraction * spread;
        checks.push(check("gap_smallest_eps", width >= need, fmt_num(width), fmt_num(need)));
        let lambda_max = l0[kk - 1];
        let counts: Vec<usize> = scales.iter().map(|s| s.gaps.gaps_below(lambda_max)).collect();
        let mono = counts.windows(2).all(|w| w[1] <= w[0]);
        checks.push(check(
            "gap_count_monotone",
            mono,
            counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "),
            "nonincreasing".into(),
        ));
    } else {
        checks.push(skip("gap_smallest_eps", "needs 2 modes"));
        checks.push(skip("gap_count_monotone", "needs 2 modes"));
    }

    let mut bounds = Csv::new("bounds.csv", "epsilon,k,lower_slack,upper_constant", prov);
    for r in &reports {
        for k in 0..r.lower_slack.len() {
            bounds.row(&[fmt_num(r.eps), (k + 1).to_string(), fmt_num(r.lower_slack[k]), fmt_num(r.upper_constant[k])]);
        }
    }
    let mut report = Csv::new("verify.csv", "check,status,measured,tolerance", prov);
    let mut stdout = String::new();
    for c in &checks {
        report.row(&[c.name.clone(), c.status.name().into(), c.measured.clone(), c.tolerance.clone()]);
        let _ = writeln!(stdout, "{:<4} {:<24} measured {} (tolerance {})", c.status.name(), c.name, c.measured, c.tolerance);
    }
    let success = checks.iter().all(|c| c.status != Status::Fail);
    let mut files = vec![limit_csv(&lim, prov)];
    files.extend(band_files(cfg, &scales, prov));
    files.push(predict_csv(cfg, &lim, prov).0);
    files.extend([slopes, bounds, contain, report]);
    Ok(RunOutput { files, stdout, success })
}

/// Slopes `B_k` at or below this count as flat at first order.
const FLAT_SLOPE: f64 = 1e-8;
/// Absolute allowance for constants at the level of solver noise.
const NOISE_FLOOR: f64 = 1e-6;

/// Relative deviation of `C_k(eps)` from its value at the largest scale.
/// Resolved bands must stay within `growth - 1` on both sides; flat bands
/// only need to stay below `growth` times the reference.
fn upper_constant_stability(reports: &[BoundsReport], k: usize, growth: f64, flat: bool) -> (bool, f64) {
    let Some(largest) = reports.iter().max_by(|a, b| a.eps.total_cmp(&b.eps)) else {
        return (false, f64::INFINITY);
    };
    let reference = largest.upper_constant[k];
    let mut ok = true;
    let mut dev = 0.0f64;
    for r in reports {
        let c = r.upper_constant[k];
        if !c.is_finite() {
            return (false, f64::INFINITY);
        }
        if flat {
            ok &= c <= growth * reference + NOISE_FLOOR;
        } else {
            let d = (c / reference - 1.0).abs();
            ok &= d <= growth - 1.0;
            dev = dev.max(d);
        }
    }
    (ok, dev)
}
