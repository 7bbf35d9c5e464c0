//! Harmonic capacity of a planar screen.
//!
//! Normalization: the exterior potential equal to 1 on the screen behaves as
//! `cap / |x|` at infinity, so a disk of radius `r` has capacity `2r / pi`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use thiserror::Error;

use crate::geometry::{ApertureShape, GeometryError};

pub const DEFAULT_REFINEMENT: u32 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapacityError {
    #[error(transparent)]
    Shape(#[from] GeometryError),
    #[error("refinement level {0} too large (max {MAX_REFINEMENT})")]
    Refinement(u32),
    #[error("singular collocation system on a {0}-triangle screen")]
    Singular(usize),
}

pub const MAX_REFINEMENT: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityMethod {
    Analytic,
    IntegralEquation,
}

impl CapacityMethod {
    pub fn name(self) -> &'static str {
        match self {
            CapacityMethod::Analytic => "analytic",
            CapacityMethod::IntegralEquation => "integral-equation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub value: f64,
    pub method: CapacityMethod,
    /// Screen triangle count for the integral method.
    pub mesh_size: Option<usize>,
    /// Relative error estimate (0 for closed forms).
    pub estimated_error: f64,
}

pub fn capacity_analytic_disk(radius: f64) -> Result<CapacityResult, CapacityError> {
    ApertureShape::disk(radius).validate()?;
    Ok(CapacityResult {
        value: 2.0 * radius / PI,
        method: CapacityMethod::Analytic,
        mesh_size: None,
        estimated_error: 0.0,
    })
}

/// Analytic value for disks, integral equation otherwise.
pub fn capacity(shape: &ApertureShape) -> Result<CapacityResult, CapacityError> {
    match shape {
        ApertureShape::Disk { radius } => capacity_analytic_disk(*radius),
        _ => capacity_integral(shape, DEFAULT_REFINEMENT),
    }
}

/// Triangulated screen: a polar grid between the centre and the boundary.
#[derive(Debug, Clone)]
pub struct ScreenMesh {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

impl ScreenMesh {
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| tri_area(self.tri(t))).sum()
    }

    fn tri(&self, t: &[usize; 3]) -> [[f64; 2]; 3] {
        [self.points[t[0]], self.points[t[1]], self.points[t[2]]]
    }
}

fn tri_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]))
}

/// Boundary samples, counter-clockwise. Polygon corners are always included.
fn boundary_samples(shape: &ApertureShape, n: usize) -> Vec<[f64; 2]> {
    match shape {
        ApertureShape::Polygon { vertices } => {
            let m = vertices.len();
            let per_edge = n.div_ceil(m).max(1);
            let mut out = Vec::with_capacity(m * per_edge);
            for i in 0..m {
                let a = vertices[i];
                let b = vertices[(i + 1) % m];
                for s in 0..per_edge {
                    let t = s as f64 / per_edge as f64;
                    out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                }
            }
            out
        }
        _ => shape.boundary_polyline(n),
    }
}

pub fn screen_mesh(shape: &ApertureShape, level: u32) -> Result<ScreenMesh, CapacityError> {
    shape.validate()?;
    if level > MAX_REFINEMENT {
        return Err(CapacityError::Refinement(level));
    }
    let boundary = boundary_samples(shape, 16 << level);
    let nb = boundary.len();
    let rings = 4usize << level;
    // rings crowd toward the rim, where the charge density is singular
    let frac = |i: usize| 1.0 - (1.0 - i as f64 / rings as f64).powf(1.5);
    let mut points = vec![[0.0, 0.0]];
    for i in 1..=rings {
        let t = frac(i);
        points.extend(boundary.iter().map(|b| [t * b[0], t * b[1]]));
    }
    let id = |ring: usize, k: usize| 1 + (ring - 1) * nb + k % nb;
    let mut triangles = Vec::with_capacity(nb * (2 * rings - 1));
    for k in 0..nb {
        triangles.push([0, id(1, k), id(1, k + 1)]);
    }
    for ring in 1..rings {
        for k in 0..nb {
            let (a, b, c, d) = (id(ring, k), id(ring, k + 1), id(ring + 1, k), id(ring + 1, k + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    Ok(ScreenMesh { points, triangles })
}

/// `int_T dA / |x - y|` for `x` in the plane of the triangle, exact.
///
/// In the plane `div((y - x) / |y - x|) = 1 / |y - x|`, so the integral is a
/// sum of edge fluxes `d_e * int_e ds / |y - x|`.
pub fn inverse_distance_integral(tri: [[f64; 2]; 3], x: [f64; 2]) -> f64 {
    let orient = tri_area(tri).signum();
    let mut total = 0.0;
    for e in 0..3 {
        let a = tri[e];
        let b = tri[(e + 1) % 3];
        let ex = [b[0] - a[0], b[1] - a[1]];
        let len = ex[0].hypot(ex[1]);
        if len == 0.0 {
            continue;
        }
        let t = [ex[0] / len, ex[1] / len];
        // outward normal of a counter-clockwise triangle
        let n = [t[1] * orient, -t[0] * orient];
        let d = (a[0] - x[0]) * n[0] + (a[1] - x[1]) * n[1];
        if d.abs() <= 1e-14 * len {
            continue;
        }
        let sa = (a[0] - x[0]) * t[0] + (a[1] - x[1]) * t[1];
        let sb = sa + len;
        total += d * ((sb / d.abs()).asinh() - (sa / d.abs()).asinh());
    }
    total
}

fn solve_screen(mesh: &ScreenMesh) -> Result<f64, CapacityError> {
    let n = mesh.triangles.len();
    let tris: Vec<[[f64; 2]; 3]> = mesh.triangles.iter().map(|t| mesh.tri(t)).collect();
    let cent: Vec<[f64; 2]> = tris
        .iter()
        .map(|p| [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0])
        .collect();
    let area: Vec<f64> = tris.iter().map(|p| tri_area(*p).abs()).collect();
    let diam: Vec<f64> = tris
        .iter()
        .map(|p| (0..3).map(|e| (p[e][0] - p[(e + 1) % 3][0]).hypot(p[e][1] - p[(e + 1) % 3][1])).fold(0.0, f64::max))
        .collect();
    let a = Mat::<f64>::from_fn(n, n, |i, j| {
        let r = (cent[i][0] - cent[j][0]).hypot(cent[i][1] - cent[j][1]);
        let v = if i == j || r < 4.0 * diam[j] {
            inverse_distance_integral(tris[j], cent[i])
        } else {
            area[j] / r
        };
        v / (4.0 * PI)
    });
    let rhs = Mat::<f64>::from_fn(n, 1, |_, _| 1.0);
    let sigma = a.partial_piv_lu().solve(&rhs);
    let q: f64 = (0..n).map(|j| sigma[(j, 0)] * area[j]).sum();
    if !q.is_finite() || q <= 0.0 {
        return Err(CapacityError::Singular(n));
    }
    // far field of the single layer: (int sigma) / (4 pi |x|)
    Ok(q / (4.0 * PI))
}

/// Collocation solve of the first-kind screen equation at the given level;
/// the error estimate compares against the next coarser level.
pub fn capacity_integral(shape: &ApertureShape, refinement: u32) -> Result<CapacityResult, CapacityError> {
    let fine = screen_mesh(shape, refinement)?;
    let value = solve_screen(&fine)?;
    let estimated_error = if refinement > 0 {
        let coarse = solve_screen(&screen_mesh(shape, refinement - 1)?)?;
        ((value - coarse) / value).abs()
    } else {
        f64::NAN
    };
    Ok(CapacityResult {
        value,
        method: CapacityMethod::IntegralEquation,
        mesh_size: Some(fine.triangles.len()),
        estimated_error,
    })
}
