//! Periodicity cell, aperture shapes and probe points.
//!
//! The cell is the box `(0,1) x (0,Ly) x (-depth,0)`. The free surface is the
//! face `x3 = 0`; the two walls `x1 = 0` and `x1 = 1` each carry one copy of the
//! scaled aperture centred at the probe point `P' = (P2, P3)`.

use std::f64::consts::PI;

use thiserror::Error;

/// Number of boundary samples used for distance queries on curved shapes.
const ELLIPSE_SAMPLES: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-positive length: {0}")]
    NonPositiveLength(&'static str),
    #[error("invalid aperture shape: {0}")]
    InvalidShape(String),
    #[error("probe point ({p2}, {p3}) is not strictly inside the wall face")]
    ProbeOutsideWall { p2: f64, p3: f64 },
    #[error("aperture touches free surface: P3 = {0} must be negative")]
    FreeSurfaceContact(f64),
    #[error("aperture reaches the free surface at eps = 1: d_theta = {0} must be negative")]
    ApertureAboveFreeSurface(f64),
    #[error("doubled aperture 2*theta + P' overflows the wall face")]
    ApertureOverflow,
    #[error("aperture scale eps = {0} outside (0, 1]")]
    ScaleOutOfRange(f64),
}

/// Planar aperture shape `theta` in local `(x2, x3)` coordinates, centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum ApertureShape {
    Disk { radius: f64 },
    Ellipse { semi_x2: f64, semi_x3: f64 },
    /// Counter-clockwise simple polygon. The origin must lie in its kernel,
    /// i.e. strictly to the left of every edge.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ApertureShape {
    pub fn disk(radius: f64) -> Self {
        ApertureShape::Disk { radius }
    }

    /// Axis-aligned square of the given side, centred at the origin.
    pub fn square(side: f64) -> Self {
        let s = 0.5 * side;
        ApertureShape::Polygon {
            vertices: vec![[-s, -s], [s, -s], [s, s], [-s, s]],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            ApertureShape::Disk { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(GeometryError::NonPositiveLength("disk radius"));
                }
            }
            ApertureShape::Ellipse { semi_x2, semi_x3 } => {
                if !(*semi_x2 > 0.0 && *semi_x3 > 0.0) || !(semi_x2.is_finite() && semi_x3.is_finite()) {
                    return Err(GeometryError::NonPositiveLength("ellipse semi-axis"));
                }
            }
            ApertureShape::Polygon { vertices } => validate_polygon(vertices)?,
        }
        Ok(())
    }

    /// Distance from the origin to the boundary along the ray with the given angle.
    pub fn radial_extent(&self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        match self {
            ApertureShape::Disk { radius } => *radius,
            ApertureShape::Ellipse { semi_x2, semi_x3 } => {
                1.0 / ((c / semi_x2).powi(2) + (s / semi_x3).powi(2)).sqrt()
            }
            ApertureShape::Polygon { vertices } => {
                let n = vertices.len();
                let mut best = f64::INFINITY;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    // t*d = a + s*e
                    let det = c * (-e[1]) - s * (-e[0]);
                    if det.abs() < 1e-300 {
                        continue;
                    }
                    let t = (a[0] * (-e[1]) - a[1] * (-e[0])) / det;
                    let u = (c * a[1] - s * a[0]) / det;
                    if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                        best = best.min(t);
                    }
                }
                best
            }
        }
    }

    /// `|q| / R(angle(q))`: below 1 inside, 1 on the boundary, above 1 outside.
    pub fn radial_measure(&self, q: [f64; 2]) -> f64 {
        let r = q[0].hypot(q[1]);
        if r == 0.0 {
            return 0.0;
        }
        r / self.radial_extent(q[1].atan2(q[0]))
    }

    /// Closed-set membership with a small relative tolerance for boundary points.
    pub fn contains(&self, q: [f64; 2]) -> bool {
        self.radial_measure(q) <= 1.0 + 1e-9
    }

    pub fn area(&self) -> f64 {
        match self {
            ApertureShape::Disk { radius } => PI * radius * radius,
            ApertureShape::Ellipse { semi_x2, semi_x3 } => PI * semi_x2 * semi_x3,
            ApertureShape::Polygon { vertices } => signed_area(vertices),
        }
    }

    /// Half-open bounding box `[min, max]` of the shape.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            ApertureShape::Disk { radius } => ([-radius, -radius], [*radius, *radius]),
            ApertureShape::Ellipse { semi_x2, semi_x3 } => ([-semi_x2, -semi_x3], [*semi_x2, *semi_x3]),
            ApertureShape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Largest distance from the origin to a point of the shape.
    pub fn outer_radius(&self) -> f64 {
        match self {
            ApertureShape::Disk { radius } => *radius,
            ApertureShape::Ellipse { semi_x2, semi_x3 } => semi_x2.max(*semi_x3),
            ApertureShape::Polygon { vertices } => {
                vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
            }
        }
    }

    pub fn scaled(&self, s: f64) -> ApertureShape {
        match self {
            ApertureShape::Disk { radius } => ApertureShape::Disk { radius: radius * s },
            ApertureShape::Ellipse { semi_x2, semi_x3 } => ApertureShape::Ellipse {
                semi_x2: semi_x2 * s,
                semi_x3: semi_x3 * s,
            },
            ApertureShape::Polygon { vertices } => ApertureShape::Polygon {
                vertices: vertices.iter().map(|v| [v[0] * s, v[1] * s]).collect(),
            },
        }
    }

    /// Euclidean distance from `q` to the boundary curve.
    pub fn boundary_distance(&self, q: [f64; 2]) -> f64 {
        match self {
            ApertureShape::Disk { radius } => (q[0].hypot(q[1]) - radius).abs(),
            ApertureShape::Ellipse { .. } => {
                let pts = self.boundary_polyline(ELLIPSE_SAMPLES);
                polyline_distance(&pts, q)
            }
            ApertureShape::Polygon { vertices } => polyline_distance(vertices, q),
        }
    }

    /// Distance from `q` to the closed region (zero inside).
    pub fn distance(&self, q: [f64; 2]) -> f64 {
        if self.contains(q) {
            0.0
        } else {
            self.boundary_distance(q)
        }
    }

    /// Closed counter-clockwise boundary polyline. Polygons return their
    /// vertices; curved shapes are sampled at `n` equally spaced angles.
    pub fn boundary_polyline(&self, n: usize) -> Vec<[f64; 2]> {
        match self {
            ApertureShape::Polygon { vertices } => vertices.clone(),
            _ => (0..n)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let r = self.radial_extent(t);
                    [r * t.cos(), r * t.sin()]
                })
                .collect(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ApertureShape::Disk { radius } => format!("disk(r={radius})"),
            ApertureShape::Ellipse { semi_x2, semi_x3 } => format!("ellipse(a={semi_x2},b={semi_x3})"),
            ApertureShape::Polygon { vertices } => format!("polygon({} vertices)", vertices.len()),
        }
    }
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n)
        .map(|i| {
            let a = v[i];
            let b = v[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn validate_polygon(v: &[[f64; 2]]) -> Result<(), GeometryError> {
    let n = v.len();
    if n < 3 {
        return Err(GeometryError::InvalidShape("polygon needs at least 3 vertices".into()));
    }
    if v.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(GeometryError::InvalidShape("non-finite polygon vertex".into()));
    }
    if signed_area(v) <= 0.0 {
        return Err(GeometryError::InvalidShape("polygon must be positively oriented".into()));
    }
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(GeometryError::InvalidShape("polygon is not simple".into()));
            }
        }
    }
    for i in 0..n {
        if cross(v[i], v[(i + 1) % n], [0.0, 0.0]) <= 0.0 {
            return Err(GeometryError::InvalidShape(
                "origin must lie strictly inside the polygon kernel".into(),
            ));
        }
    }
    Ok(())
}

fn polyline_distance(pts: &[[f64; 2]], q: [f64; 2]) -> f64 {
    let n = pts.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len2 = e[0] * e[0] + e[1] * e[1];
        let t = if len2 > 0.0 {
            (((q[0] - a[0]) * e[0] + (q[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let d = (q[0] - a[0] - t * e[0]).hypot(q[1] - a[1] - t * e[1]);
        best = best.min(d);
    }
    best
}

/// One of the two aperture-carrying walls of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wall {
    /// The face `x1 = 0`.
    Near,
    /// The face `x1 = 1`.
    Far,
}

impl Wall {
    pub fn x1(self) -> f64 {
        match self {
            Wall::Near => 0.0,
            Wall::Far => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Wall::Near => 0,
            Wall::Far => 1,
        }
    }
}

/// Validated periodicity cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    ly: f64,
    depth: f64,
    probe: [f64; 2],
    aperture: ApertureShape,
}

impl CellGeometry {
    pub fn new(ly: f64, depth: f64, probe: [f64; 2], aperture: ApertureShape) -> Result<Self, GeometryError> {
        if !(ly > 0.0) || !ly.is_finite() {
            return Err(GeometryError::NonPositiveLength("Ly"));
        }
        if !(depth > 0.0) || !depth.is_finite() {
            return Err(GeometryError::NonPositiveLength("depth"));
        }
        aperture.validate()?;
        let [p2, p3] = probe;
        if p3 >= 0.0 {
            return Err(GeometryError::FreeSurfaceContact(p3));
        }
        if !(p2 > 0.0 && p2 < ly && p3 > -depth) {
            return Err(GeometryError::ProbeOutsideWall { p2, p3 });
        }
        let (lo, hi) = aperture.bounding_box();
        let d_theta = hi[1] + p3;
        if d_theta >= 0.0 {
            return Err(GeometryError::ApertureAboveFreeSurface(d_theta));
        }
        // closure of 2*theta + P' inside the closed wall face
        let inside = p2 + 2.0 * lo[0] >= 0.0
            && p2 + 2.0 * hi[0] <= ly
            && p3 + 2.0 * lo[1] >= -depth
            && p3 + 2.0 * hi[1] <= 0.0;
        if !inside {
            return Err(GeometryError::ApertureOverflow);
        }
        Ok(CellGeometry { ly, depth, probe, aperture })
    }

    /// Box (1,1,1), probe (0.5,-0.5), disk aperture of radius 0.25.
    pub fn default_box() -> Self {
        CellGeometry::new(1.0, 1.0, [0.5, -0.5], ApertureShape::disk(0.25)).expect("default geometry is valid")
    }

    pub fn lx(&self) -> f64 {
        1.0
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn extent(&self) -> [f64; 3] {
        [1.0, self.ly, self.depth]
    }

    pub fn probe(&self) -> [f64; 2] {
        self.probe
    }

    pub fn aperture(&self) -> &ApertureShape {
        &self.aperture
    }

    /// Area `|gamma|` of the free surface.
    pub fn free_surface_area(&self) -> f64 {
        self.ly
    }

    pub fn volume(&self) -> f64 {
        self.ly * self.depth
    }

    /// `d_theta = sup over theta of (x3 + P3)`.
    pub fn d_theta(&self) -> f64 {
        self.aperture.bounding_box().1[1] + self.probe[1]
    }

    /// Probe point `P^j` on the given wall.
    pub fn probe_point(&self, wall: Wall) -> [f64; 3] {
        [wall.x1(), self.probe[0], self.probe[1]]
    }
}

/// The scaled aperture `theta_j^eps` on one wall.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureTrace {
    pub wall: Wall,
    pub center: [f64; 2],
    pub scale: f64,
    pub shape: ApertureShape,
}

impl ApertureTrace {
    /// Reference-shape coordinates of an in-plane point: `(x' - P') / eps`.
    pub fn local(&self, x: [f64; 2]) -> [f64; 2] {
        [(x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.shape.contains(self.local(x))
    }

    pub fn area(&self) -> f64 {
        self.scale * self.scale * self.shape.area()
    }

    /// The scaled shape in physical units (still centred at the origin).
    pub fn physical_shape(&self) -> ApertureShape {
        self.shape.scaled(self.scale)
    }

    /// Planar distance from an in-plane point to the aperture (zero inside).
    pub fn planar_distance(&self, x: [f64; 2]) -> f64 {
        self.scale * self.shape.distance(self.local(x))
    }

    /// Planar distance from an in-plane point to the aperture rim.
    pub fn rim_distance(&self, x: [f64; 2]) -> f64 {
        self.scale * self.shape.boundary_distance(self.local(x))
    }

    /// 3-D distance from a point to the aperture set on its wall.
    pub fn distance3(&self, x: [f64; 3]) -> f64 {
        let dx = x[0] - self.wall.x1();
        dx.hypot(self.planar_distance([x[1], x[2]]))
    }

    /// 3-D distance from a point to the aperture rim curve.
    pub fn rim_distance3(&self, x: [f64; 3]) -> f64 {
        let dx = x[0] - self.wall.x1();
        dx.hypot(self.rim_distance([x[1], x[2]]))
    }
}

/// `theta_j^eps = {(j, x') : (x' - P') / eps in theta}`.
pub fn aperture_trace(geom: &CellGeometry, eps: f64, wall: Wall) -> Result<ApertureTrace, GeometryError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(GeometryError::ScaleOutOfRange(eps));
    }
    Ok(ApertureTrace {
        wall,
        center: geom.probe,
        scale: eps,
        shape: geom.aperture.clone(),
    })
}
