//! Tetrahedral meshes of the periodicity cell.

mod dump;
mod refine;
mod validate;

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{aperture_trace, ApertureTrace, CellGeometry, GeometryError, Wall};

pub use dump::write_mesh;
pub use validate::{validate_mesh, MeshReport};

use refine::Refiner;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("aperture cannot be resolved: {0}")]
    ApertureUnresolvable(String),
    #[error("mesh exceeds {0} tetrahedra")]
    TooLarge(usize),
    #[error("degenerate element {tet}: volume {volume:e}")]
    Degenerate { tet: usize, volume: f64 },
}

/// Boundary facet classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FacetTag {
    FreeSurface,
    Wall,
    Aperture0,
    Aperture1,
}

impl FacetTag {
    pub fn name(self) -> &'static str {
        match self {
            FacetTag::FreeSurface => "free_surface",
            FacetTag::Wall => "wall",
            FacetTag::Aperture0 => "aperture0",
            FacetTag::Aperture1 => "aperture1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 3],
    pub tag: FacetTag,
}

/// Mesh generation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshParams {
    /// Global element size.
    pub h: f64,
    /// Aperture-local size as a fraction of `eps`; `None` keeps the structured grid.
    pub grading: Option<f64>,
    /// Linear growth rate of the size field away from the apertures.
    pub growth: f64,
    /// Snap wall nodes near the aperture rim onto the rim.
    pub snap: bool,
    pub max_tets: usize,
}

impl MeshParams {
    pub fn structured(h: f64) -> Self {
        MeshParams { h, grading: None, growth: 0.3, snap: false, max_tets: 5_000_000 }
    }

    pub fn graded(h: f64, grading: f64) -> Self {
        MeshParams { h, grading: Some(grading), growth: 0.3, snap: true, max_tets: 5_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct CellMesh {
    pub vertices: Vec<[f64; 3]>,
    pub tets: Vec<[usize; 4]>,
    pub boundary_facets: Vec<BoundaryFacet>,
    /// `(node on wall x1 = 0, node on wall x1 = 1)`, sorted by the first entry.
    pub aperture_pairing: Vec<(usize, usize)>,
    pub h_global: f64,
    pub h_aperture: f64,
    pub eps: f64,
    pub extent: [f64; 3],
}

/// Signed volume of a tetrahedron.
pub fn tet_volume(p: [[f64; 3]; 4]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    let c = sub(p[3], p[0]);
    dot(a, cross(b, c)) / 6.0
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub fn triangle_area(p: [[f64; 3]; 3]) -> f64 {
    0.5 * norm(cross(sub(p[1], p[0]), sub(p[2], p[0])))
}

impl CellMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn tet_points(&self, t: usize) -> [[f64; 3]; 4] {
        let n = self.tets[t];
        [self.vertices[n[0]], self.vertices[n[1]], self.vertices[n[2]], self.vertices[n[3]]]
    }

    pub fn facet_points(&self, f: &BoundaryFacet) -> [[f64; 3]; 3] {
        [self.vertices[f.nodes[0]], self.vertices[f.nodes[1]], self.vertices[f.nodes[2]]]
    }

    pub fn facets_with(&self, tag: FacetTag) -> impl Iterator<Item = &BoundaryFacet> {
        self.boundary_facets.iter().filter(move |f| f.tag == tag)
    }

    pub fn tag_area(&self, tag: FacetTag) -> f64 {
        self.facets_with(tag).map(|f| triangle_area(self.facet_points(f))).sum()
    }

    /// Nodes lying on the free surface, sorted.
    pub fn free_surface_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.vertices.len()];
        for f in self.facets_with(FacetTag::FreeSurface) {
            for &n in &f.nodes {
                on[n] = true;
            }
        }
        (0..on.len()).filter(|&i| on[i]).collect()
    }

    /// Nodes lying exactly on the given wall, sorted.
    pub fn wall_nodes(&self, wall: Wall) -> Vec<usize> {
        let x = wall.x1();
        (0..self.vertices.len()).filter(|&i| self.vertices[i][0] == x).collect()
    }

    /// Boundary facets lying in the given wall plane (aperture or not).
    pub fn wall_facets(&self, wall: Wall) -> Vec<&BoundaryFacet> {
        let x = wall.x1();
        self.boundary_facets
            .iter()
            .filter(|f| f.nodes.iter().all(|&n| self.vertices[n][0] == x))
            .collect()
    }

    /// Local wall mesh size at `p`: `sqrt(2 A)` with `A` the mean area of the wall
    /// facets around the nearest node (the leg length on a structured grid).
    pub fn local_wall_size(&self, wall: Wall, p: [f64; 2]) -> f64 {
        let facets = self.wall_facets(wall);
        let mut nearest = None;
        let mut best = f64::INFINITY;
        for f in &facets {
            for &n in &f.nodes {
                let v = self.vertices[n];
                let d = (v[1] - p[0]).hypot(v[2] - p[1]);
                if d < best || (d == best && Some(n) < nearest) {
                    best = d;
                    nearest = Some(n);
                }
            }
        }
        let Some(node) = nearest else { return 0.0 };
        let (mut area, mut count) = (0.0, 0usize);
        for f in facets.iter().filter(|f| f.nodes.contains(&node)) {
            area += triangle_area(self.facet_points(f));
            count += 1;
        }
        (2.0 * area / count as f64).sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| tet_volume(self.tet_points(t))).sum()
    }
}

/// Mesh with aperture refinement `h_aperture = grading * eps` and default
/// growth and snapping. `grading = None` gives the structured background.
pub fn generate_cell_mesh(geom: &CellGeometry, eps: f64, h: f64, grading: Option<f64>) -> Result<CellMesh, MeshError> {
    let params = match grading {
        Some(g) => MeshParams::graded(h, g),
        None => MeshParams::structured(h),
    };
    generate_cell_mesh_with(geom, eps, &params)
}

pub fn generate_cell_mesh_with(geom: &CellGeometry, eps: f64, params: &MeshParams) -> Result<CellMesh, MeshError> {
    if !(params.h > 0.0) || !params.h.is_finite() {
        return Err(MeshError::InvalidParameter(format!("h = {}", params.h)));
    }
    if let Some(g) = params.grading {
        if !(g > 0.0 && g <= 1.0) {
            return Err(MeshError::InvalidParameter(format!("grading = {g}")));
        }
    }
    if !(params.growth > 0.0) {
        return Err(MeshError::InvalidParameter(format!("growth = {}", params.growth)));
    }
    let traces = [aperture_trace(geom, eps, Wall::Near)?, aperture_trace(geom, eps, Wall::Far)?];
    let extent = geom.extent();
    let cells = [
        ((extent[0] / params.h).ceil() as i64).max(2),
        ((extent[1] / params.h).ceil() as i64).max(1),
        ((extent[2] / params.h).ceil() as i64).max(1),
    ];
    let h_global = (0..3).map(|a| extent[a] / cells[a] as f64).fold(0.0, f64::max);
    let tr = traces.clone();
    let distance = Box::new(move |p: [f64; 3]| tr[0].distance3(p).min(tr[1].distance3(p)));
    let mut r = Refiner::structured(cells, extent, distance);

    let h_aperture = match params.grading {
        Some(g) => {
            let h_ap = g * eps;
            if h_ap < 1e-9 * extent.iter().copied().fold(0.0, f64::max) {
                return Err(MeshError::ApertureUnresolvable(format!(
                    "aperture size {h_ap:e} below floor"
                )));
            }
            let diag = (h_global * h_global * 3.0).sqrt();
            let kappa = params.growth;
            r.refine_to(&|d| diag.min(h_ap + kappa * d), params.max_tets)?;
            h_ap
        }
        None => h_global,
    };

    let mut vertices: Vec<[f64; 3]> = r.verts.iter().map(|&p| r.lat.physical(p)).collect();
    let tets: Vec<[usize; 4]> = r.tets.iter().map(|t| t.map(|v| v as usize)).collect();

    // boundary faces by counting
    let mut faces: Vec<([usize; 3], [usize; 3])> = Vec::with_capacity(tets.len() * 4);
    for t in &tets {
        for skip in 0..4 {
            let mut f = [0usize; 3];
            let mut n = 0;
            for (i, &v) in t.iter().enumerate() {
                if i != skip {
                    f[n] = v;
                    n += 1;
                }
            }
            let mut s = f;
            s.sort_unstable();
            faces.push((s, f));
        }
    }
    faces.sort_unstable();
    let mut boundary: Vec<[usize; 3]> = Vec::new();
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j].0 == faces[i].0 {
            j += 1;
        }
        if j - i == 1 {
            boundary.push(faces[i].1);
        }
        i = j;
    }

    let lat_of = |v: usize| r.verts[v];
    let imax = r.lat.imax;
    let on_plane = |f: &[usize; 3], axis: usize, value: i64| f.iter().all(|&v| lat_of(v)[axis] == value);

    if params.grading.is_some() && params.snap {
        let wall0: Vec<[usize; 3]> = boundary.iter().copied().filter(|f| on_plane(f, 0, 0)).collect();
        snap_to_rim(&mut vertices, &tets, &wall0, &r, &traces[0], h_aperture);
    }

    let member = |v: usize, vertices: &[[f64; 3]], trace: &ApertureTrace| {
        let p = vertices[v];
        trace.contains([p[1], p[2]])
    };
    let mut boundary_facets: Vec<BoundaryFacet> = boundary
        .iter()
        .map(|f| {
            let tag = if on_plane(f, 2, imax[2]) {
                FacetTag::FreeSurface
            } else if on_plane(f, 0, 0) && f.iter().all(|&v| member(v, &vertices, &traces[0])) {
                FacetTag::Aperture0
            } else if on_plane(f, 0, imax[0]) && f.iter().all(|&v| member(v, &vertices, &traces[1])) {
                FacetTag::Aperture1
            } else {
                FacetTag::Wall
            };
            BoundaryFacet { nodes: *f, tag }
        })
        .collect();
    boundary_facets.sort_by_key(|f| {
        let mut s = f.nodes;
        s.sort_unstable();
        s
    });

    let mut aperture_pairing = Vec::new();
    for v in 0..vertices.len() {
        let p = r.verts[v];
        if p[0] == 0 && member(v, &vertices, &traces[0]) {
            let partner = r.vertex_id([imax[0], p[1], p[2]]).expect("wall meshes are translates") as usize;
            aperture_pairing.push((v, partner));
        }
    }

    let mesh = CellMesh {
        vertices,
        tets,
        boundary_facets,
        aperture_pairing,
        h_global,
        h_aperture,
        eps,
        extent,
    };
    for t in 0..mesh.tets.len() {
        let vol = tet_volume(mesh.tet_points(t));
        if !(vol > 0.0) {
            return Err(MeshError::Degenerate { tet: t, volume: vol });
        }
    }
    Ok(mesh)
}

/// Move wall nodes adjacent to edges crossing the aperture rim radially onto
/// the rim, mirroring every move on the opposite wall. A move is reverted if
/// it would shrink any incident tetrahedron below a fifth of its volume or
/// stretch its diameter past both the old diameter and `h_aperture`.
fn snap_to_rim(
    vertices: &mut [[f64; 3]],
    tets: &[[usize; 4]],
    wall0: &[[usize; 3]],
    r: &Refiner<'_>,
    trace: &ApertureTrace,
    h_aperture: f64,
) {
    let imax = r.lat.imax;
    let mut vert_tets: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut wall_nodes: Vec<usize> = wall0.iter().flatten().copied().collect();
    wall_nodes.sort_unstable();
    wall_nodes.dedup();
    let mut partner: HashMap<usize, usize> = HashMap::new();
    for &v in &wall_nodes {
        let p = r.verts[v];
        let m = r.vertex_id([imax[0], p[1], p[2]]).expect("wall meshes are translates") as usize;
        partner.insert(v, m);
        vert_tets.insert(v, Vec::new());
        vert_tets.insert(m, Vec::new());
    }
    for (t, tet) in tets.iter().enumerate() {
        for &v in tet {
            if let Some(list) = vert_tets.get_mut(&v) {
                list.push(t);
            }
        }
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for f in wall0 {
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            let (x, y) = (f[a].min(f[b]), f[a].max(f[b]));
            edges.push((x, y));
        }
    }
    edges.sort_unstable();
    edges.dedup();

    let rho = |vertices: &[[f64; 3]], v: usize| trace.shape.radial_measure(trace.local([vertices[v][1], vertices[v][2]]));
    let on_face_border = |v: usize| {
        let p = r.verts[v];
        p[1] == 0 || p[1] == imax[1] || p[2] == 0 || p[2] == imax[2]
    };
    let mut moved = vec![false; vertices.len()];
    let tol = 1e-9;
    for (a, b) in edges {
        let (ra, rb) = (rho(vertices, a), rho(vertices, b));
        let crossing = (ra < 1.0 - tol && rb > 1.0 + tol) || (rb < 1.0 - tol && ra > 1.0 + tol);
        if !crossing {
            continue;
        }
        let (v, rv) = if (ra - 1.0).abs() <= (rb - 1.0).abs() { (a, ra) } else { (b, rb) };
        if moved[v] || on_face_border(v) || rv == 0.0 {
            continue;
        }
        let m = partner[&v];
        let old_v = vertices[v];
        let old_m = vertices[m];
        let q = trace.local([old_v[1], old_v[2]]);
        let x2 = trace.center[0] + trace.scale * q[0] / rv;
        let x3 = trace.center[1] + trace.scale * q[1] / rv;
        let diam = |p: [[f64; 3]; 4]| {
            let mut d: f64 = 0.0;
            for i in 0..4 {
                for j in i + 1..4 {
                    d = d.max(norm(sub(p[i], p[j])));
                }
            }
            d
        };
        let before: Vec<(f64, f64)> = vert_tets[&v]
            .iter()
            .chain(vert_tets[&m].iter())
            .map(|&t| {
                let p = tets[t].map(|n| vertices[n]);
                (tet_volume(p), diam(p))
            })
            .collect();
        vertices[v] = [old_v[0], x2, x3];
        vertices[m] = [old_m[0], x2, x3];
        let ok = vert_tets[&v]
            .iter()
            .chain(vert_tets[&m].iter())
            .zip(&before)
            .all(|(&t, &(vol, d))| {
                let p = tets[t].map(|n| vertices[n]);
                tet_volume(p) > 0.2 * vol && diam(p) <= d.max(h_aperture)
            });
        if ok {
            moved[v] = true;
            moved[m] = true;
        } else {
            vertices[v] = old_v;
            vertices[m] = old_m;
        }
    }
}
