use std::collections::{BTreeMap, BTreeSet};

use super::{norm, sub, tet_volume, CellMesh, FacetTag};

/// Mesh diagnostics. `issues` is empty for a valid mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub num_vertices: usize,
    pub num_tets: usize,
    pub min_volume: f64,
    pub max_volume: f64,
    /// Smallest dihedral angle in degrees.
    pub min_dihedral: f64,
    pub facet_counts: BTreeMap<FacetTag, usize>,
    pub num_pairs: usize,
    pub issues: Vec<String>,
}

impl MeshReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

fn dihedral_angles(p: [[f64; 3]; 4]) -> [f64; 6] {
    // angle along edge (i,j) between faces containing it
    let pairs = [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2), (1, 2, 0, 3), (1, 3, 0, 2), (2, 3, 0, 1)];
    let mut out = [0.0; 6];
    for (n, (i, j, k, l)) in pairs.into_iter().enumerate() {
        let e = sub(p[j], p[i]);
        let ee = super::dot(e, e);
        let proj = |q: [f64; 3]| {
            let w = sub(q, p[i]);
            let s = super::dot(w, e) / ee;
            sub(w, [s * e[0], s * e[1], s * e[2]])
        };
        let a = proj(p[k]);
        let b = proj(p[l]);
        let c = (super::dot(a, b) / (norm(a) * norm(b))).clamp(-1.0, 1.0);
        out[n] = c.acos().to_degrees();
    }
    out
}

pub fn validate_mesh(mesh: &CellMesh) -> MeshReport {
    let mut issues = Vec::new();
    let mut min_volume = f64::INFINITY;
    let mut max_volume = f64::NEG_INFINITY;
    let mut min_dihedral = 180.0f64;
    for t in 0..mesh.tets.len() {
        let p = mesh.tet_points(t);
        let v = tet_volume(p);
        min_volume = min_volume.min(v);
        max_volume = max_volume.max(v);
        if !(v > 0.0) {
            issues.push(format!("tet {t} has non-positive volume {v:e}"));
            continue;
        }
        for a in dihedral_angles(p) {
            min_dihedral = min_dihedral.min(a);
        }
    }

    // boundary faces from tet adjacency must match the tagged facets exactly
    let mut faces: Vec<[usize; 3]> = Vec::with_capacity(mesh.tets.len() * 4);
    for t in &mesh.tets {
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| t[i]).collect();
            f.sort_unstable();
            faces.push([f[0], f[1], f[2]]);
        }
    }
    faces.sort_unstable();
    let mut boundary = BTreeSet::new();
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j] == faces[i] {
            j += 1;
        }
        if j - i == 1 {
            boundary.insert(faces[i]);
        } else if j - i > 2 {
            issues.push(format!("face {:?} shared by {} tets", faces[i], j - i));
        }
        i = j;
    }
    let mut tagged = BTreeSet::new();
    let mut facet_counts = BTreeMap::new();
    for f in &mesh.boundary_facets {
        let mut s = f.nodes;
        s.sort_unstable();
        if !tagged.insert(s) {
            issues.push(format!("facet {s:?} tagged twice"));
        }
        *facet_counts.entry(f.tag).or_insert(0) += 1;
        let q = mesh.facet_points(f);
        let plane_ok = match f.tag {
            FacetTag::FreeSurface => q.iter().all(|p| p[2] == 0.0),
            FacetTag::Aperture0 => q.iter().all(|p| p[0] == 0.0),
            FacetTag::Aperture1 => q.iter().all(|p| p[0] == 1.0),
            FacetTag::Wall => true,
        };
        if !plane_ok {
            issues.push(format!("facet {s:?} tagged {} off its plane", f.tag.name()));
        }
    }
    if tagged != boundary {
        let missing = boundary.difference(&tagged).count();
        let extra = tagged.difference(&boundary).count();
        issues.push(format!("tag coverage mismatch: {missing} untagged, {extra} spurious"));
    }

    // pairing: bijection between aperture nodes, exact unit translation
    let mut ap = [BTreeSet::new(), BTreeSet::new()];
    for f in &mesh.boundary_facets {
        match f.tag {
            FacetTag::Aperture0 => ap[0].extend(f.nodes),
            FacetTag::Aperture1 => ap[1].extend(f.nodes),
            _ => {}
        }
    }
    let mut seen0 = BTreeSet::new();
    let mut seen1 = BTreeSet::new();
    for &(a, b) in &mesh.aperture_pairing {
        if !seen0.insert(a) || !seen1.insert(b) {
            issues.push(format!("pair ({a},{b}) repeats a node"));
        }
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        if p[0] != 0.0 || q[0] != 1.0 || p[1] != q[1] || p[2] != q[2] {
            issues.push(format!("pair ({a},{b}) is not an exact unit translate"));
        }
    }
    for n in &ap[0] {
        if !seen0.contains(n) {
            issues.push(format!("aperture node {n} on wall 0 is unpaired"));
        }
    }
    for n in &ap[1] {
        if !seen1.contains(n) {
            issues.push(format!("aperture node {n} on wall 1 is unpaired"));
        }
    }

    MeshReport {
        num_vertices: mesh.vertices.len(),
        num_tets: mesh.tets.len(),
        min_volume,
        max_volume,
        min_dihedral,
        facet_counts,
        num_pairs: mesh.aperture_pairing.len(),
        issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellGeometry;
    use crate::mesh::generate_cell_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn structured_mesh_is_clean() {
        let m = generate_cell_mesh(&CellGeometry::default_box(), 0.2, 0.25, None).unwrap();
        let r = validate_mesh(&m);
        assert!(r.is_clean(), "{:?}", r.issues);
        assert_relative_eq!(r.min_volume, r.max_volume, max_relative = 1e-12);
        assert!(r.min_dihedral > 30.0);
    }

    #[test]
    fn graded_mesh_is_clean() {
        let m = generate_cell_mesh(&CellGeometry::default_box(), 0.2, 0.25, Some(0.25)).unwrap();
        let r = validate_mesh(&m);
        assert!(r.is_clean(), "{:?}", r.issues);
        assert!(r.num_pairs > 0);
        assert!(r.min_dihedral > 5.0, "{}", r.min_dihedral);
    }

    #[test]
    fn inverted_tet_flagged() {
        let mut m = generate_cell_mesh(&CellGeometry::default_box(), 0.2, 0.5, None).unwrap();
        m.tets[3].swap(0, 1);
        let r = validate_mesh(&m);
        assert!(r.issues.iter().any(|s| s.contains("tet 3")));
    }

    #[test]
    fn unpaired_node_flagged() {
        let mut m = generate_cell_mesh(&CellGeometry::default_box(), 0.2, 0.25, Some(0.25)).unwrap();
        m.aperture_pairing.pop();
        let r = validate_mesh(&m);
        assert!(r.issues.iter().any(|s| s.contains("unpaired")), "{:?}", r.issues);
    }
}
