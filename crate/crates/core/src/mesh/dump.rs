use std::io::{self, Write};

use super::CellMesh;

/// Plain-text mesh dump with sections VERTICES, TETS, FACETS and PAIRS,
/// one record per line.
pub fn write_mesh<W: Write>(mesh: &CellMesh, mut out: W) -> io::Result<()> {
    writeln!(out, "VERTICES {}", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
    }
    writeln!(out, "TETS {}", mesh.tets.len())?;
    for t in &mesh.tets {
        writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "FACETS {}", mesh.boundary_facets.len())?;
    for f in &mesh.boundary_facets {
        writeln!(out, "{} {} {} {}", f.nodes[0], f.nodes[1], f.nodes[2], f.tag.name())?;
    }
    writeln!(out, "PAIRS {}", mesh.aperture_pairing.len())?;
    for (a, b) in &mesh.aperture_pairing {
        writeln!(out, "{a} {b}")?;
    }
    Ok(())
}
