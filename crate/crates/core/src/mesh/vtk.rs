//! Legacy VTK polydata export.

use std::io::Write;

use super::PolygonalMesh;
use crate::error::Result;

/// Point and cell data attached to a VTK snapshot.
#[derive(Debug, Clone, Default)]
pub struct VtkFields {
    pub point_scalars: Vec<(String, Vec<f64>)>,
    pub point_vectors: Vec<(String, Vec<[f64; 2]>)>,
    pub cell_scalars: Vec<(String, Vec<f64>)>,
    /// Optional vertex displacement applied to the written coordinates.
    pub deformation: Option<Vec<[f64; 2]>>,
}

pub fn write_polydata(mesh: &PolygonalMesh, fields: &VtkFields, title: &str, mut w: impl Write) -> Result<()> {
    let nv = mesh.num_vertices();
    let nc = mesh.num_cells();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {nv} double")?;
    for (i, p) in mesh.vertices().iter().enumerate() {
        let d = fields
            .deformation
            .as_ref()
            .map_or([0.0, 0.0], |d| d[i]);
        writeln!(w, "{:.12e} {:.12e} 0", p[0] + d[0], p[1] + d[1])?;
    }
    let size: usize = mesh.cells().iter().map(|c| c.len() + 1).sum();
    writeln!(w, "POLYGONS {nc} {size}")?;
    for c in mesh.cells() {
        write!(w, "{}", c.len())?;
        for v in c {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_DATA {nc}")?;
    writeln!(w, "SCALARS subdomain int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in mesh.cell_tags() {
        writeln!(w, "{}", u8::from(*t == super::Subdomain::Elastic))?;
    }
    for (name, vals) in &fields.cell_scalars {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in vals {
            writeln!(w, "{v:.12e}")?;
        }
    }
    if !fields.point_scalars.is_empty() || !fields.point_vectors.is_empty() {
        writeln!(w, "POINT_DATA {nv}")?;
        for (name, vals) in &fields.point_scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v:.12e}")?;
            }
        }
        for (name, vals) in &fields.point_vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in vals {
                writeln!(w, "{:.12e} {:.12e} 0", v[0], v[1])?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_grid, Rect, Subdomain};

    #[test]
    fn header_and_counts() {
        let m = build_rect_grid(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 2, Subdomain::Poro).unwrap();
        let mut buf = Vec::new();
        let fields = VtkFields {
            point_vectors: vec![("u".into(), vec![[1.0, 0.0]; 9])],
            ..Default::default()
        };
        write_polydata(&m, &fields, "t", &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 9 double"));
        assert!(s.contains("POLYGONS 4 20"));
        assert!(s.contains("VECTORS u double"));
    }
}
