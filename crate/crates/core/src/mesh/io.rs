//! JSON mesh files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EdgeTag, PolygonalMesh, Subdomain};
use crate::error::{Result, VemError};

/// On-disk mesh layout. Only edges with a boundary label are listed in
/// `edge_tags`; interior and interface edges are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_tags: Vec<Subdomain>,
    pub edge_tags: Vec<EdgeTagEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTagEntry {
    pub vertices: [usize; 2],
    pub tag: EdgeTag,
}

impl From<&PolygonalMesh> for MeshFile {
    fn from(m: &PolygonalMesh) -> Self {
        let edge_tags = m
            .edges()
            .iter()
            .zip(m.edge_tags())
            .filter(|(e, _)| e.is_boundary())
            .map(|(e, &tag)| EdgeTagEntry {
                vertices: e.vertices,
                tag,
            })
            .collect();
        Self {
            vertices: m.vertices().to_vec(),
            cells: m.cells().to_vec(),
            cell_tags: m.cell_tags().to_vec(),
            edge_tags,
        }
    }
}

impl TryFrom<MeshFile> for PolygonalMesh {
    type Error = VemError;

    fn try_from(f: MeshFile) -> Result<Self> {
        let mut mesh = PolygonalMesh::new(f.vertices, f.cells, f.cell_tags)?;
        let lookup: std::collections::HashMap<(usize, usize), usize> = mesh
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.vertices[0], e.vertices[1]), i))
            .collect();
        for entry in f.edge_tags {
            let [a, b] = entry.vertices;
            let key = (a.min(b), a.max(b));
            let e = *lookup.get(&key).ok_or_else(|| {
                VemError::InvalidMesh(format!("tagged edge {key:?} is not a mesh edge"))
            })?;
            if !mesh.edges()[e].is_boundary() {
                return Err(VemError::InvalidMesh(format!(
                    "edge {key:?} is interior but carries tag {:?}",
                    entry.tag
                )));
            }
            mesh.set_edge_tag(e, entry.tag);
        }
        Ok(mesh)
    }
}

impl PolygonalMesh {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MeshFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MeshFile = serde_json::from_str(s)?;
        f.try_into()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_grid, Rect};

    #[test]
    fn json_round_trip_keeps_tags() {
        let m = build_rect_grid(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 3, Subdomain::Poro)
            .unwrap()
            .with_boundary_tags(|mid, _, _| {
                if mid[1] == 0.0 {
                    EdgeTag::DirichletPoro
                } else {
                    EdgeTag::NeumannPoro
                }
            });
        let back = PolygonalMesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(m.to_json().unwrap().contains("\"gamma_d_p\""));
    }

    #[test]
    fn tag_on_interior_edge_is_rejected() {
        let m = build_rect_grid(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 1, Subdomain::Poro).unwrap();
        let mut f = MeshFile::from(&m);
        f.edge_tags.push(EdgeTagEntry {
            vertices: [1, 4],
            tag: EdgeTag::DirichletPoro,
        });
        assert!(PolygonalMesh::try_from(f).is_err());
    }
}
