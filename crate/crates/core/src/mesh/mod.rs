//! Polygonal meshes of the poroelastic / elastic domain.
//!
//! A [`PolygonalMesh`] is immutable once built: vertices, counter-clockwise
//! cells, one subdomain label per cell and derived edge topology with a
//! boundary label per edge. Hanging nodes coming from non-matching
//! subdomain meshes are ordinary polygon vertices after
//! [`merge_at_interface`].

mod generators;
mod io;
mod merge;
mod quality;
mod voronoi;
pub mod vtk;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::polykernel::{self, Polygon};

pub use generators::{
    build_polygonal_mesh, build_rect_grid, random_star_polygon, GeneratorInfo, InclusionShape, Rect,
    SubdomainSpec,
};
pub use io::{EdgeTagEntry, MeshFile};
pub use merge::{merge_at_interface, merge_meshes};
pub use quality::{check_mesh_assumptions, CellQuality, MeshQualityReport};
pub use voronoi::{lloyd_voronoi, VoronoiOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subdomain {
    #[serde(rename = "P")]
    Poro,
    #[serde(rename = "E")]
    Elastic,
}

/// Boundary label of an edge.
///
/// `Gamma_D` edges carry essential displacement data, `Gamma_N` edges carry
/// tractions; on the poroelastic side `Gamma_D` additionally means zero (or
/// prescribed) fluid flux and `Gamma_N` prescribed fluid pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeTag {
    #[serde(rename = "gamma_d_e")]
    DirichletElastic,
    #[serde(rename = "gamma_n_e")]
    NeumannElastic,
    #[serde(rename = "gamma_d_p")]
    DirichletPoro,
    #[serde(rename = "gamma_n_p")]
    NeumannPoro,
    #[serde(rename = "interface")]
    Interface,
    #[serde(rename = "interior")]
    Interior,
    #[serde(rename = "untagged")]
    Untagged,
}

impl EdgeTag {
    pub fn is_boundary(self) -> bool {
        !matches!(self, EdgeTag::Interface | EdgeTag::Interior)
    }
}

/// Undirected edge `vertices[0] < vertices[1]` with its one or two cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Cell traversing the edge from `vertices[0]` to `vertices[1]` (if any)
    /// and the cell traversing it backwards (if any).
    pub cells: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[0].is_none() || self.cells[1].is_none()
    }

    /// The unique cell of a boundary edge.
    pub fn owner(&self) -> usize {
        self.cells[0].or(self.cells[1]).expect("edge without cells")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    cell_tags: Vec<Subdomain>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    edge_tags: Vec<EdgeTag>,
}

impl PolygonalMesh {
    /// Build the edge topology and validate the cells. Boundary edges start
    /// out [`EdgeTag::Untagged`]; edges between a `P` and an `E` cell are
    /// tagged [`EdgeTag::Interface`].
    pub fn new(
        vertices: Vec<[f64; 2]>,
        cells: Vec<Vec<usize>>,
        cell_tags: Vec<Subdomain>,
    ) -> Result<Self> {
        if cells.len() != cell_tags.len() {
            return Err(VemError::InvalidMesh(format!(
                "{} cells but {} tags",
                cells.len(),
                cell_tags.len()
            )));
        }
        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(VemError::InvalidMesh(format!("cell {c} has {} vertices", cell.len())));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(VemError::InvalidMesh(format!("cell {c} references vertex {v}")));
            }
            let pts: Vec<[f64; 2]> = cell.iter().map(|&v| vertices[v]).collect();
            let area = polykernel::signed_area(&pts);
            let h = polykernel::diameter(&pts);
            if !(area > 1e-14 * h * h) {
                return Err(VemError::InvalidMesh(format!(
                    "cell {c} is not counter-clockwise with positive area ({area:e})"
                )));
            }
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let a = cell[i];
                let b = cell[(i + 1) % n];
                if a == b {
                    return Err(VemError::InvalidMesh(format!("cell {c} repeats vertex {a}")));
                }
                let key = (a.min(b), a.max(b));
                let side = usize::from(a > b);
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: [None, None],
                    });
                    edges.len() - 1
                });
                if edges[e].cells[side].is_some() {
                    return Err(VemError::InvalidMesh(format!(
                        "edge {key:?} traversed twice in the same direction (cells {} and {c})",
                        edges[e].cells[side].unwrap()
                    )));
                }
                edges[e].cells[side] = Some(c);
                local.push(e);
            }
            cell_edges.push(local);
        }
        let edge_tags = edges
            .iter()
            .map(|e| match e.cells {
                [Some(a), Some(b)] if cell_tags[a] != cell_tags[b] => EdgeTag::Interface,
                [Some(_), Some(_)] => EdgeTag::Interior,
                _ => EdgeTag::Untagged,
            })
            .collect();
        Ok(Self {
            vertices,
            cells,
            cell_tags,
            edges,
            cell_edges,
            edge_tags,
        })
    }

    /// Assign labels to boundary edges with `rule(midpoint, outward_normal,
    /// subdomain)`.
    pub fn with_boundary_tags(
        mut self,
        rule: impl Fn([f64; 2], [f64; 2], Subdomain) -> EdgeTag,
    ) -> Self {
        for e in 0..self.edges.len() {
            if self.edges[e].is_boundary() {
                let (mid, normal) = self.boundary_edge_frame(e);
                self.edge_tags[e] = rule(mid, normal, self.cell_tags[self.edges[e].owner()]);
            }
        }
        self
    }

    pub(crate) fn set_edge_tag(&mut self, e: usize, tag: EdgeTag) {
        self.edge_tags[e] = tag;
    }

    fn boundary_edge_frame(&self, e: usize) -> ([f64; 2], [f64; 2]) {
        let edge = &self.edges[e];
        let [a, b] = edge.vertices;
        let (p, q) = if edge.cells[0].is_some() {
            (self.vertices[a], self.vertices[b])
        } else {
            (self.vertices[b], self.vertices[a])
        };
        let t = [q[0] - p[0], q[1] - p[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        (
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
            [t[1] / len, -t[0] / len],
        )
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_tags(&self) -> &[Subdomain] {
        &self.cell_tags
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_tags(&self) -> &[EdgeTag] {
        &self.edge_tags
    }

    /// Global edge ids of the local edges of `cell` (edge `i` joins local
    /// vertices `i` and `i + 1`).
    pub fn cell_edges(&self, cell: usize) -> &[usize] {
        &self.cell_edges[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cell_polygon(&self, cell: usize) -> Result<Polygon> {
        Polygon::new(self.cell_points(cell))
    }

    pub fn cell_points(&self, cell: usize) -> Vec<[f64; 2]> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        polykernel::signed_area(&self.cell_points(cell))
    }

    pub fn cell_diameter(&self, cell: usize) -> f64 {
        polykernel::diameter(&self.cell_points(cell))
    }

    /// Mesh size `h = max_K h_K`.
    pub fn h(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.cell_diameter(c))
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn interface_edges(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edge_tags[e] == EdgeTag::Interface)
            .collect()
    }

    /// Midpoint and unit normal of a boundary edge, pointing out of its cell.
    pub fn boundary_edge_normal(&self, e: usize) -> ([f64; 2], [f64; 2]) {
        self.boundary_edge_frame(e)
    }

    pub fn cells_in(&self, sub: Subdomain) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_cells()).filter(move |&c| self.cell_tags[c] == sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_cell_topology() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]];
        let cells = vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]];
        let m = PolygonalMesh::new(v, cells, vec![Subdomain::Poro, Subdomain::Elastic]).unwrap();
        assert_eq!(m.num_edges(), 7);
        assert_eq!(m.interface_edges().len(), 1);
        let e = m.interface_edges()[0];
        assert_eq!(m.edges()[e].vertices, [1, 4]);
        assert_eq!(m.edges()[e].cells, [Some(0), Some(1)]);
        let untagged = m.edge_tags().iter().filter(|&&t| t == EdgeTag::Untagged).count();
        assert_eq!(untagged, 6);
    }

    #[test]
    fn inconsistent_orientation_is_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // second triangle is clockwise
        let cells = vec![vec![0, 1, 2], vec![1, 2, 3]];
        assert!(PolygonalMesh::new(v, cells, vec![Subdomain::Poro; 2]).is_err());
    }
}
