//! Benchmark inputs shared by the criterion targets.

use biotvem::forms::Stabilization;
use biotvem::mesh::random_star_polygon;
use biotvem::{CaseId, ManufacturedCase, PolygonalMesh, Result};

/// A star-shaped polygon with `n` vertices and unit size.
pub fn star_cell(n: usize) -> Result<Vec<[f64; 2]>> {
    random_star_polygon(7, n, 1.0)
}

/// Case data and the mesh of one refinement level.
pub fn case_mesh(id: CaseId, level: usize) -> Result<(ManufacturedCase, PolygonalMesh)> {
    let case = ManufacturedCase::get(id)?;
    let mesh = case.mesh(level, 0)?.mesh;
    Ok((case, mesh))
}

pub fn stabilizations() -> [Stabilization; 2] {
    use biotvem::StabilizerKind::{DofiDofi, TangentialEdge};
    [
        Stabilization { kind: DofiDofi, ..Default::default() },
        Stabilization { kind: TangentialEdge, ..Default::default() },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_available() {
        assert_eq!(star_cell(8).unwrap().len(), 8);
        let (case, mesh) = case_mesh(CaseId::JumpInterface, 1).unwrap();
        assert_eq!(case.id, CaseId::JumpInterface);
        assert!(mesh.num_cells() > 0);
    }
}
