//! Shape-regularity diagnostics.

use serde::{Deserialize, Serialize};

use super::PolygonalMesh;
use crate::polykernel::diameter;

type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellQuality {
    /// Radius of the largest disc inside the kernel, over `h_K`.
    pub rho: f64,
    /// Shortest edge over `h_K`.
    pub min_edge_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshQualityReport {
    pub cells: Vec<CellQuality>,
    pub min_rho: f64,
    pub min_edge_ratio: f64,
    pub tolerance: f64,
    /// Cells with `rho` or `min_edge_ratio` below `tolerance`.
    pub flagged: Vec<usize>,
}

/// Per-cell star-shapedness and edge-length ratios.
pub fn check_mesh_assumptions(mesh: &PolygonalMesh, tolerance: f64) -> MeshQualityReport {
    let cells: Vec<CellQuality> = (0..mesh.num_cells())
        .map(|c| cell_quality(&mesh.cell_points(c)))
        .collect();
    let flagged = cells
        .iter()
        .enumerate()
        .filter(|(_, q)| q.rho < tolerance || q.min_edge_ratio < tolerance)
        .map(|(i, _)| i)
        .collect();
    MeshQualityReport {
        min_rho: cells.iter().map(|q| q.rho).fold(f64::INFINITY, f64::min),
        min_edge_ratio: cells
            .iter()
            .map(|q| q.min_edge_ratio)
            .fold(f64::INFINITY, f64::min),
        cells,
        tolerance,
        flagged,
    }
}

pub fn cell_quality(pts: &[Point]) -> CellQuality {
    let h = diameter(pts);
    let n = pts.len();
    let min_edge = (0..n)
        .map(|i| {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .fold(f64::INFINITY, f64::min);
    CellQuality {
        rho: kernel_inradius(pts) / h,
        min_edge_ratio: min_edge / h,
    }
}

/// Chebyshev radius of the intersection of the inner half-planes of all
/// edges (the kernel of the polygon). Zero if the kernel has no interior.
///
/// The optimal disc touches three edge lines, so all triples are tried.
pub fn kernel_inradius(pts: &[Point]) -> f64 {
    let n = pts.len();
    // lines n . x <= d with unit outward normals
    let lines: Vec<(Point, f64)> = (0..n)
        .map(|i| {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            let nv = [t[1] / len, -t[0] / len];
            (nv, nv[0] * p[0] + nv[1] * p[1])
        })
        .collect();
    let scale = diameter(pts);
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some((c, r)) = tangent_disc([lines[i], lines[j], lines[k]]) else {
                    continue;
                };
                if r <= best {
                    continue;
                }
                let feasible = lines
                    .iter()
                    .all(|(nv, d)| d - nv[0] * c[0] - nv[1] * c[1] >= r - 1e-12 * scale);
                if feasible {
                    best = r;
                }
            }
        }
    }
    best
}

/// Solve `n_i . c + r = d_i` for three lines.
fn tangent_disc(l: [(Point, f64); 3]) -> Option<(Point, f64)> {
    let m = nalgebra::Matrix3::new(
        l[0].0[0], l[0].0[1], 1.0, l[1].0[0], l[1].0[1], 1.0, l[2].0[0], l[2].0[1], 1.0,
    );
    let rhs = nalgebra::Vector3::new(l[0].1, l[1].1, l[2].1);
    let lu = m.lu();
    let x = lu.solve(&rhs)?;
    if !x.iter().all(|v| v.is_finite()) || m.determinant().abs() < 1e-14 {
        return None;
    }
    Some(([x[0], x[1]], x[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_grid, merge_at_interface, Rect, Subdomain};

    #[test]
    fn unit_square_ratio() {
        let q = cell_quality(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert!((q.rho - 0.5 / 2f64.sqrt()).abs() < 1e-14);
        assert!((q.min_edge_ratio - 1.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn equilateral_triangle_inradius() {
        let s3 = 3f64.sqrt();
        let r = kernel_inradius(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * s3]]);
        assert!((r - s3 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn non_star_shaped_has_zero_radius() {
        // the inner sides of the two vertical notch edges do not intersect
        let pts = [
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 1.0],
            [2.0, 1.0],
            [2.0, 0.2],
            [1.0, 0.2],
            [1.0, 2.0],
            [0.0, 2.0],
        ];
        assert_eq!(kernel_inradius(&pts), 0.0);
    }

    #[test]
    fn hanging_node_pentagon_edge_ratio() {
        let p = build_rect_grid(Rect::new(0.0, 0.0, 1.0, 1.0), 2, 2, Subdomain::Poro).unwrap();
        let e = build_rect_grid(Rect::new(0.0, 1.0, 1.0, 2.0), 3, 3, Subdomain::Elastic).unwrap();
        let m = merge_at_interface(&p, &e).unwrap();
        let rep = check_mesh_assumptions(&m, 0.05);
        // cell 2 = [0, 1/2] x [1/2, 1] with a node at x = 1/3: shortest edge 1/6
        let hk = m.cell_diameter(2);
        assert!((rep.cells[2].min_edge_ratio - (1.0 / 6.0) / hk).abs() < 1e-14);
        assert!(rep.flagged.is_empty());
    }
}
