//! Merging of independently generated meshes along common boundaries.
//!
//! Coincident vertices are snapped, and every boundary vertex that lies in
//! the interior of another boundary edge is inserted into that edge as a
//! hanging node. Boundary labels of split edges are inherited.

use std::collections::HashMap;

use super::{EdgeTag, PolygonalMesh, Subdomain};
use crate::error::{Result, VemError};

/// Relative snapping tolerance (times the largest cell diameter).
const SNAP_TOL: f64 = 1e-10;
/// Vertices of another part closer than this fraction of an edge length,
/// but not on it, indicate a gap or overlap between traces.
const NEAR_MISS: f64 = 1e-3;

pub fn merge_at_interface(mesh_p: &PolygonalMesh, mesh_e: &PolygonalMesh) -> Result<PolygonalMesh> {
    merge_meshes(&[mesh_p, mesh_e])
}

/// Merge any number of meshes tiling disjoint regions.
pub fn merge_meshes(parts: &[&PolygonalMesh]) -> Result<PolygonalMesh> {
    let h = parts.iter().map(|m| m.h()).fold(0.0, f64::max);
    if !(h > 0.0) {
        return Err(VemError::InvalidArgument("nothing to merge".into()));
    }
    let tol = SNAP_TOL * h;

    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut part_of_point: Vec<usize> = Vec::new();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut cell_tags: Vec<Subdomain> = Vec::new();
    let mut local_tags: Vec<Vec<EdgeTag>> = Vec::new();
    for (pi, m) in parts.iter().enumerate() {
        let off = points.len();
        points.extend_from_slice(m.vertices());
        part_of_point.extend(std::iter::repeat_n(pi, m.num_vertices()));
        for c in 0..m.num_cells() {
            cells.push(m.cells()[c].iter().map(|&v| v + off).collect());
            cell_tags.push(m.cell_tags()[c]);
            local_tags.push(m.cell_edges(c).iter().map(|&e| m.edge_tags()[e]).collect());
        }
    }

    let (vertices, remap) = snap_points(&points, tol);
    let mut vertex_parts: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (old, &new) in remap.iter().enumerate() {
        if !vertex_parts[new].contains(&part_of_point[old]) {
            vertex_parts[new].push(part_of_point[old]);
        }
    }
    for (cell, tags) in cells.iter_mut().zip(local_tags.iter_mut()) {
        for v in cell.iter_mut() {
            *v = remap[*v];
        }
        dedup_cyclic(cell, tags);
    }

    // directed edge multiplicities
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for cell in &cells {
        for i in 0..cell.len() {
            let (a, b) = (cell[i], cell[(i + 1) % cell.len()]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let is_boundary = |a: usize, b: usize| count.get(&(a.min(b), a.max(b))) == Some(&1);

    let mut boundary_vertices: Vec<usize> = Vec::new();
    let mut on_boundary = vec![false; vertices.len()];
    for cell in &cells {
        for i in 0..cell.len() {
            let (a, b) = (cell[i], cell[(i + 1) % cell.len()]);
            if is_boundary(a, b) {
                for v in [a, b] {
                    if !on_boundary[v] {
                        on_boundary[v] = true;
                        boundary_vertices.push(v);
                    }
                }
            }
        }
    }
    boundary_vertices.sort_by(|&a, &b| vertices[a][0].total_cmp(&vertices[b][0]));
    let xs: Vec<f64> = boundary_vertices.iter().map(|&v| vertices[v][0]).collect();

    let mut new_cells = Vec::with_capacity(cells.len());
    let mut new_local_tags = Vec::with_capacity(cells.len());
    for (cell, tags) in cells.iter().zip(&local_tags) {
        let n = cell.len();
        let mut out = Vec::with_capacity(n + 2);
        let mut out_tags = Vec::with_capacity(n + 2);
        for i in 0..n {
            let (a, b) = (cell[i], cell[(i + 1) % n]);
            out.push(a);
            out_tags.push(tags[i]);
            if !is_boundary(a, b) {
                continue;
            }
            let pa = vertices[a];
            let pb = vertices[b];
            let d = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let len = len2.sqrt();
            let lo = pa[0].min(pb[0]) - NEAR_MISS * len;
            let hi = pa[0].max(pb[0]) + NEAR_MISS * len;
            let start = xs.partition_point(|&x| x < lo);
            let mut hits: Vec<(f64, usize)> = Vec::new();
            for &v in &boundary_vertices[start..] {
                let p = vertices[v];
                if p[0] > hi {
                    break;
                }
                if v == a || v == b {
                    continue;
                }
                let r = [p[0] - pa[0], p[1] - pa[1]];
                let t = (r[0] * d[0] + r[1] * d[1]) / len2;
                if t * len <= tol || (1.0 - t) * len <= tol {
                    continue;
                }
                let dist = (r[0] * d[1] - r[1] * d[0]).abs() / len;
                if dist <= tol {
                    hits.push((t, v));
                } else if dist < NEAR_MISS * len
                    && t > 0.0
                    && t < 1.0
                    && vertex_parts[v].iter().any(|q| !vertex_parts[a].contains(q))
                {
                    return Err(VemError::Mismatch(format!(
                        "vertex ({:.6e}, {:.6e}) is {dist:.3e} away from edge ({:.6e}, {:.6e})-({:.6e}, {:.6e})",
                        p[0], p[1], pa[0], pa[1], pb[0], pb[1]
                    )));
                }
            }
            hits.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (_, v) in hits {
                out.push(v);
                out_tags.push(tags[i]);
            }
        }
        new_cells.push(out);
        new_local_tags.push(out_tags);
    }

    let mut mesh = PolygonalMesh::new(vertices, new_cells, cell_tags)?;
    for c in 0..mesh.num_cells() {
        for (i, &e) in mesh.cell_edges(c).to_vec().iter().enumerate() {
            if mesh.edges()[e].is_boundary() {
                mesh.set_edge_tag(e, new_local_tags[c][i]);
            }
        }
    }
    Ok(mesh)
}

/// Union coincident points (within `tol`); representatives keep the order of
/// first appearance.
pub(crate) fn snap_points(points: &[[f64; 2]], tol: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let cell = (4.0 * tol).max(f64::MIN_POSITIVE);
    let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut remap = vec![usize::MAX; points.len()];
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (i, &p) in points.iter().enumerate() {
        let (kx, ky) = key(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                    for &j in list {
                        let q = out[j];
                        if (p[0] - q[0]).hypot(p[1] - q[1]) <= tol {
                            found = Some(j);
                            break 'search;
                        }
                    }
                }
            }
        }
        remap[i] = match found {
            Some(j) => j,
            None => {
                out.push(p);
                buckets.entry((kx, ky)).or_default().push(out.len() - 1);
                out.len() - 1
            }
        };
    }
    (out, remap)
}

/// Drop consecutive repeated vertices of a closed loop (and the matching
/// per-edge entries).
fn dedup_cyclic<T>(cell: &mut Vec<usize>, tags: &mut Vec<T>) {
    let mut i = 0;
    while cell.len() > 1 && i < cell.len() {
        let next = (i + 1) % cell.len();
        if cell[i] == cell[next] {
            cell.remove(next);
            tags.remove(i);
        } else {
            i += 1;
        }
    }
}
