//! Global numbering of the `[u | p | psi]` unknowns and essential conditions.

use serde::Serialize;

use crate::error::{Result, VemError};
use crate::manufactured::EdgeBc;
use crate::mesh::{EdgeTag, PolygonalMesh, Subdomain};
use crate::polykernel::{dim, gauss_lobatto};

/// What a constrained unknown prescribes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintKind {
    Displacement { component: usize },
    Pressure,
}

/// One essential condition: global unknown, the node it sits on, and what
/// is prescribed there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constraint {
    pub dof: usize,
    pub point: [f64; 2],
    pub kind: ConstraintKind,
}

/// Unknown counts of one map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DofCounts {
    pub v: usize,
    pub q: usize,
    pub z: usize,
    pub fixed_u: usize,
    pub fixed_p: usize,
}

/// Global DOF numbering.
///
/// Nodes are the mesh vertices followed by the `k - 1` interior Lobatto
/// points of every edge, in the direction `vertices[0] -> vertices[1]`.
/// Displacement unknowns `2 node + c` come first, then per-cell interior
/// displacement moments; pressure unknowns live on nodes of poroelastic
/// cells plus per-cell moments; total-pressure unknowns are per cell.
/// Indices in `cell_v`, `cell_q` and `cell_z` are global (already offset).
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub node_points: Vec<[f64; 2]>,
    /// Global node of each local boundary node.
    pub cell_nodes: Vec<Vec<usize>>,
    pub cell_v: Vec<Vec<usize>>,
    /// Empty on elastic cells.
    pub cell_q: Vec<Vec<usize>>,
    pub cell_z: Vec<Vec<usize>>,
    pub n_v: usize,
    pub n_q: usize,
    pub n_z: usize,
    pub constraints: Vec<Constraint>,
    /// Reduced index of every unknown, `None` when constrained.
    pub reduced: Vec<Option<usize>>,
    /// Full index of every reduced unknown.
    pub free: Vec<usize>,
    /// Pressure unknown of each node (`None` off the poroelastic region).
    pub node_q: Vec<Option<usize>>,
}

impl DofMap {
    pub fn total(&self) -> usize {
        self.n_v + self.n_q + self.n_z
    }

    pub fn q_offset(&self) -> usize {
        self.n_v
    }

    pub fn z_offset(&self) -> usize {
        self.n_v + self.n_q
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn counts(&self) -> DofCounts {
        let fixed_u = self
            .constraints
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::Displacement { .. }))
            .count();
        DofCounts {
            v: self.n_v,
            q: self.n_q,
            z: self.n_z,
            fixed_u,
            fixed_p: self.constraints.len() - fixed_u,
        }
    }

    /// Global nodes of edge `e` from `vertices[0]` to `vertices[1]`.
    pub fn edge_nodes(&self, mesh: &PolygonalMesh, e: usize) -> Vec<usize> {
        let [a, b] = mesh.edges()[e].vertices;
        let nv = mesh.num_vertices();
        let mut out = Vec::with_capacity(self.k + 1);
        out.push(a);
        out.extend((0..self.k - 1).map(|j| nv + e * (self.k - 1) + j));
        out.push(b);
        out
    }

    /// Displacement unknown of component `c` at node `n`.
    pub fn u_dof(node: usize, c: usize) -> usize {
        2 * node + c
    }
}

/// Number the unknowns of `mesh` and collect essential conditions from the
/// edge labels through `bc(tag, outward_normal)`.
pub fn build_dof_map(
    mesh: &PolygonalMesh,
    k: usize,
    bc: impl Fn(EdgeTag, [f64; 2]) -> EdgeBc,
) -> Result<DofMap> {
    if k < 2 {
        return Err(VemError::UnsupportedOrder(k));
    }
    let nv = mesh.num_vertices();
    let n_nodes = nv + mesh.num_edges() * (k - 1);
    let lobatto = &gauss_lobatto(k + 1).nodes;
    let mut node_points = mesh.vertices().to_vec();
    for edge in mesh.edges() {
        let [a, b] = edge.vertices.map(|v| mesh.vertices()[v]);
        for &t in &lobatto[1..k] {
            node_points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }

    let ng = (k - 1) * (k - 2) / 2;
    let n_div = dim(k as isize - 1) - 1;
    let nk2 = dim(k as isize - 2);
    let nk1 = dim(k as isize - 1);

    let mut cell_nodes = Vec::with_capacity(mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let verts = &mesh.cells()[c];
        let mut nodes = Vec::with_capacity(verts.len() * k);
        for (i, &e) in mesh.cell_edges(c).iter().enumerate() {
            nodes.push(verts[i]);
            let forward = mesh.edges()[e].vertices[0] == verts[i];
            for j in 0..k - 1 {
                let s = if forward { j } else { k - 2 - j };
                nodes.push(nv + e * (k - 1) + s);
            }
        }
        cell_nodes.push(nodes);
    }

    // displacement
    let mut next = 2 * n_nodes;
    let mut cell_v = Vec::with_capacity(mesh.num_cells());
    for nodes in &cell_nodes {
        let mut dofs: Vec<usize> = nodes.iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect();
        dofs.extend(next..next + ng + n_div);
        next += ng + n_div;
        cell_v.push(dofs);
    }
    let n_v = next;

    // pressure
    let mut node_q = vec![None; n_nodes];
    let mut n_q = 0;
    for c in mesh.cells_in(Subdomain::Poro) {
        for &n in &cell_nodes[c] {
            if node_q[n].is_none() {
                node_q[n] = Some(n_v + n_q);
                n_q += 1;
            }
        }
    }
    let mut cell_q = vec![Vec::new(); mesh.num_cells()];
    for c in mesh.cells_in(Subdomain::Poro) {
        let mut dofs: Vec<usize> = cell_nodes[c].iter().map(|&n| node_q[n].unwrap()).collect();
        dofs.extend(n_v + n_q..n_v + n_q + nk2);
        n_q += nk2;
        cell_q[c] = dofs;
    }

    // total pressure
    let z0 = n_v + n_q;
    let cell_z: Vec<Vec<usize>> = (0..mesh.num_cells())
        .map(|c| (z0 + c * nk1..z0 + (c + 1) * nk1).collect())
        .collect();
    let n_z = mesh.num_cells() * nk1;
    let total = n_v + n_q + n_z;

    // essential conditions
    let mut fixed: Vec<Option<ConstraintKind>> = vec![None; total];
    let mut point_of = vec![[0.0; 2]; total];
    for e in 0..mesh.num_edges() {
        let tag = mesh.edge_tags()[e];
        if !tag.is_boundary() {
            continue;
        }
        if tag == EdgeTag::Untagged {
            let [a, b] = mesh.edges()[e].vertices;
            return Err(VemError::Config(format!(
                "boundary edge {e} ({:?} - {:?}) has no label",
                mesh.vertices()[a],
                mesh.vertices()[b]
            )));
        }
        let (_, normal) = mesh.boundary_edge_normal(e);
        let cond = bc(tag, normal);
        let [a, b] = mesh.edges()[e].vertices;
        let nodes = std::iter::once(a)
            .chain((0..k - 1).map(|j| nv + e * (k - 1) + j))
            .chain(std::iter::once(b));
        for n in nodes {
            for comp in 0..2 {
                if cond.fix_u[comp] {
                    let d = DofMap::u_dof(n, comp);
                    fixed[d] = Some(ConstraintKind::Displacement { component: comp });
                    point_of[d] = node_points[n];
                }
            }
            if cond.fix_p {
                let d = node_q[n].ok_or_else(|| {
                    VemError::Config(format!("pressure condition on non-poroelastic edge {e} ({tag:?})"))
                })?;
                fixed[d] = Some(ConstraintKind::Pressure);
                point_of[d] = node_points[n];
            }
        }
    }
    let constraints: Vec<Constraint> = fixed
        .iter()
        .enumerate()
        .filter_map(|(dof, k)| k.map(|kind| Constraint { dof, point: point_of[dof], kind }))
        .collect();
    let mut reduced = vec![None; total];
    let mut free = Vec::with_capacity(total - constraints.len());
    for (i, f) in fixed.iter().enumerate() {
        if f.is_none() {
            reduced[i] = Some(free.len());
            free.push(i);
        }
    }

    let map = DofMap {
        k,
        node_points,
        cell_nodes,
        cell_v,
        cell_q,
        cell_z,
        n_v,
        n_q,
        n_z,
        constraints,
        reduced,
        free,
        node_q,
    };
    check_rigid_motions(&map)?;
    Ok(map)
}

/// The displacement constraints must rule out all rigid motions.
fn check_rigid_motions(map: &DofMap) -> Result<()> {
    let pts: Vec<([f64; 2], usize)> = map
        .constraints
        .iter()
        .filter_map(|c| match c.kind {
            ConstraintKind::Displacement { component } => Some((c.point, component)),
            ConstraintKind::Pressure => None,
        })
        .collect();
    let n = pts.len().max(1) as f64;
    let center = pts
        .iter()
        .fold([0.0; 2], |acc, (p, _)| [acc[0] + p[0] / n, acc[1] + p[1] / n]);
    let scale = pts
        .iter()
        .map(|(p, _)| (p[0] - center[0]).hypot(p[1] - center[1]))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    // Gram matrix of the rigid modes restricted to the constrained values
    let mut gram = nalgebra::Matrix3::<f64>::zeros();
    for (p, c) in &pts {
        let r = [(p[0] - center[0]) / scale, (p[1] - center[1]) / scale];
        let row = match c {
            0 => nalgebra::Vector3::new(1.0, 0.0, -r[1]),
            _ => nalgebra::Vector3::new(0.0, 1.0, r[0]),
        };
        gram += row * row.transpose();
    }
    let min = gram.symmetric_eigenvalues().min();
    if !(min > 1e-10 * n) {
        return Err(VemError::Config(
            "displacement conditions do not remove all rigid motions (pure traction problem)".into(),
        ));
    }
    Ok(())
}
