//! Scatter of local forms and loads into global sparse blocks.

use rayon::prelude::*;

use super::dofmap::DofMap;
use super::solver::SparseMatrix;
use crate::error::Result;
use crate::forms::{LoadOperator, LoadProjection, LocalForms, MaterialParams, Stabilization};
use crate::local_vem::LocalElementOperators;
use crate::manufactured::ProblemData;
use crate::mesh::{EdgeTag, PolygonalMesh, Subdomain};
use crate::polykernel::{gauss_legendre, gauss_lobatto};

type Trips = Vec<(usize, usize, f64)>;

/// Mean stabilisation weights over the cells of each subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct SigmaSummary {
    /// `sigma1` on poroelastic and elastic cells.
    pub sigma1: [f64; 2],
    pub sigma2: f64,
    pub sigma0: f64,
}

/// Global blocks of the coupled system, each stored as a square matrix in
/// the full `[u | p | psi]` numbering:
///
/// * `a1` on `(u, u)`, `b1` on `(psi, u)`, `a3` on `(psi, psi)`,
/// * `a2` and `a2t` on `(p, p)`, `b2` on `(p, psi)`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub dofs: DofMap,
    pub params: MaterialParams,
    pub stab: Stabilization,
    pub a1: SparseMatrix,
    pub b1: SparseMatrix,
    pub a3: SparseMatrix,
    pub a2: SparseMatrix,
    pub a2t: SparseMatrix,
    pub b2: SparseMatrix,
    pub sigma: SigmaSummary,
    /// Test functions of the body-force functional.
    pub load_projection: LoadProjection,
    load_ops: Vec<LoadOperator>,
}

struct CellOutput {
    a1: Trips,
    b1: Trips,
    a3: Trips,
    a2: Trips,
    a2t: Trips,
    b2: Trips,
    load: LoadOperator,
    sigma: [f64; 3],
}

fn scatter(out: &mut Trips, m: &nalgebra::DMatrix<f64>, rows: &[usize], cols: &[usize]) {
    for (j, &gj) in cols.iter().enumerate() {
        for (i, &gi) in rows.iter().enumerate() {
            let v = m[(i, j)];
            if v != 0.0 {
                out.push((gi, gj, v));
            }
        }
    }
}

impl BlockSystem {
    /// Build local operators and forms of every cell (in parallel) and sum
    /// them into the global blocks.
    pub fn assemble(
        mesh: &PolygonalMesh,
        dofs: DofMap,
        params: &MaterialParams,
        stab: Stabilization,
    ) -> Result<Self> {
        params.validate()?;
        let k = dofs.k;
        let cells: Vec<Result<CellOutput>> = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| {
                let sub = mesh.cell_tags()[c];
                let ops = LocalElementOperators::new(&mesh.cell_points(c), k)?;
                let f = LocalForms::build(&ops, c, sub, params, stab)?;
                let (v, q, z) = (&dofs.cell_v[c], &dofs.cell_q[c], &dofs.cell_z[c]);
                let mut o = CellOutput {
                    a1: Vec::new(),
                    b1: Vec::new(),
                    a3: Vec::new(),
                    a2: Vec::new(),
                    a2t: Vec::new(),
                    b2: Vec::new(),
                    load: LoadOperator::new(&ops, sub),
                    sigma: f.sigma,
                };
                scatter(&mut o.a1, &f.a1, v, v);
                scatter(&mut o.b1, &f.b1, z, v);
                scatter(&mut o.a3, &f.a3, z, z);
                if let (Some(a2), Some(a2t), Some(b2)) = (&f.a2, &f.a2t, &f.b2) {
                    scatter(&mut o.a2, a2, q, q);
                    scatter(&mut o.a2t, a2t, q, q);
                    scatter(&mut o.b2, b2, q, z);
                }
                Ok(o)
            })
            .collect();
        let n = dofs.total();
        let mut blocks: [Trips; 6] = Default::default();
        let mut load_ops = Vec::with_capacity(cells.len());
        let mut sig = [0.0; 4];
        let mut counts = [0usize; 2];
        for (c, r) in cells.into_iter().enumerate() {
            let o = r?;
            let s = usize::from(mesh.cell_tags()[c] == Subdomain::Elastic);
            sig[s] += o.sigma[0];
            counts[s] += 1;
            if s == 0 {
                sig[2] += o.sigma[1];
                sig[3] += o.sigma[2];
            }
            for (dst, src) in blocks.iter_mut().zip([o.a1, o.b1, o.a3, o.a2, o.a2t, o.b2]) {
                dst.extend(src);
            }
            load_ops.push(o.load);
        }
        let mean = |x: f64, n: usize| if n > 0 { x / n as f64 } else { 0.0 };
        let sigma = SigmaSummary {
            sigma1: [mean(sig[0], counts[0]), mean(sig[1], counts[1])],
            sigma2: mean(sig[2], counts[0]),
            sigma0: mean(sig[3], counts[0]),
        };
        let mut mats = Vec::with_capacity(6);
        for b in blocks {
            mats.push(SparseMatrix::from_triplets(n, n, &b)?);
        }
        let mut it = mats.into_iter();
        let mut next = || it.next().expect("six blocks");
        Ok(Self {
            dofs,
            params: *params,
            stab,
            a1: next(),
            b1: next(),
            a3: next(),
            a2: next(),
            a2t: next(),
            b2: next(),
            sigma,
            load_projection: LoadProjection::default(),
            load_ops,
        })
    }

    /// Monolithic matrix in the full numbering for the pressure-row weights
    /// `storage` (multiplying the mass and coupling terms) and `diffusion`
    /// (multiplying the Darcy term):
    ///
    /// ```text
    /// [ A1   0                      B1^T ] [U]
    /// [ 0    s A2t + tau A2    -s B2      ] [P]
    /// [ B1   B2^T                   -A3  ] [Z]
    /// ```
    pub fn full_matrix(&self, storage: f64, diffusion: f64) -> Result<SparseMatrix> {
        let n = self.dofs.total();
        let mut t: Trips = Vec::with_capacity(
            self.a1.nnz() + 2 * self.b1.nnz() + self.a3.nnz() + 2 * self.a2.nnz() + 2 * self.b2.nnz(),
        );
        t.extend(self.a1.entries());
        for (i, j, v) in self.b1.entries() {
            t.push((i, j, v));
            t.push((j, i, v));
        }
        t.extend(self.a3.entries().map(|(i, j, v)| (i, j, -v)));
        t.extend(self.a2.entries().map(|(i, j, v)| (i, j, diffusion * v)));
        if storage != 0.0 {
            t.extend(self.a2t.entries().map(|(i, j, v)| (i, j, storage * v)));
        }
        for (i, j, v) in self.b2.entries() {
            t.push((j, i, v));
            if storage != 0.0 {
                t.push((i, j, -storage * v));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    /// Restriction of a full matrix to the unconstrained unknowns.
    pub fn reduce(&self, full: &SparseMatrix) -> Result<SparseMatrix> {
        let r = &self.dofs.reduced;
        let t: Trips = full
            .entries()
            .filter_map(|(i, j, v)| Some((r[i]?, r[j]?, v)))
            .collect();
        SparseMatrix::from_triplets(self.dofs.n_free(), self.dofs.n_free(), &t)
    }

    /// Restriction of a full matrix to the rows and columns `keep` (full
    /// indices, in order). With `negate_pressure` the pressure rows change
    /// sign, which makes the time-step matrix symmetric.
    pub fn restrict(&self, full: &SparseMatrix, keep: &[usize], negate_pressure: bool) -> Result<SparseMatrix> {
        let mut local = vec![None; full.n];
        for (l, &i) in keep.iter().enumerate() {
            local[i] = Some(l);
        }
        let (q0, z0) = (self.dofs.q_offset(), self.dofs.z_offset());
        let t: Trips = full
            .entries()
            .filter_map(|(i, j, v)| {
                let sign = if negate_pressure && (q0..z0).contains(&i) { -1.0 } else { 1.0 };
                Some((local[i]?, local[j]?, sign * v))
            })
            .collect();
        SparseMatrix::from_triplets(keep.len(), keep.len(), &t)
    }

    /// Full vector holding the essential data at time `t` (zero elsewhere).
    pub fn dirichlet_vector(&self, problem: &dyn ProblemData, t: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dofs.total()];
        for c in &self.dofs.constraints {
            x[c.dof] = match c.kind {
                super::ConstraintKind::Displacement { component } => problem.displacement(c.point, t)[component],
                super::ConstraintKind::Pressure => problem.pressure(c.point, t),
            };
        }
        x
    }

    /// Load vector at time `t` in the full numbering: body forces,
    /// tractions and the interface traction jump on the `u` rows, fluid
    /// source and boundary or interface fluxes on the `p` rows.
    pub fn loads(&self, mesh: &PolygonalMesh, problem: &dyn ProblemData, t: f64) -> Vec<f64> {
        let dofs = &self.dofs;
        let mut rhs = vec![0.0; dofs.total()];
        let cell_loads: Vec<_> = self
            .load_ops
            .par_iter()
            .map(|op| op.apply(self.load_projection, |x| problem.body_force(x, t, op.sub), |x| problem.source(x, t)))
            .collect();
        for (c, (f, g)) in cell_loads.into_iter().enumerate() {
            for (l, &d) in dofs.cell_v[c].iter().enumerate() {
                rhs[d] += f[l];
            }
            for (l, &d) in dofs.cell_q[c].iter().enumerate() {
                rhs[d] += g[l];
            }
        }
        self.edge_loads(mesh, problem, t, &mut rhs);
        rhs
    }

    fn edge_loads(&self, mesh: &PolygonalMesh, problem: &dyn ProblemData, t: f64, rhs: &mut [f64]) {
        let k = self.dofs.k;
        let rule = gauss_legendre(k + 2);
        let lob = &gauss_lobatto(k + 1).nodes;
        let shape: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&s| crate::local_vem::boundary::lagrange_values(lob, s))
            .collect();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let tag = mesh.edge_tags()[e];
            if tag == EdgeTag::Interior {
                continue;
            }
            let [a, b] = edge.vertices.map(|v| mesh.vertices()[v]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len = d[0].hypot(d[1]);
            // normal to the right of vertices[0] -> vertices[1]: outward for cells[0]
            let right = [d[1] / len, -d[0] / len];
            let nodes = self.dofs.edge_nodes(mesh, e);
            let point = |s: f64| [a[0] + s * d[0], a[1] + s * d[1]];
            if tag == EdgeTag::Interface {
                let [c0, c1] = edge.cells.map(|c| c.expect("interface edge has two cells"));
                let sign = if mesh.cell_tags()[c0] == Subdomain::Poro { 1.0 } else { -1.0 };
                debug_assert_ne!(mesh.cell_tags()[c0], mesh.cell_tags()[c1]);
                let n = [sign * right[0], sign * right[1]];
                for (g, (&s, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                    let x = point(s);
                    let jump = problem.traction_jump(x, t, n);
                    let flux = problem.flux(x, t, n);
                    for (a, &node) in nodes.iter().enumerate() {
                        let phi = w * len * shape[g][a];
                        rhs[DofMap::u_dof(node, 0)] += phi * jump[0];
                        rhs[DofMap::u_dof(node, 1)] += phi * jump[1];
                        if let Some(q) = self.dofs.node_q[node] {
                            rhs[q] += phi * flux;
                        }
                    }
                }
                continue;
            }
            let owner = edge.owner();
            let sub = mesh.cell_tags()[owner];
            let n = if edge.cells[0].is_some() { right } else { [-right[0], -right[1]] };
            let bc = problem.edge_bc(tag, n);
            for (g, (&s, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let x = point(s);
                let tr = if bc.fix_u == [true; 2] { [0.0; 2] } else { problem.traction(x, t, n, sub) };
                let flux = if sub == Subdomain::Poro && !bc.fix_p { problem.flux(x, t, n) } else { 0.0 };
                for (a, &node) in nodes.iter().enumerate() {
                    let phi = w * len * shape[g][a];
                    for c in 0..2 {
                        if !bc.fix_u[c] {
                            rhs[DofMap::u_dof(node, c)] += phi * tr[c];
                        }
                    }
                    if let Some(q) = self.dofs.node_q[node] {
                        rhs[q] += phi * flux;
                    }
                }
            }
        }
    }

    /// Number of cells.
    pub fn num_cells(&self) -> usize {
        self.load_ops.len()
    }
}

/// `x^T A y`.
pub fn quad_form(a: &SparseMatrix, x: &[f64], y: &[f64]) -> f64 {
    a.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
}
