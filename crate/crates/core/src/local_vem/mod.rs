//! Local virtual element spaces and projections.
//!
//! Three spaces live on every cell `K`:
//!
//! - `V`: displacements. DOFs are the two components at every boundary node
//!   (vertices and interior Gauss-Lobatto points of each edge, interleaved),
//!   then `(1/|K|) int v . g` for an `L2(K)`-orthonormal basis `g / sqrt|K|`
//!   of `G_perp_(k-2)`, then `(h_K/|K|) int div v m` for the non-constant
//!   `m` of degree `<= k - 1`.
//! - `Q`: fluid pressure (enhanced space). DOFs are boundary node values then
//!   `(1/|K|) int q m` for `m` of degree `<= k - 2`.
//! - `Z`: total pressure, `P_(k-1)` with DOFs `(1/|K|) int z m`.
//!
//! All projectors are matrices from DOF coordinates to coefficients in the
//! scaled monomial basis of the cell; vector polynomials use the stacked
//! basis `[(m_0, 0), .., (m_n, 0), (0, m_0), .., (0, m_n)]`.

pub mod boundary;
mod interp;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use boundary::{BoundaryNodes, EdgeNodes};

use crate::error::{Result, VemError};
use crate::polykernel::{
    derivative_matrix, dim, exponents, gperp_basis, laplacian_matrix, mass_matrix, Polygon,
    ScaledMonomialBasis,
};

/// Condition numbers above this are reported.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    V,
    Q,
    Z,
}

/// Meaning of one local degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DofKind {
    /// Value at a vertex (`component` is 0 for scalars).
    Vertex { vertex: usize, component: usize },
    /// Value at interior Lobatto point `node` of local edge `edge`.
    EdgePoint { edge: usize, node: usize, component: usize },
    /// Moment against the `index`-th `G_perp_(k-2)` basis field.
    Gperp { index: usize },
    /// Divergence moment against the monomial with this exponent.
    Divergence { exponent: (usize, usize) },
    /// Moment against the monomial with this exponent.
    Moment { exponent: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofLayout {
    pub space: Space,
    pub k: usize,
    pub n_vertices: usize,
    pub kinds: Vec<DofKind>,
}

impl DofLayout {
    pub fn new(space: Space, k: usize, n_vertices: usize) -> Result<Self> {
        if k < 2 {
            return Err(VemError::UnsupportedOrder(k));
        }
        if n_vertices < 3 {
            return Err(VemError::DegeneratePolygon(format!("{n_vertices} vertices")));
        }
        let mut kinds = Vec::new();
        let comps = match space {
            Space::V => 2,
            Space::Q => 1,
            Space::Z => 0,
        };
        if comps > 0 {
            for i in 0..n_vertices {
                for c in 0..comps {
                    kinds.push(DofKind::Vertex { vertex: i, component: c });
                }
                for node in 0..k - 1 {
                    for c in 0..comps {
                        kinds.push(DofKind::EdgePoint { edge: i, node, component: c });
                    }
                }
            }
        }
        match space {
            Space::V => {
                kinds.extend((0..(k - 1) * (k - 2) / 2).map(|index| DofKind::Gperp { index }));
                kinds.extend(
                    exponents(k - 1)
                        .into_iter()
                        .skip(1)
                        .map(|exponent| DofKind::Divergence { exponent }),
                );
            }
            Space::Q => kinds.extend(
                exponents(k - 2)
                    .into_iter()
                    .map(|exponent| DofKind::Moment { exponent }),
            ),
            Space::Z => kinds.extend(
                exponents(k - 1)
                    .into_iter()
                    .map(|exponent| DofKind::Moment { exponent }),
            ),
        }
        Ok(Self { space, k, n_vertices, kinds })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Number of boundary (vertex and edge-point) DOFs.
    pub fn boundary_len(&self) -> usize {
        self.kinds
            .iter()
            .filter(|d| matches!(d, DofKind::Vertex { .. } | DofKind::EdgePoint { .. }))
            .count()
    }
}

pub fn dof_layout(space: Space, k: usize, n_vertices: usize) -> Result<DofLayout> {
    DofLayout::new(space, k, n_vertices)
}

/// Projections of the scalar pressure space.
#[derive(Debug, Clone)]
pub struct ScalarOperators {
    pub layout: DofLayout,
    /// `Pi^nabla_k`, `dim(k) x n_Q`.
    pub nabla: DMatrix<f64>,
    /// `Pi^0_k`, `dim(k) x n_Q`.
    pub l2: DMatrix<f64>,
    /// `Pi^0_(k-1) grad`, stacked components, `2 dim(k-1) x n_Q`.
    pub grad: DMatrix<f64>,
    /// DOFs of the monomials, `n_Q x dim(k)`.
    pub dofs_of_monomials: DMatrix<f64>,
    /// `int grad m_a . grad m_b` on `P_k`.
    pub stiffness: DMatrix<f64>,
}

/// All per-cell projection matrices.
#[derive(Debug, Clone)]
pub struct LocalElementOperators {
    pub k: usize,
    pub poly: Polygon,
    pub boundary: BoundaryNodes,
    pub basis: ScaledMonomialBasis,
    /// `int_K m_a` up to degree `2k + 2`.
    pub moments: Vec<f64>,
    /// `H_k = int m_a m_b` on `P_k`.
    pub mass: DMatrix<f64>,
    /// `H_(k-1)`.
    pub mass_low: DMatrix<f64>,

    pub v_layout: DofLayout,
    /// `G_perp_(k-2)` basis used by the DOFs (stacked, degree `k - 2`).
    pub gperp: DMatrix<f64>,
    /// Coefficients of `div v` in `P_(k-1)`.
    pub div: DMatrix<f64>,
    /// `int v . (m_b e_c)` for `m_b` of degree `<= k - 2`, stacked.
    pub low_moments: DMatrix<f64>,
    /// `Pi^eps_k`, `2 dim(k) x n_V`.
    pub eps: DMatrix<f64>,
    /// Vector `Pi^0_k`.
    pub l2: DMatrix<f64>,
    /// Componentwise `Pi^nabla_k`.
    pub nabla: DMatrix<f64>,
    /// DOFs of the stacked vector monomials, `n_V x 2 dim(k)`.
    pub dofs_of_monomials: DMatrix<f64>,
    /// `int eps(r_a) : eps(r_b)` on `[P_k]^2`.
    pub eps_gram: DMatrix<f64>,
    /// Right-hand side `int eps(v) : eps(r_a)` (before kernel fixing).
    pub eps_rhs: DMatrix<f64>,
    /// Vertex-average pairing of rigid motions with the basis.
    pub rigid_poly: DMatrix<f64>,
    /// Vertex-average pairing of rigid motions with DOF vectors.
    pub rigid_dofs: DMatrix<f64>,

    pub q: ScalarOperators,

    pub z_layout: DofLayout,
    /// `P_(k-1)` coefficients from `Z` DOFs: `|K| H_(k-1)^-1`.
    pub z_coeffs: DMatrix<f64>,
}

impl LocalElementOperators {
    pub fn new(vertices: &[[f64; 2]], k: usize) -> Result<Self> {
        if k < 2 {
            return Err(VemError::UnsupportedOrder(k));
        }
        let poly = Polygon::new(vertices.to_vec())?;
        let basis = poly.basis(k);
        let moments = poly.moments(2 * k + 2);
        let mass = mass_matrix(&moments, k as isize, k as isize);
        let mass_low = mass_matrix(&moments, k as isize - 1, k as isize - 1);
        let boundary = BoundaryNodes::new(&poly, k)?;
        let q = scalar_operators(&poly, &basis, &boundary, &moments, &mass, &mass_low, k)?;
        let z_layout = DofLayout::new(Space::Z, k, poly.vertices.len())?;
        let z_coeffs = invert(&mass_low, "Z mass")? * poly.area;
        let mut ops = Self {
            k,
            v_layout: DofLayout::new(Space::V, k, poly.vertices.len())?,
            gperp: gperp_basis(&poly, k - 2)? * poly.area.sqrt(),
            div: DMatrix::zeros(0, 0),
            low_moments: DMatrix::zeros(0, 0),
            eps: DMatrix::zeros(0, 0),
            l2: DMatrix::zeros(0, 0),
            nabla: DMatrix::zeros(0, 0),
            dofs_of_monomials: DMatrix::zeros(0, 0),
            eps_gram: DMatrix::zeros(0, 0),
            eps_rhs: DMatrix::zeros(0, 0),
            rigid_poly: DMatrix::zeros(0, 0),
            rigid_dofs: DMatrix::zeros(0, 0),
            poly,
            boundary,
            basis,
            moments,
            mass,
            mass_low,
            q,
            z_layout,
            z_coeffs,
        };
        ops.build_vector()?;
        Ok(ops)
    }

    pub fn area(&self) -> f64 {
        self.poly.area
    }

    pub fn diameter(&self) -> f64 {
        self.poly.diameter
    }

    pub fn n_v(&self) -> usize {
        self.v_layout.len()
    }

    pub fn n_q(&self) -> usize {
        self.q.layout.len()
    }

    pub fn n_z(&self) -> usize {
        self.z_layout.len()
    }

    /// Number of scalar monomials of degree `<= k`.
    pub fn n_poly(&self) -> usize {
        dim(self.k as isize)
    }

    /// Block-diagonal vector mass matrix on `[P_k]^2`.
    pub fn vector_mass(&self) -> DMatrix<f64> {
        block_diag2(&self.mass)
    }

    fn n_gperp(&self) -> usize {
        (self.k - 1) * (self.k - 2) / 2
    }

    fn gperp_offset(&self) -> usize {
        2 * self.boundary.len()
    }

    fn div_offset(&self) -> usize {
        self.gperp_offset() + self.n_gperp()
    }

    fn build_vector(&mut self) -> Result<()> {
        let k = self.k;
        let h = self.poly.diameter;
        let area = self.poly.area;
        let nv = self.n_v();
        let nk = dim(k as isize);
        let nk1 = dim(k as isize - 1);
        let nk2 = dim(k as isize - 2);
        let ng = self.n_gperp();
        let nb = self.boundary.len();
        let center = self.poly.centroid;
        let b_low = ScaledMonomialBasis::new(k - 1, center, h);
        let b_high = ScaledMonomialBasis::new(k + 1, center, h);

        // divergence: int div v m_b, then coefficients in P_(k-1)
        let mut mdiv = DMatrix::zeros(nk1, nv);
        for e in &self.boundary.edges {
            for (a, &l) in e.nodes.iter().enumerate() {
                for c in 0..2 {
                    mdiv[(0, 2 * l + c)] += e.weights[a] * e.normal[c];
                }
            }
        }
        for b in 1..nk1 {
            mdiv[(b, self.div_offset() + b - 1)] = area / h;
        }
        self.div = solve(&self.mass_low, &mdiv, "divergence mass")?;

        // moments against T = {grad m_a : 1 <= |a| <= k+1} and G_perp_(k-2)
        let nt_grad = dim(k as isize + 1) - 1;
        let nt = nt_grad + ng;
        let mut mt = DMatrix::zeros(nt, nv);
        let cross = mass_matrix(&self.moments, k as isize + 1, k as isize - 1);
        let interior = -(cross * &self.div);
        mt.view_mut((0, 0), (nt_grad, nv))
            .copy_from(&interior.rows(1, nt_grad));
        let (gt, gw, lag) = self.boundary.gauss_interpolation(2 * k + 1);
        for (ei, e) in self.boundary.edges.iter().enumerate() {
            let (pa, pb) = self.poly.edge(ei);
            for g in 0..gt.len() {
                let x = [pa[0] + gt[g] * (pb[0] - pa[0]), pa[1] + gt[g] * (pb[1] - pa[1])];
                let m = b_high.eval(x);
                let w = gw[g] * e.length;
                for (a, &l) in e.nodes.iter().enumerate() {
                    let wl = w * lag[(g, a)];
                    for c in 0..2 {
                        let f = wl * e.normal[c];
                        for t in 0..nt_grad {
                            mt[(t, 2 * l + c)] += f * m[t + 1];
                        }
                    }
                }
            }
        }
        for j in 0..ng {
            mt[(nt_grad + j, self.gperp_offset() + j)] = area;
        }

        // T in the stacked basis of [P_k]^2
        let mut y = DMatrix::zeros(2 * nk, nt);
        let dx = derivative_matrix(k + 1, 0, h);
        let dy = derivative_matrix(k + 1, 1, h);
        for t in 0..nt_grad {
            for i in 0..nk {
                y[(i, t)] = dx[(i, t + 1)];
                y[(nk + i, t)] = dy[(i, t + 1)];
            }
        }
        for j in 0..ng {
            for i in 0..nk2 {
                y[(i, nt_grad + j)] = self.gperp[(i, j)];
                y[(nk + i, nt_grad + j)] = self.gperp[(nk2 + i, j)];
            }
        }
        let mv = self.vector_mass();
        let s = complement(&mv, &y)?;
        let nw = s.ncols();
        if nt + nw != 2 * nk {
            return Err(VemError::Conditioning(format!(
                "moment space has dimension {} instead of {}",
                nt + nw,
                2 * nk
            )));
        }
        let mut sys = DMatrix::zeros(2 * nk, 2 * nk);
        sys.view_mut((0, 0), (nt, 2 * nk))
            .copy_from(&(y.transpose() * &mv));
        sys.view_mut((nt, 0), (nw, 2 * nk))
            .copy_from(&(s.transpose() * &mv));
        let sys_inv = invert(&sys, "vector L2 moments")?;

        // moments against [P_(k-2)]^2 lie in span T
        let mut rhs = DMatrix::zeros(2 * nk, nv);
        rhs.view_mut((0, 0), (nt, nv)).copy_from(&mt);
        let partial = &mv * (&sys_inv * &rhs);
        let mut low = DMatrix::zeros(2 * nk2, nv);
        for c in 0..2 {
            low.view_mut((c * nk2, 0), (nk2, nv))
                .copy_from(&partial.rows(c * nk, nk2));
        }
        self.low_moments = low;

        // energy projection
        let (exx, eyy, exy) = strain_coefficients(k, h);
        let gram = exx.transpose() * &self.mass_low * &exx
            + eyy.transpose() * &self.mass_low * &eyy
            + exy.transpose() * &self.mass_low * &exy * 2.0;
        let dx1 = derivative_matrix(k - 1, 0, h);
        let dy1 = derivative_matrix(k - 1, 1, h);
        let div_eps_x = &dx1 * &exx + &dy1 * &exy;
        let div_eps_y = &dx1 * &exy + &dy1 * &eyy;
        let low_x = self.low_moments.rows(0, nk2);
        let low_y = self.low_moments.rows(nk2, nk2);
        let mut b_eps = -(div_eps_x.transpose() * low_x + div_eps_y.transpose() * low_y);
        for e in &self.boundary.edges {
            let n = e.normal;
            for (a, &l) in e.nodes.iter().enumerate() {
                let m = b_low.eval(self.boundary.points[l]);
                let w = e.weights[a];
                for r in 0..2 * nk {
                    let (sxx, syy, sxy) = (
                        dot(exx.column(r).as_slice(), &m),
                        dot(eyy.column(r).as_slice(), &m),
                        dot(exy.column(r).as_slice(), &m),
                    );
                    b_eps[(r, 2 * l)] += w * (sxx * n[0] + sxy * n[1]);
                    b_eps[(r, 2 * l + 1)] += w * (sxy * n[0] + syy * n[1]);
                }
            }
        }
        let nverts = self.poly.vertices.len();
        let mut rigid_poly = DMatrix::zeros(3, 2 * nk);
        let mut rigid_dofs = DMatrix::zeros(3, nv);
        for i in 0..nverts {
            let p = self.poly.vertices[i];
            let m = self.basis.eval(p);
            let s = self.basis.scaled(p);
            let rig = [[1.0, 0.0], [0.0, 1.0], [-s[1], s[0]]];
            let l = self.boundary.vertex_node(i);
            for (r, rv) in rig.iter().enumerate() {
                for c in 0..2 {
                    rigid_dofs[(r, 2 * l + c)] += rv[c] / nverts as f64;
                    for a in 0..nk {
                        rigid_poly[(r, c * nk + a)] += m[a] * rv[c] / nverts as f64;
                    }
                }
            }
        }
        let lhs = &gram + rigid_poly.transpose() * &rigid_poly;
        let rhs_eps = &b_eps + rigid_poly.transpose() * &rigid_dofs;
        self.eps = solve(&lhs, &rhs_eps, "energy projection")?;
        self.eps_gram = gram;
        self.eps_rhs = b_eps;
        self.rigid_poly = rigid_poly;
        self.rigid_dofs = rigid_dofs;

        // full L2 projection with complement moments taken from Pi^eps
        rhs.view_mut((nt, 0), (nw, nv))
            .copy_from(&(s.transpose() * &mv * &self.eps));
        self.l2 = &sys_inv * &rhs;

        // componentwise energy projection
        let stiff = &self.q.stiffness;
        let mut g = stiff.clone();
        for b in 0..nk {
            g[(0, b)] = self.moments[b] / area;
        }
        let lap = laplacian_matrix(k, h);
        let mut nabla = DMatrix::zeros(2 * nk, nv);
        for c in 0..2 {
            let lowc = self.low_moments.rows(c * nk2, nk2);
            let mut bc = -(lap.transpose() * lowc);
            for e in &self.boundary.edges {
                for (a, &l) in e.nodes.iter().enumerate() {
                    let grads = self.basis.eval_grad(self.boundary.points[l]);
                    for al in 0..nk {
                        let dn = grads[al][0] * e.normal[0] + grads[al][1] * e.normal[1];
                        bc[(al, 2 * l + c)] += e.weights[a] * dn;
                    }
                }
            }
            for j in 0..nv {
                bc[(0, j)] = self.low_moments[(c * nk2, j)] / area;
            }
            nabla
                .view_mut((c * nk, 0), (nk, nv))
                .copy_from(&solve(&g, &bc, "vector gradient Gram")?);
        }
        self.nabla = nabla;

        // DOFs of vector monomials
        let mut dm = DMatrix::zeros(nv, 2 * nk);
        for l in 0..nb {
            let m = self.basis.eval(self.boundary.points[l]);
            for c in 0..2 {
                for a in 0..nk {
                    dm[(2 * l + c, c * nk + a)] = m[a];
                }
            }
        }
        let h2k = mass_matrix(&self.moments, k as isize - 2, k as isize);
        for j in 0..ng {
            for c in 0..2 {
                for a in 0..nk {
                    let mut v = 0.0;
                    for b in 0..nk2 {
                        v += self.gperp[(c * nk2 + b, j)] * h2k[(b, a)];
                    }
                    dm[(self.gperp_offset() + j, c * nk + a)] = v / area;
                }
            }
        }
        let dk = [derivative_matrix(k, 0, h), derivative_matrix(k, 1, h)];
        for c in 0..2 {
            let divm = &self.mass_low * &dk[c];
            for b in 1..nk1 {
                for a in 0..nk {
                    dm[(self.div_offset() + b - 1, c * nk + a)] = h / area * divm[(b, a)];
                }
            }
        }
        self.dofs_of_monomials = dm;
        Ok(())
    }

    fn check_len(&self, space: Space, n: usize) -> Result<()> {
        let want = match space {
            Space::V => self.n_v(),
            Space::Q => self.n_q(),
            Space::Z => self.n_z(),
        };
        if n != want {
            return Err(VemError::InvalidArgument(format!(
                "{space:?} DOF vector has length {n}, expected {want}"
            )));
        }
        Ok(())
    }

    /// Coefficients of `Pi^nabla_k q`.
    pub fn project_nabla_scalar(&self, dofs: &[f64]) -> Result<DVector<f64>> {
        self.check_len(Space::Q, dofs.len())?;
        Ok(&self.q.nabla * DVector::from_column_slice(dofs))
    }

    /// Stacked coefficients of `Pi^eps_k v`.
    pub fn project_eps_vector(&self, dofs: &[f64]) -> Result<DVector<f64>> {
        self.check_len(Space::V, dofs.len())?;
        Ok(&self.eps * DVector::from_column_slice(dofs))
    }

    /// `L2` projection onto `P_k` (`Q`), `[P_k]^2` (`V`) or the identity map
    /// to coefficients (`Z`).
    pub fn project_l2(&self, space: Space, dofs: &[f64]) -> Result<DVector<f64>> {
        self.check_len(space, dofs.len())?;
        let x = DVector::from_column_slice(dofs);
        Ok(match space {
            Space::V => &self.l2 * x,
            Space::Q => &self.q.l2 * x,
            Space::Z => &self.z_coeffs * x,
        })
    }

    /// Stacked coefficients of `Pi^0_(k-1) grad q`.
    pub fn project_grad_l2(&self, dofs: &[f64]) -> Result<DVector<f64>> {
        self.check_len(Space::Q, dofs.len())?;
        Ok(&self.q.grad * DVector::from_column_slice(dofs))
    }

    /// Coefficients of `div v` in `P_(k-1)`.
    pub fn divergence(&self, dofs: &[f64]) -> Result<DVector<f64>> {
        self.check_len(Space::V, dofs.len())?;
        Ok(&self.div * DVector::from_column_slice(dofs))
    }

    /// Evaluate a stacked vector polynomial.
    pub fn eval_vector(&self, coeffs: &[f64], p: [f64; 2]) -> [f64; 2] {
        let nk = self.n_poly();
        let m = self.basis.eval(p);
        [dot(&coeffs[..nk], &m), dot(&coeffs[nk..2 * nk], &m)]
    }

    /// Gradient of a stacked vector polynomial, `[[dux/dx, dux/dy], [duy/dx, duy/dy]]`.
    pub fn eval_vector_grad(&self, coeffs: &[f64], p: [f64; 2]) -> [[f64; 2]; 2] {
        let nk = self.n_poly();
        let g = self.basis.eval_grad(p);
        let mut out = [[0.0; 2]; 2];
        for c in 0..2 {
            for (a, ga) in g.iter().enumerate() {
                out[c][0] += coeffs[c * nk + a] * ga[0];
                out[c][1] += coeffs[c * nk + a] * ga[1];
            }
        }
        out
    }
}

fn scalar_operators(
    poly: &Polygon,
    basis: &ScaledMonomialBasis,
    boundary: &BoundaryNodes,
    moments: &[f64],
    mass: &DMatrix<f64>,
    mass_low: &DMatrix<f64>,
    k: usize,
) -> Result<ScalarOperators> {
    let layout = DofLayout::new(Space::Q, k, poly.vertices.len())?;
    let nq = layout.len();
    let nb = boundary.len();
    let h = poly.diameter;
    let area = poly.area;
    let nk = dim(k as isize);
    let nk1 = dim(k as isize - 1);
    let nk2 = dim(k as isize - 2);
    let dk = [derivative_matrix(k, 0, h), derivative_matrix(k, 1, h)];
    let stiffness = dk[0].transpose() * mass_low * &dk[0] + dk[1].transpose() * mass_low * &dk[1];

    let mut g = stiffness.clone();
    for b in 0..nk {
        g[(0, b)] = moments[b] / area;
    }
    let lap = laplacian_matrix(k, h);
    let mut bm = DMatrix::zeros(nk, nq);
    for a in 0..nk {
        for b in 0..nk2 {
            bm[(a, nb + b)] = -lap[(b, a)] * area;
        }
    }
    for e in &boundary.edges {
        for (i, &l) in e.nodes.iter().enumerate() {
            let grads = basis.eval_grad(boundary.points[l]);
            for a in 0..nk {
                bm[(a, l)] += e.weights[i] * (grads[a][0] * e.normal[0] + grads[a][1] * e.normal[1]);
            }
        }
    }
    bm.row_mut(0).fill(0.0);
    bm[(0, nb)] = 1.0;
    let nabla = solve(&g, &bm, "scalar gradient Gram")?;

    // moments of degree k-1 and k come from the enhancement
    let mut cm = mass * &nabla;
    for a in 0..nk2 {
        cm.row_mut(a).fill(0.0);
        cm[(a, nb + a)] = area;
    }
    let l2 = solve(mass, &cm, "scalar mass")?;

    let b_low = ScaledMonomialBasis::new(k - 1, poly.centroid, h);
    let mut grad = DMatrix::zeros(2 * nk1, nq);
    for d in 0..2 {
        let dd = derivative_matrix(k - 1, d, h);
        let mut r = DMatrix::zeros(nk1, nq);
        for b in 0..nk1 {
            for gi in 0..nk2 {
                r[(b, nb + gi)] -= dd[(gi, b)] * area;
            }
        }
        for e in &boundary.edges {
            for (i, &l) in e.nodes.iter().enumerate() {
                let m = b_low.eval(boundary.points[l]);
                for b in 0..nk1 {
                    r[(b, l)] += e.weights[i] * m[b] * e.normal[d];
                }
            }
        }
        grad.view_mut((d * nk1, 0), (nk1, nq))
            .copy_from(&solve(mass_low, &r, "gradient projection mass")?);
    }

    let mut dm = DMatrix::zeros(nq, nk);
    for l in 0..nb {
        let m = basis.eval(boundary.points[l]);
        for a in 0..nk {
            dm[(l, a)] = m[a];
        }
    }
    let h2k = mass_matrix(moments, k as isize - 2, k as isize);
    for b in 0..nk2 {
        for a in 0..nk {
            dm[(nb + b, a)] = h2k[(b, a)] / area;
        }
    }
    Ok(ScalarOperators {
        layout,
        nabla,
        l2,
        grad,
        dofs_of_monomials: dm,
        stiffness,
    })
}

/// Strain components of every stacked basis field as `P_(k-1)` coefficients:
/// `(eps_xx, eps_yy, eps_xy)`, each `dim(k-1) x 2 dim(k)`.
pub fn strain_coefficients(k: usize, h: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let nk = dim(k as isize);
    let nk1 = dim(k as isize - 1);
    let dx = derivative_matrix(k, 0, h);
    let dy = derivative_matrix(k, 1, h);
    let mut exx = DMatrix::zeros(nk1, 2 * nk);
    let mut eyy = DMatrix::zeros(nk1, 2 * nk);
    let mut exy = DMatrix::zeros(nk1, 2 * nk);
    exx.view_mut((0, 0), (nk1, nk)).copy_from(&dx);
    eyy.view_mut((0, nk), (nk1, nk)).copy_from(&dy);
    exy.view_mut((0, 0), (nk1, nk)).copy_from(&(&dy * 0.5));
    exy.view_mut((0, nk), (nk1, nk)).copy_from(&(&dx * 0.5));
    (exx, eyy, exy)
}

pub(crate) fn block_diag2(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out.view_mut((n, n), (n, n)).copy_from(m);
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `mass`-orthogonal complement of the column span of `y`.
fn complement(mass: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = mass.nrows();
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| VemError::Conditioning("vector mass matrix not positive definite".into()))?;
    let lt = chol.l().transpose();
    let yh = &lt * y;
    let gram_inv = invert(&(yh.transpose() * &yh), "moment basis Gram")?;
    let proj = DMatrix::identity(n, n) - &yh * gram_inv * yh.transpose();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let mut out = DMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let v = eig.eigenvectors.column(i).into_owned();
        let coeffs = lt
            .solve_upper_triangular(&v)
            .ok_or_else(|| VemError::Conditioning("singular mass factor".into()))?;
        out.set_column(c, &coeffs);
    }
    Ok(out)
}

/// Inverse via full-pivot LU with a 1-norm condition check.
pub(crate) fn invert(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let inv = a
        .clone()
        .full_piv_lu()
        .try_inverse()
        .ok_or_else(|| VemError::Conditioning(format!("{what} is singular")))?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > 1e16 {
        return Err(VemError::Conditioning(format!("{what}: condition number {cond:.3e}")));
    }
    if cond > CONDITION_WARN {
        log::warn!("{what}: condition number {cond:.3e}");
    }
    Ok(inv)
}

pub(crate) fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(invert(a, what)? * b)
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
