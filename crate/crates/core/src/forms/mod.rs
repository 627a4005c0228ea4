//! Local matrices of the discrete bilinear forms, stabilisers and loads.
//!
//! Every matrix is expressed in local DOF coordinates of the
//! [`LocalElementOperators`](crate::local_vem::LocalElementOperators) it is
//! built from. Consistency parts use the projections; stabilisers act on
//! `(I - D Pi)` where `D` maps polynomial coefficients to DOFs.

mod params;
#[cfg(test)]
mod tests;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use params::{Lame, MaterialParams};

use crate::error::{Result, VemError};
use crate::local_vem::LocalElementOperators;
use crate::mesh::Subdomain;
use crate::polykernel::{dim, mass_matrix, polygon_quadrature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilizerKind {
    /// Euclidean product of DOF vectors scaled by the consistency magnitude.
    #[default]
    DofiDofi,
    /// `h_K sum_e int_e (d_t u) . (d_t v)` on the boundary traces.
    TangentialEdge,
}

impl StabilizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DofiDofi => "dofi-dofi",
            Self::TangentialEdge => "tangential-edge",
        }
    }
}

impl fmt::Display for StabilizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StabilizerKind {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dofi-dofi" | "dofi" => Ok(Self::DofiDofi),
            "tangential-edge" | "edge" => Ok(Self::TangentialEdge),
            _ => Err(VemError::Unknown { kind: "stabilizer", name: s.into() }),
        }
    }
}

/// Which forms the tangential-edge stabiliser replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeStabScope {
    /// Only the displacement form; pressure forms keep dofi-dofi.
    #[default]
    Displacement,
    /// Displacement and both pressure forms.
    All,
}

impl FromStr for EdgeStabScope {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(Self::Displacement),
            "all" => Ok(Self::All),
            _ => Err(VemError::Unknown { kind: "edge stabilizer scope", name: s.into() }),
        }
    }
}

/// Stabiliser choice for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Stabilization {
    pub kind: StabilizerKind,
    pub scope: EdgeStabScope,
}

impl Stabilization {
    fn pressure_uses_edge(self) -> bool {
        self.kind == StabilizerKind::TangentialEdge && self.scope == EdgeStabScope::All
    }
}

/// All local matrices of one cell. Pressure forms are present on poroelastic
/// cells only.
#[derive(Debug, Clone)]
pub struct LocalForms {
    pub stab: Stabilization,
    pub a1: DMatrix<f64>,
    /// `b1(v, z) = -int z div v`, `n_Z x n_V`.
    pub b1: DMatrix<f64>,
    pub a3: DMatrix<f64>,
    pub a2: Option<DMatrix<f64>>,
    pub a2t: Option<DMatrix<f64>>,
    /// `(alpha/lambda^P) int Pi^0 p z`, `n_Q x n_Z`.
    pub b2: Option<DMatrix<f64>>,
    /// Stabilisation weights `(sigma1, sigma2, sigma0)` actually used.
    pub sigma: [f64; 3],
}

impl LocalForms {
    pub fn build(
        ops: &LocalElementOperators,
        cell: usize,
        sub: Subdomain,
        params: &MaterialParams,
        stab: Stabilization,
    ) -> Result<Self> {
        let lame = params.lame(sub);
        let (a1, s1) = local_a1(ops, lame.mu, stab.kind)?;
        let b1 = local_b1(ops);
        let a3 = local_a3(ops, lame.lambda);
        let (a2, a2t, b2, s2, s0) = if sub == Subdomain::Poro {
            let (a2, s2) = local_a2(ops, cell, sub, params, stab)?;
            let (a2t, s0) = local_a2_tilde(ops, cell, sub, params, stab)?;
            let b2 = local_b2(ops, cell, sub, params)?;
            (Some(a2), Some(a2t), Some(b2), s2, s0)
        } else {
            (None, None, None, 0.0, 0.0)
        };
        Ok(Self { stab, a1, b1, a3, a2, a2t, b2, sigma: [s1, s2, s0] })
    }
}

fn mean_diag(m: &DMatrix<f64>) -> f64 {
    m.diagonal().mean()
}

/// `I - D Pi`.
fn complement(dofs_of_poly: &DMatrix<f64>, proj: &DMatrix<f64>) -> DMatrix<f64> {
    let n = proj.ncols();
    DMatrix::identity(n, n) - dofs_of_poly * proj
}

/// `2 mu [a1(Pi^eps u, Pi^eps v) + S1((I - Pi) u, (I - Pi) v)]`. Returns the
/// matrix and `sigma1`, the dofi-dofi weight relative to `2 mu` (zero for the
/// edge stabiliser).
pub fn local_a1(ops: &LocalElementOperators, mu: f64, kind: StabilizerKind) -> Result<(DMatrix<f64>, f64)> {
    let cons = ops.eps.transpose() * &ops.eps_gram * &ops.eps;
    let c = complement(&ops.dofs_of_monomials, &ops.eps);
    let (stab, sigma) = match kind {
        StabilizerKind::DofiDofi => {
            let s = mean_diag(&cons);
            (c.transpose() * &c * s, s)
        }
        StabilizerKind::TangentialEdge => {
            (c.transpose() * local_edge_stabilizer(ops) * &c, 0.0)
        }
    };
    Ok(((cons + stab) * (2.0 * mu), sigma))
}

/// Tangential edge stabiliser on `V`: `h_K sum_e int_e d_t u . d_t v`
/// computed from the Lagrange traces through the edge nodes.
pub fn local_edge_stabilizer(ops: &LocalElementOperators) -> DMatrix<f64> {
    let scalar = local_edge_stabilizer_scalar(ops);
    let nb = ops.boundary.len();
    let nv = ops.n_v();
    let mut out = DMatrix::zeros(nv, nv);
    for i in 0..nb {
        for j in 0..nb {
            let v = scalar[(i, j)];
            if v != 0.0 {
                out[(2 * i, 2 * j)] = v;
                out[(2 * i + 1, 2 * j + 1)] = v;
            }
        }
    }
    out
}

/// Scalar version on `Q` DOFs.
pub fn local_edge_stabilizer_scalar(ops: &LocalElementOperators) -> DMatrix<f64> {
    let kref = ops.boundary.reference_stiffness();
    let n = ops.n_q();
    let h = ops.diameter();
    let mut out = DMatrix::zeros(n, n);
    for e in &ops.boundary.edges {
        let f = h / e.length;
        for (a, &i) in e.nodes.iter().enumerate() {
            for (b, &j) in e.nodes.iter().enumerate() {
                out[(i, j)] += f * kref[(a, b)];
            }
        }
    }
    out
}

fn require_poro(cell: usize, sub: Subdomain) -> Result<()> {
    if sub != Subdomain::Poro {
        return Err(VemError::WrongSubdomain { cell, expected: "poroelastic" });
    }
    Ok(())
}

/// `(kappa/eta) [(Pi^0 grad p, Pi^0 grad q) + S2]`. Returns the matrix and
/// `sigma2` (including `kappa/eta`).
pub fn local_a2(
    ops: &LocalElementOperators,
    cell: usize,
    sub: Subdomain,
    params: &MaterialParams,
    stab: Stabilization,
) -> Result<(DMatrix<f64>, f64)> {
    require_poro(cell, sub)?;
    let k = ops.k;
    let nk1 = dim(k as isize - 1);
    let g = &ops.q.grad;
    let gx = g.rows(0, nk1);
    let gy = g.rows(nk1, nk1);
    let cons = gx.transpose() * &ops.mass_low * gx + gy.transpose() * &ops.mass_low * gy;
    let c = complement(&ops.q.dofs_of_monomials, &ops.q.nabla);
    let w = params.mobility();
    if stab.pressure_uses_edge() {
        let s = c.transpose() * local_edge_stabilizer_scalar(ops) * &c;
        return Ok(((cons + s) * w, 0.0));
    }
    let sigma = mean_diag(&cons);
    Ok(((cons + c.transpose() * &c * sigma) * w, sigma * w))
}

/// `(c0 + alpha^2/lambda^P) [(Pi^0 p, Pi^0 q) + |K| S0]`. Returns the matrix
/// and `sigma0`.
pub fn local_a2_tilde(
    ops: &LocalElementOperators,
    cell: usize,
    sub: Subdomain,
    params: &MaterialParams,
    stab: Stabilization,
) -> Result<(DMatrix<f64>, f64)> {
    require_poro(cell, sub)?;
    let s = params.storage();
    let p0 = &ops.q.l2;
    let cons = p0.transpose() * &ops.mass * p0;
    let c = complement(&ops.q.dofs_of_monomials, p0);
    let stab_m = if stab.pressure_uses_edge() {
        let h = ops.diameter();
        c.transpose() * local_edge_stabilizer_scalar(ops) * &c * (h * h)
    } else {
        c.transpose() * &c * ops.area()
    };
    Ok(((cons + stab_m) * s, s))
}

/// `b1(v, z) = -int_K z div v`, exact since `div v` is in `P_(k-1)`.
pub fn local_b1(ops: &LocalElementOperators) -> DMatrix<f64> {
    -(ops.z_coeffs.transpose() * &ops.mass_low * &ops.div)
}

/// `(alpha/lambda^P) int_K Pi^0_k p z`.
pub fn local_b2(
    ops: &LocalElementOperators,
    cell: usize,
    sub: Subdomain,
    params: &MaterialParams,
) -> Result<DMatrix<f64>> {
    require_poro(cell, sub)?;
    let k = ops.k as isize;
    let cross = mass_matrix(&ops.moments, k, k - 1);
    Ok(ops.q.l2.transpose() * cross * &ops.z_coeffs * (params.alpha / params.poro.lambda))
}

/// `b2` from the raw moments of `p` against `P_(k-1)`: degree `<= k-2` from
/// the DOFs, degree `k-1` from the enhancement `(Pi^nabla p, m)`.
pub fn local_b2_raw(
    ops: &LocalElementOperators,
    cell: usize,
    sub: Subdomain,
    params: &MaterialParams,
) -> Result<DMatrix<f64>> {
    require_poro(cell, sub)?;
    let k = ops.k as isize;
    let nb = ops.boundary.len();
    let nk2 = dim(k - 2);
    let mut raw = mass_matrix(&ops.moments, k - 1, k) * &ops.q.nabla;
    for b in 0..nk2 {
        raw.row_mut(b).fill(0.0);
        raw[(b, nb + b)] = ops.area();
    }
    Ok(raw.transpose() * &ops.z_coeffs * (params.alpha / params.poro.lambda))
}

/// `(1/lambda) int_K z w`.
pub fn local_a3(ops: &LocalElementOperators, lambda: f64) -> DMatrix<f64> {
    ops.z_coeffs.transpose() * &ops.mass_low * &ops.z_coeffs / lambda
}

/// Test functions of the body-force functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadProjection {
    /// `int b . Pi^0_k phi_j`, computable in the enhanced space; keeps the
    /// `L2` displacement error of order `k + 1`.
    #[default]
    Full,
    /// `int Pi^0_(k-2) b . phi_j` from the interior moments only; for
    /// `k = 2` the `L2` displacement error drops to order `k`.
    Moments,
}

impl LoadProjection {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Moments => "moments",
        }
    }
}

impl fmt::Display for LoadProjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LoadProjection {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "moments" => Ok(Self::Moments),
            _ => Err(VemError::Unknown { kind: "load projection", name: s.into() }),
        }
    }
}

/// Load vectors: `F` on `V` as selected by `proj` and
/// `G_j = int Pi^0_k l . phi_j` on `Q` (poroelastic cells only, else empty).
pub fn local_loads(
    ops: &LocalElementOperators,
    sub: Subdomain,
    proj: LoadProjection,
    body: impl Fn([f64; 2]) -> [f64; 2],
    source: impl Fn([f64; 2]) -> f64,
) -> (DVector<f64>, DVector<f64>) {
    LoadOperator::new(ops, sub).apply(proj, body, source)
}

/// Quadrature degree of volume loads.
pub fn load_degree(k: usize) -> usize {
    2 * k + 2
}

/// Precomputed map from pointwise body force and source values to the
/// local load vectors of one cell, so that time-dependent loads do not need
/// the full local operators.
#[derive(Debug, Clone)]
pub struct LoadOperator {
    pub sub: Subdomain,
    pub points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    /// Scaled monomials of degree `<= k` at the points, `n_k x n_points`.
    monomials: DMatrix<f64>,
    nk2: usize,
    /// `low_moments^T H_(k-2)^-1`, blockwise per component.
    f_moments: DMatrix<f64>,
    /// Vector `Pi^0_k^T`.
    f_full: DMatrix<f64>,
    /// `Pi^0^T`, empty on elastic cells.
    g_map: DMatrix<f64>,
}

impl LoadOperator {
    pub fn new(ops: &LocalElementOperators, sub: Subdomain) -> Self {
        let k = ops.k;
        let rule = polygon_quadrature(&ops.poly.vertices, load_degree(k));
        let nk2 = dim(k as isize - 2);
        let mut monomials = DMatrix::zeros(ops.n_poly(), rule.points.len());
        for (j, &p) in rule.points.iter().enumerate() {
            for (a, m) in ops.basis.eval(p).into_iter().enumerate() {
                monomials[(a, j)] = m;
            }
        }
        let h2 = mass_matrix(&ops.moments, k as isize - 2, k as isize - 2);
        let inv = h2.try_inverse().unwrap_or_else(|| DMatrix::zeros(nk2, nk2));
        let f_moments = ops.low_moments.transpose() * crate::local_vem::block_diag2(&inv);
        let f_full = ops.l2.transpose();
        let g_map = if sub == Subdomain::Poro { ops.q.l2.transpose() } else { DMatrix::zeros(0, 0) };
        Self { sub, points: rule.points, weights: rule.weights, monomials, nk2, f_moments, f_full, g_map }
    }

    pub fn apply(
        &self,
        proj: LoadProjection,
        body: impl Fn([f64; 2]) -> [f64; 2],
        source: impl Fn([f64; 2]) -> f64,
    ) -> (DVector<f64>, DVector<f64>) {
        // raw moments of b against all monomials of degree <= k (or k - 2)
        let nb = match proj {
            LoadProjection::Full => self.monomials.nrows(),
            LoadProjection::Moments => self.nk2,
        };
        let nk = self.monomials.nrows();
        let poro = self.sub == Subdomain::Poro;
        let mut rb = DVector::zeros(2 * nb);
        let mut rl = DVector::zeros(if poro { nk } else { 0 });
        for (j, (&p, &w)) in self.points.iter().zip(&self.weights).enumerate() {
            let b = body(p);
            let m = self.monomials.column(j);
            for a in 0..nb {
                rb[a] += w * b[0] * m[a];
                rb[nb + a] += w * b[1] * m[a];
            }
            if poro {
                let l = w * source(p);
                for a in 0..nk {
                    rl[a] += l * m[a];
                }
            }
        }
        let f = match proj {
            LoadProjection::Full => &self.f_full * rb,
            LoadProjection::Moments => &self.f_moments * rb,
        };
        // H_k Pi^0 l has the same entries as the raw moments of l
        let g = if poro { &self.g_map * rl } else { DVector::zeros(0) };
        (f, g)
    }
}
