//! DOF interpolation of smooth fields.

use nalgebra::DVector;

use super::{dot, LocalElementOperators};
use crate::polykernel::{dim, gauss_legendre, polygon_quadrature, ScaledMonomialBasis};

/// Extra quadrature degree beyond the polynomial part of the integrands.
const EXTRA_DEGREE: usize = 6;

impl LocalElementOperators {
    fn volume_rule(&self) -> crate::polykernel::PolygonQuadrature {
        polygon_quadrature(&self.poly.vertices, 2 * self.k + EXTRA_DEGREE)
    }

    /// `Q` DOFs of a scalar field.
    pub fn interpolate_scalar(&self, f: impl Fn([f64; 2]) -> f64) -> DVector<f64> {
        let nb = self.boundary.len();
        let nk2 = dim(self.k as isize - 2);
        let mut out = DVector::zeros(self.n_q());
        for (l, &p) in self.boundary.points.iter().enumerate() {
            out[l] = f(p);
        }
        let low = ScaledMonomialBasis::new(self.k - 2, self.poly.centroid, self.poly.diameter);
        let rule = self.volume_rule();
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = w * f(p) / self.poly.area;
            let m = low.eval(p);
            for a in 0..nk2 {
                out[nb + a] += v * m[a];
            }
        }
        out
    }

    /// `Z` DOFs of a scalar field.
    pub fn interpolate_z(&self, f: impl Fn([f64; 2]) -> f64) -> DVector<f64> {
        let low = ScaledMonomialBasis::new(self.k - 1, self.poly.centroid, self.poly.diameter);
        let mut out = DVector::zeros(self.n_z());
        let rule = self.volume_rule();
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = w * f(p) / self.poly.area;
            let m = low.eval(p);
            for (o, mi) in out.iter_mut().zip(&m) {
                *o += v * mi;
            }
        }
        out
    }

    /// `V` DOFs of a vector field. Divergence moments are obtained from
    /// `int div v m = int_dK (v . n) m - int_K v . grad m`.
    pub fn interpolate_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> DVector<f64> {
        let k = self.k;
        let area = self.poly.area;
        let h = self.poly.diameter;
        let nb = self.boundary.len();
        let nk2 = dim(k as isize - 2);
        let nk1 = dim(k as isize - 1);
        let ng = (k - 1) * (k - 2) / 2;
        let mut out = DVector::zeros(self.n_v());
        for (l, &p) in self.boundary.points.iter().enumerate() {
            let v = f(p);
            out[2 * l] = v[0];
            out[2 * l + 1] = v[1];
        }
        let low = ScaledMonomialBasis::new(k - 2, self.poly.centroid, h);
        let mid = ScaledMonomialBasis::new(k - 1, self.poly.centroid, h);
        let mut divm = vec![0.0; nk1];
        let rule = self.volume_rule();
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            let v = f(p);
            let m = low.eval(p);
            for j in 0..ng {
                let gx = dot(&self.gperp.column(j).as_slice()[..nk2], &m);
                let gy = dot(&self.gperp.column(j).as_slice()[nk2..], &m);
                out[2 * nb + j] += w * (v[0] * gx + v[1] * gy) / area;
            }
            let gm = mid.eval_grad(p);
            for (b, g) in gm.iter().enumerate() {
                divm[b] -= w * (v[0] * g[0] + v[1] * g[1]);
            }
        }
        let rule1 = gauss_legendre(k + EXTRA_DEGREE / 2 + 1);
        for i in 0..self.poly.vertices.len() {
            let (pa, pb) = self.poly.edge(i);
            let (n, len) = self.poly.edge_normal(i);
            for (&t, &w) in rule1.nodes.iter().zip(&rule1.weights) {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let v = f(x);
                let vn = v[0] * n[0] + v[1] * n[1];
                for (b, mb) in mid.eval(x).iter().enumerate() {
                    divm[b] += w * len * vn * mb;
                }
            }
        }
        for b in 1..nk1 {
            out[2 * nb + ng + b - 1] = h / area * divm[b];
        }
        out
    }

    /// `V` DOFs of a stacked vector polynomial (exact).
    pub fn dofs_of_vector_poly(&self, coeffs: &[f64]) -> DVector<f64> {
        &self.dofs_of_monomials * DVector::from_column_slice(coeffs)
    }

    /// `Q` DOFs of a scalar polynomial (exact).
    pub fn dofs_of_scalar_poly(&self, coeffs: &[f64]) -> DVector<f64> {
        &self.q.dofs_of_monomials * DVector::from_column_slice(coeffs)
    }
}
