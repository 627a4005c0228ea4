//! Polynomial kernel: scaled monomials, exact polygon moments, Gauss and
//! Gauss-Lobatto rules, and the `G_perp` complement of gradients.

pub mod monomials;
pub mod quadrature;

use nalgebra::{DMatrix, SymmetricEigen};

pub use monomials::{
    derivative_matrix, dim, exponents, index, integrate_monomial, laplacian_matrix, mass_matrix,
    scaled_moments, ScaledMonomialBasis,
};
pub use quadrature::{
    gauss_legendre, gauss_lobatto, gauss_lobatto_edge, polygon_quadrature, EdgeQuadrature,
    PolygonQuadrature,
};

use crate::error::{Result, VemError};

/// Shoelace area; positive for counter-clockwise loops.
pub fn signed_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Largest distance between two vertices.
pub fn diameter(vertices: &[[f64; 2]]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, p) in vertices.iter().enumerate() {
        for q in &vertices[i + 1..] {
            d2 = d2.max((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2));
        }
    }
    d2.sqrt()
}

/// Geometry of a single polygonal element.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
    pub centroid: [f64; 2],
    pub diameter: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(VemError::DegeneratePolygon(format!(
                "{} vertices",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        let diameter = diameter(&vertices);
        if !(area > 1e-14 * diameter * diameter) {
            return Err(VemError::DegeneratePolygon(format!(
                "non-positive area {area:e}"
            )));
        }
        let n = vertices.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = vertices[i];
            let q = vertices[(i + 1) % n];
            let cr = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * cr;
            cy += (p[1] + q[1]) * cr;
        }
        Ok(Self {
            centroid: [cx / (6.0 * area), cy / (6.0 * area)],
            vertices,
            area,
            diameter,
        })
    }

    pub fn basis(&self, degree: usize) -> ScaledMonomialBasis {
        ScaledMonomialBasis::new(degree, self.centroid, self.diameter)
    }

    /// `int_K m_alpha` for the scaled monomials of this polygon.
    pub fn moments(&self, max_degree: usize) -> Vec<f64> {
        scaled_moments(&self.vertices, self.centroid, self.diameter, max_degree)
    }

    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        (self.vertices[i], self.vertices[(i + 1) % self.vertices.len()])
    }

    /// Unit outward normal and length of local edge `i`.
    pub fn edge_normal(&self, i: usize) -> ([f64; 2], f64) {
        let (a, b) = self.edge(i);
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
        ([t[1] / len, -t[0] / len], len)
    }
}

/// L2(K)-orthonormal basis of `G_perp_degree(K)`, the complement of
/// `grad P_(degree+1)` inside `[P_degree]^2`.
///
/// Columns are coefficient vectors in the stacked vector monomial basis
/// `[(m_0, 0), ..., (m_n, 0), (0, m_0), ..., (0, m_n)]`. The dimension is
/// `degree (degree + 1) / 2`, so the space is empty for `degree = 0`.
pub fn gperp_basis(poly: &Polygon, degree: usize) -> Result<DMatrix<f64>> {
    let nm = dim(degree as isize);
    let moments = poly.moments(2 * degree);
    let h = mass_matrix(&moments, degree as isize, degree as isize);
    let mut mv = DMatrix::zeros(2 * nm, 2 * nm);
    mv.view_mut((0, 0), (nm, nm)).copy_from(&h);
    mv.view_mut((nm, nm), (nm, nm)).copy_from(&h);

    // gradients of the non-constant monomials of degree <= degree + 1
    let dx = derivative_matrix(degree + 1, 0, poly.diameter);
    let dy = derivative_matrix(degree + 1, 1, poly.diameter);
    let ng = dim(degree as isize + 1) - 1;
    let mut grads = DMatrix::zeros(2 * nm, ng);
    for j in 0..ng {
        for i in 0..nm {
            grads[(i, j)] = dx[(i, j + 1)];
            grads[(nm + i, j)] = dy[(i, j + 1)];
        }
    }

    let chol = mv
        .clone()
        .cholesky()
        .ok_or_else(|| VemError::Conditioning("vector mass matrix not positive definite".into()))?;
    let l = chol.l();
    let y = l.transpose() * &grads;
    let yty = y.transpose() * &y;
    let yty_inv = yty
        .cholesky()
        .ok_or_else(|| VemError::Conditioning("gradient Gram matrix rank deficient".into()))?
        .inverse();
    let proj = DMatrix::identity(2 * nm, 2 * nm) - &y * yty_inv * y.transpose();
    let eig = SymmetricEigen::new(proj);
    let expected = degree * (degree + 1) / 2;
    let mut cols: Vec<usize> = (0..2 * nm).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_unstable();
    if cols.len() != expected {
        return Err(VemError::Conditioning(format!(
            "G_perp dimension {} differs from {expected}",
            cols.len()
        )));
    }
    let lt = l.transpose();
    let mut out = DMatrix::zeros(2 * nm, expected);
    for (c, &i) in cols.iter().enumerate() {
        let v = eig.eigenvectors.column(i).into_owned();
        let coeffs = lt
            .solve_upper_triangular(&v)
            .ok_or_else(|| VemError::Conditioning("singular mass factor".into()))?;
        // fix the sign so the basis is reproducible
        let pivot = coeffs
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-8)
            .unwrap_or(1.0);
        let s = pivot.signum();
        out.set_column(c, &(coeffs * s));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn polygon_geometry() {
        let p = unit_square();
        assert_eq!(p.area, 1.0);
        assert_eq!(p.centroid, [0.5, 0.5]);
        assert!((p.diameter - 2f64.sqrt()).abs() < 1e-15);
        let (n, len) = p.edge_normal(0);
        assert_eq!(n, [0.0, -1.0]);
        assert_eq!(len, 1.0);
    }

    #[test]
    fn clockwise_polygon_rejected() {
        assert!(Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn gperp_dimensions_follow_space_count() {
        let p = unit_square();
        for m in 0..5 {
            let g = gperp_basis(&p, m).unwrap();
            assert_eq!(g.ncols(), m * (m + 1) / 2, "degree {m}");
        }
    }

    #[test]
    fn gperp_degree_one_is_rotation_on_square() {
        let p = unit_square();
        let g = gperp_basis(&p, 1).unwrap();
        // stacked basis (1, x, y | 1, x, y) in scaled coordinates
        let c = g.column(0);
        let expected = [0.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        let scale = c[4];
        for i in 0..6 {
            assert!((c[i] - scale * expected[i]).abs() < 1e-12, "{c}");
        }
    }
}
