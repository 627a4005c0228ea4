//! Scaled monomials `m_(a,b) = ((x - x_K)/h_K)^a ((y - y_K)/h_K)^b`.
//!
//! Basis functions are ordered by total degree and, inside a degree, by
//! increasing power of `y`: `1, x, y, x^2, xy, y^2, ...`. Lower-degree bases
//! are therefore prefixes of higher-degree ones, so embedding a coefficient
//! vector into a larger space is zero padding.

use nalgebra::DMatrix;

use super::quadrature::{gauss_legendre, gauss_points_for_degree};
use crate::error::{Result, VemError};

/// `dim P_k = (k + 1)(k + 2) / 2`; zero for negative degrees.
pub const fn dim(k: isize) -> usize {
    if k < 0 {
        0
    } else {
        ((k + 1) * (k + 2) / 2) as usize
    }
}

/// Position of `(a, b)` in the hierarchical ordering.
pub const fn index(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

/// Exponent list in the hierarchical ordering.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim(k as isize));
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledMonomialBasis {
    pub degree: usize,
    pub center: [f64; 2],
    pub diameter: f64,
    pub exponents: Vec<(usize, usize)>,
}

impl ScaledMonomialBasis {
    pub fn new(degree: usize, center: [f64; 2], diameter: f64) -> Self {
        Self {
            degree,
            center,
            diameter,
            exponents: exponents(degree),
        }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn scaled(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.center[0]) / self.diameter,
            (p[1] - self.center[1]) / self.diameter,
        ]
    }

    /// Values of every basis function at `p`.
    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        eval_scaled(self.degree, self.scaled(p))
    }

    /// Gradients of every basis function at `p`.
    pub fn eval_grad(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let s = self.scaled(p);
        let lower = eval_scaled(self.degree.saturating_sub(1), s);
        let inv_h = 1.0 / self.diameter;
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let gx = if a > 0 {
                    a as f64 * lower[index(a - 1, b)] * inv_h
                } else {
                    0.0
                };
                let gy = if b > 0 {
                    b as f64 * lower[index(a, b - 1)] * inv_h
                } else {
                    0.0
                };
                [gx, gy]
            })
            .collect()
    }

    /// Evaluate a polynomial given by its coefficients (prefix of this basis).
    pub fn eval_poly(&self, coeffs: &[f64], p: [f64; 2]) -> f64 {
        let vals = self.eval(p);
        coeffs.iter().zip(&vals).map(|(c, v)| c * v).sum()
    }
}

fn eval_scaled(k: usize, s: [f64; 2]) -> Vec<f64> {
    let mut xp = vec![1.0; k + 1];
    let mut yp = vec![1.0; k + 1];
    for i in 1..=k {
        xp[i] = xp[i - 1] * s[0];
        yp[i] = yp[i - 1] * s[1];
    }
    exponents(k).into_iter().map(|(a, b)| xp[a] * yp[b]).collect()
}

/// Coefficient map of `d/dx` (`dir = 0`) or `d/dy` (`dir = 1`) from the degree
/// `k` basis to the degree `k - 1` basis.
pub fn derivative_matrix(k: usize, dir: usize, diameter: f64) -> DMatrix<f64> {
    let rows = dim(k as isize - 1);
    let mut d = DMatrix::zeros(rows, dim(k as isize));
    for (j, (a, b)) in exponents(k).into_iter().enumerate() {
        match dir {
            0 if a > 0 => d[(index(a - 1, b), j)] = a as f64 / diameter,
            1 if b > 0 => d[(index(a, b - 1), j)] = b as f64 / diameter,
            _ => {}
        }
    }
    d
}

/// Coefficient map of the Laplacian from degree `k` to degree `k - 2`.
pub fn laplacian_matrix(k: usize, diameter: f64) -> DMatrix<f64> {
    if k < 2 {
        return DMatrix::zeros(0, dim(k as isize));
    }
    let dxx = derivative_matrix(k - 1, 0, diameter) * derivative_matrix(k, 0, diameter);
    let dyy = derivative_matrix(k - 1, 1, diameter) * derivative_matrix(k, 1, diameter);
    dxx + dyy
}

/// Green's-theorem moments `int_P x^a y^b` of a polygon for all
/// `a + b <= max_degree`, in hierarchical order.
///
/// Uses `int x^a y^b = 1/(a+1) oint x^(a+1) y^b dy` with an exact Gauss rule
/// along each edge.
pub fn green_moments(vertices: &[[f64; 2]], max_degree: usize) -> Vec<f64> {
    let n = vertices.len();
    let mut acc = vec![0.0; dim(max_degree as isize)];
    let rule = gauss_legendre(gauss_points_for_degree(max_degree + 1));
    let mut xp = vec![0.0; max_degree + 2];
    let mut yp = vec![0.0; max_degree + 1];
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        let dy = q[1] - p[1];
        if dy == 0.0 {
            continue;
        }
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let x = p[0] + t * (q[0] - p[0]);
            let y = p[1] + t * dy;
            xp[0] = 1.0;
            yp[0] = 1.0;
            for j in 1..xp.len() {
                xp[j] = xp[j - 1] * x;
            }
            for j in 1..yp.len() {
                yp[j] = yp[j - 1] * y;
            }
            let wd = w * dy;
            for (idx, (a, b)) in exponents(max_degree).into_iter().enumerate() {
                acc[idx] += wd * xp[a + 1] * yp[b] / (a + 1) as f64;
            }
        }
    }
    acc
}

/// `int_P x^a y^b` for a simple polygon given in counter-clockwise order.
pub fn integrate_monomial(vertices: &[[f64; 2]], a: usize, b: usize) -> Result<f64> {
    if vertices.len() < 3 {
        return Err(VemError::DegeneratePolygon(format!(
            "{} vertices",
            vertices.len()
        )));
    }
    let area = super::signed_area(vertices);
    let h = super::diameter(vertices);
    if !(area.abs() > 1e-14 * h * h) {
        return Err(VemError::DegeneratePolygon(format!("area {area:e}")));
    }
    Ok(green_moments(vertices, a + b)[index(a, b)])
}

/// `int_K m_alpha` for every scaled monomial of degree `<= max_degree`.
pub fn scaled_moments(
    vertices: &[[f64; 2]],
    center: [f64; 2],
    diameter: f64,
    max_degree: usize,
) -> Vec<f64> {
    let scaled: Vec<[f64; 2]> = vertices
        .iter()
        .map(|p| [(p[0] - center[0]) / diameter, (p[1] - center[1]) / diameter])
        .collect();
    let jac = diameter * diameter;
    green_moments(&scaled, max_degree)
        .into_iter()
        .map(|m| m * jac)
        .collect()
}

/// `H[i][j] = int_K m_i m_j` for `i` in degree `row_degree`, `j` in
/// degree `col_degree`, given moments up to `row_degree + col_degree`.
pub fn mass_matrix(moments: &[f64], row_degree: isize, col_degree: isize) -> DMatrix<f64> {
    let re = if row_degree < 0 { vec![] } else { exponents(row_degree as usize) };
    let ce = if col_degree < 0 { vec![] } else { exponents(col_degree as usize) };
    DMatrix::from_fn(re.len(), ce.len(), |i, j| {
        let (a, b) = re[i];
        let (c, d) = ce[j];
        moments[index(a + c, b + d)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn dims() {
        assert_eq!(dim(-1), 0);
        assert_eq!(dim(0), 1);
        assert_eq!(dim(2), 6);
        assert_eq!(exponents(2), vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (i, (a, b)) in exponents(5).into_iter().enumerate() {
            assert_eq!(index(a, b), i);
        }
    }

    #[test]
    fn unit_square_xy() {
        assert!((integrate_monomial(&SQUARE, 1, 1).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unit_triangle_x() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!((integrate_monomial(&tri, 1, 0).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let line = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(integrate_monomial(&line, 0, 0).is_err());
        assert!(integrate_monomial(&SQUARE[..2], 0, 0).is_err());
    }

    #[test]
    fn derivative_of_x2y() {
        let k = 3;
        let h = 2.0;
        let mut c = vec![0.0; dim(3)];
        c[index(2, 1)] = 1.0;
        let dx = derivative_matrix(k, 0, h) * nalgebra::DVector::from_vec(c.clone());
        assert!((dx[index(1, 1)] - 1.0).abs() < 1e-15);
        let lap = laplacian_matrix(k, h) * nalgebra::DVector::from_vec(c);
        assert!((lap[index(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_eval_matches_finite_differences() {
        let basis = ScaledMonomialBasis::new(4, [0.3, -0.2], 0.7);
        let p = [0.41, 0.05];
        let g = basis.eval_grad(p);
        let eps = 1e-6;
        let fx1 = basis.eval([p[0] + eps, p[1]]);
        let fx0 = basis.eval([p[0] - eps, p[1]]);
        let fy1 = basis.eval([p[0], p[1] + eps]);
        let fy0 = basis.eval([p[0], p[1] - eps]);
        for i in 0..basis.len() {
            assert!((g[i][0] - (fx1[i] - fx0[i]) / (2.0 * eps)).abs() < 1e-7);
            assert!((g[i][1] - (fy1[i] - fy0[i]) / (2.0 * eps)).abs() < 1e-7);
        }
    }
}
