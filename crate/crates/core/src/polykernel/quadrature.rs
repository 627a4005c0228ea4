//! One-dimensional Gauss rules on `[0, 1]` and the collapsed triangle /
//! centroid-fan polygon rules built on top of them.

use std::sync::OnceLock;

use crate::error::{Result, VemError};

const MAX_GAUSS_POINTS: usize = 48;
const MAX_LOBATTO_POINTS: usize = 24;

/// Nodes and weights of a 1D rule on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64, f64) {
    // returns (P_n, P_{n-1}, P'_n)
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * x * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, p0, dp)
}

fn compute_gauss(n: usize) -> Rule1d {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, _, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, _, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    Rule1d { nodes, weights }
}

fn compute_lobatto(n: usize) -> Rule1d {
    // n points on [-1, 1]; interior nodes are the roots of P'_{n-1}
    let m = n - 1;
    let mut x_all = vec![0.0; n];
    let mut w_all = vec![0.0; n];
    x_all[0] = -1.0;
    x_all[m] = 1.0;
    for i in 1..m {
        let mut x = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, _, dp) = legendre_with_derivative(m, x);
            let d2p = (2.0 * x * dp - (m * (m + 1)) as f64 * p) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        x_all[i] = x;
    }
    for i in 0..n {
        let (p, _, _) = if i == 0 || i == m {
            let p = if x_all[i] > 0.0 || m.is_multiple_of(2) { 1.0 } else { -1.0 };
            (p, 0.0, 0.0)
        } else {
            legendre_with_derivative(m, x_all[i])
        };
        w_all[i] = 2.0 / ((n * m) as f64 * p * p);
    }
    Rule1d {
        nodes: x_all.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: w_all.iter().map(|w| 0.5 * w).collect(),
    }
}

/// Gauss-Legendre rule with `n` points on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> &'static Rule1d {
    static TABLE: OnceLock<Vec<Rule1d>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=MAX_GAUSS_POINTS).map(|n| compute_gauss(n.max(1))).collect());
    assert!(
        (1..=MAX_GAUSS_POINTS).contains(&n),
        "gauss rule with {n} points not tabulated"
    );
    &table[n]
}

/// Number of Gauss points needed to integrate degree `degree` exactly.
pub fn gauss_points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss-Lobatto rule with `n >= 2` points on `[0, 1]` (both endpoints
/// included), exact for degree `2n - 3`.
pub fn gauss_lobatto(n: usize) -> &'static Rule1d {
    static TABLE: OnceLock<Vec<Rule1d>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (0..=MAX_LOBATTO_POINTS)
            .map(|n| compute_lobatto(n.max(2)))
            .collect()
    });
    assert!(
        (2..=MAX_LOBATTO_POINTS).contains(&n),
        "lobatto rule with {n} points not tabulated"
    );
    &table[n]
}

/// `k + 1` Gauss-Lobatto points mapped onto a physical segment.
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    /// Parameters in `[0, 1]` measured from the first endpoint.
    pub params: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

pub fn gauss_lobatto_edge(a: [f64; 2], b: [f64; 2], k: usize) -> Result<EdgeQuadrature> {
    if k < 2 {
        return Err(VemError::UnsupportedOrder(k));
    }
    let rule = gauss_lobatto(k + 1);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    Ok(EdgeQuadrature {
        params: rule.nodes.clone(),
        points: rule
            .nodes
            .iter()
            .map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            .collect(),
        weights: rule.weights.iter().map(|w| w * len).collect(),
    })
}

/// Points and weights of a volume rule on a polygon.
#[derive(Debug, Clone, Default)]
pub struct PolygonQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl PolygonQuadrature {
    pub fn integrate(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Collapsed (Duffy) Gauss rule on a triangle, exact for polynomials of
/// total degree `degree`. Weights carry the sign of the triangle orientation.
pub fn triangle_rule(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], degree: usize, out: &mut PolygonQuadrature) {
    let n = gauss_points_for_degree(degree + 1);
    let g = gauss_legendre(n);
    let e1 = [p1[0] - p0[0], p1[1] - p0[1]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1]];
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    for (&u, &wu) in g.nodes.iter().zip(&g.weights) {
        for (&v, &wv) in g.nodes.iter().zip(&g.weights) {
            let a = u * (1.0 - v);
            let b = u * v;
            out.points
                .push([p0[0] + a * e1[0] + b * e2[0], p0[1] + a * e1[1] + b * e2[1]]);
            out.weights.push(wu * wv * u * det);
        }
    }
}

/// Centroid-fan triangulation of a polygon with a collapsed Gauss rule of
/// the given degree on every triangle.
pub fn polygon_quadrature(vertices: &[[f64; 2]], degree: usize) -> PolygonQuadrature {
    let n = vertices.len();
    let c = vertex_average(vertices);
    let mut q = PolygonQuadrature::default();
    for i in 0..n {
        triangle_rule(c, vertices[i], vertices[(i + 1) % n], degree, &mut q);
    }
    q
}

pub(crate) fn vertex_average(vertices: &[[f64; 2]]) -> [f64; 2] {
    let n = vertices.len() as f64;
    let (sx, sy) = vertices
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    [sx / n, sy / n]
}
