//! Boundary nodes of a cell: vertices and interior Gauss-Lobatto points of
//! every edge, in counter-clockwise order.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::polykernel::{gauss_legendre, gauss_lobatto, Polygon};

type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeNodes {
    /// Indices into [`BoundaryNodes::points`], from the start vertex to the
    /// end vertex (`k + 1` entries).
    pub nodes: Vec<usize>,
    /// Gauss-Lobatto weights on the physical edge.
    pub weights: Vec<f64>,
    pub normal: Point,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNodes {
    pub k: usize,
    pub points: Vec<Point>,
    pub edges: Vec<EdgeNodes>,
    /// Reference Lobatto parameters on `[0, 1]`.
    pub params: Vec<f64>,
}

impl BoundaryNodes {
    pub fn new(poly: &Polygon, k: usize) -> Result<Self> {
        let n = poly.vertices.len();
        let rule = gauss_lobatto(k + 1);
        let mut points = Vec::with_capacity(n * k);
        for i in 0..n {
            let (a, b) = poly.edge(i);
            for &t in &rule.nodes[..k] {
                points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        let edges = (0..n)
            .map(|i| {
                let (normal, length) = poly.edge_normal(i);
                let mut nodes: Vec<usize> = (0..k).map(|j| i * k + j).collect();
                nodes.push(((i + 1) % n) * k);
                EdgeNodes {
                    nodes,
                    weights: rule.weights.iter().map(|w| w * length).collect(),
                    normal,
                    length,
                }
            })
            .collect();
        Ok(Self {
            k,
            points,
            edges,
            params: rule.nodes.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the node at vertex `i`.
    pub fn vertex_node(&self, i: usize) -> usize {
        i * self.k
    }

    /// Lagrange basis through the Lobatto parameters, evaluated at `t`.
    pub fn lagrange(&self, t: f64) -> Vec<f64> {
        lagrange_values(&self.params, t)
    }

    /// Gauss points on `[0, 1]` exact to `degree`, with Lagrange values of
    /// every edge node at them (`points x (k+1)`).
    pub fn gauss_interpolation(&self, degree: usize) -> (Vec<f64>, Vec<f64>, DMatrix<f64>) {
        let rule = gauss_legendre(degree / 2 + 1);
        let vals = DMatrix::from_fn(rule.nodes.len(), self.params.len(), |g, a| {
            lagrange_values(&self.params, rule.nodes[g])[a]
        });
        (rule.nodes.clone(), rule.weights.clone(), vals)
    }

    /// `int_0^1 L_a'(t) L_b'(t) dt` for the Lagrange basis on the Lobatto
    /// parameters.
    pub fn reference_stiffness(&self) -> DMatrix<f64> {
        let m = self.params.len();
        let rule = gauss_legendre(m);
        let mut out = DMatrix::zeros(m, m);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let d = lagrange_derivatives(&self.params, t);
            for a in 0..m {
                for b in 0..m {
                    out[(a, b)] += w * d[a] * d[b];
                }
            }
        }
        out
    }
}

pub fn lagrange_values(nodes: &[f64], t: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|a| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, &tb)| (t - tb) / (nodes[a] - tb))
                .product()
        })
        .collect()
}

pub(crate) fn lagrange_derivatives(nodes: &[f64], t: f64) -> Vec<f64> {
    let m = nodes.len();
    (0..m)
        .map(|a| {
            let mut sum = 0.0;
            for c in 0..m {
                if c == a {
                    continue;
                }
                let mut prod = 1.0 / (nodes[a] - nodes[c]);
                for b in 0..m {
                    if b != a && b != c {
                        prod *= (t - nodes[b]) / (nodes[a] - nodes[b]);
                    }
                }
                sum += prod;
            }
            sum
        })
        .collect()
}
