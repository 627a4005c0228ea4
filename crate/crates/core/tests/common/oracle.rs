//! Dense least-squares oracles for the local projections.
//!
//! Fields are explicit smooth functions `p + B r` where `p` is a polynomial
//! of degree `k`, `B` is the product of the edge-line functions (zero on the
//! boundary) and `r` is linear. Their boundary traces are exactly
//! piecewise `P_k`, so the virtual element interpolant has the same energy
//! projections as the field itself. The oracle computes those projections
//! by brute-force quadrature in an unscaled monomial basis centred at the
//! vertex average, without integration by parts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use biotvem::local_vem::LocalElementOperators;
use biotvem::polykernel::{polygon_quadrature, PolygonQuadrature, ScaledMonomialBasis};

pub type P = [f64; 2];

/// Polynomial in `(x - c_x)^a (y - c_y)^b`, ordered by total degree.
#[derive(Debug, Clone)]
pub struct OraclePoly {
    pub center: P,
    pub exps: Vec<(usize, usize)>,
    pub coeffs: Vec<f64>,
}

pub fn exps(k: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for d in 0..=k {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn mono(c: P, e: (usize, usize), p: P) -> (f64, P) {
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    let v = dx.powi(e.0 as i32) * dy.powi(e.1 as i32);
    let gx = if e.0 > 0 { e.0 as f64 * dx.powi(e.0 as i32 - 1) * dy.powi(e.1 as i32) } else { 0.0 };
    let gy = if e.1 > 0 { e.1 as f64 * dx.powi(e.0 as i32) * dy.powi(e.1 as i32 - 1) } else { 0.0 };
    (v, [gx, gy])
}

impl OraclePoly {
    pub fn eval(&self, p: P) -> f64 {
        self.exps
            .iter()
            .zip(&self.coeffs)
            .map(|(&e, c)| c * mono(self.center, e, p).0)
            .sum()
    }

    pub fn grad(&self, p: P) -> P {
        let mut g = [0.0; 2];
        for (&e, c) in self.exps.iter().zip(&self.coeffs) {
            let m = mono(self.center, e, p).1;
            g[0] += c * m[0];
            g[1] += c * m[1];
        }
        g
    }
}

pub fn vertex_average(v: &[P]) -> P {
    let n = v.len() as f64;
    [v.iter().map(|p| p[0]).sum::<f64>() / n, v.iter().map(|p| p[1]).sum::<f64>() / n]
}

fn rule(v: &[P], k: usize) -> PolygonQuadrature {
    polygon_quadrature(v, 2 * k + v.len() + 6)
}

/// Product of the edge-line functions, normalised by the diameter.
pub fn bubble(v: &[P]) -> impl Fn(P) -> (f64, P) + '_ {
    let h = biotvem::polykernel::diameter(v);
    move |p| {
        let n = v.len();
        let mut vals = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let t = [b[0] - a[0], b[1] - a[1]];
            let len = t[0].hypot(t[1]);
            let nv = [t[1] / len, -t[0] / len];
            vals.push((nv[0] * (a[0] - p[0]) + nv[1] * (a[1] - p[1])) / h);
            grads.push([-nv[0] / h, -nv[1] / h]);
        }
        let val: f64 = vals.iter().product();
        let mut g = [0.0; 2];
        for i in 0..n {
            let rest: f64 = (0..n).filter(|&j| j != i).map(|j| vals[j]).product();
            g[0] += grads[i][0] * rest;
            g[1] += grads[i][1] * rest;
        }
        (val, g)
    }
}

/// Random smooth scalar field `p + 4^n B r` with exactly `P_k` traces.
pub fn smooth_scalar(v: &[P], k: usize, seed: u64) -> impl Fn(P) -> (f64, P) + '_ {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let poly = OraclePoly {
        center: vertex_average(v),
        exps: exps(k),
        coeffs: (0..exps(k).len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let r = [rng.random_range(0.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let scale = 4f64.powi(v.len() as i32);
    let b = bubble(v);
    move |p| {
        let (bv, bg) = b(p);
        let rv = r[0] + r[1] * p[0] + r[2] * p[1];
        let pg = poly.grad(p);
        (
            poly.eval(p) + scale * bv * rv,
            [
                pg[0] + scale * (bg[0] * rv + bv * r[1]),
                pg[1] + scale * (bg[1] * rv + bv * r[2]),
            ],
        )
    }
}

/// Random smooth vector field, componentwise as [`smooth_scalar`]; returns
/// values and the Jacobian `J[c][d] = d v_c / d x_d`.
pub fn smooth_vector(v: &[P], k: usize, seed: u64) -> impl Fn(P) -> (P, [P; 2]) + '_ {
    let fx = smooth_scalar(v, k, seed);
    let fy = smooth_scalar(v, k, seed ^ 0x9e37_79b9);
    move |p| {
        let (a, ga) = fx(p);
        let (b, gb) = fy(p);
        ([a, b], [ga, gb])
    }
}

/// `argmin |f - c|_1` over `P_k` with equal mean value.
pub fn energy_projection(v: &[P], k: usize, f: &dyn Fn(P) -> (f64, P)) -> OraclePoly {
    let center = vertex_average(v);
    let e = exps(k);
    let n = e.len();
    let q = rule(v, k);
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let (fv, fg) = f(p);
        let m: Vec<(f64, P)> = e.iter().map(|&ei| mono(center, ei, p)).collect();
        for a in 0..n {
            for b in 0..n {
                kkt[(a, b)] += w * (m[a].1[0] * m[b].1[0] + m[a].1[1] * m[b].1[1]);
            }
            rhs[a] += w * (m[a].1[0] * fg[0] + m[a].1[1] * fg[1]);
            kkt[(a, n)] += w * m[a].0;
            kkt[(n, a)] += w * m[a].0;
        }
        rhs[n] += w * fv;
    }
    let x = kkt.lu().solve(&rhs).expect("oracle KKT");
    OraclePoly { center, exps: e, coeffs: x.as_slice()[..n].to_vec() }
}

/// `L2` projection onto `P_deg` of a scalar function.
pub fn l2_projection(v: &[P], deg: usize, f: &dyn Fn(P) -> f64) -> OraclePoly {
    let center = vertex_average(v);
    let e = exps(deg);
    let n = e.len();
    let q = rule(v, deg + 1);
    let mut gram = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let fv = f(p);
        let m: Vec<f64> = e.iter().map(|&ei| mono(center, ei, p).0).collect();
        for a in 0..n {
            for b in 0..n {
                gram[(a, b)] += w * m[a] * m[b];
            }
            rhs[a] += w * m[a] * fv;
        }
    }
    let x = gram.lu().solve(&rhs).expect("oracle gram");
    OraclePoly { center, exps: e, coeffs: x.as_slice().to_vec() }
}

/// `argmin int |eps(f - c)|^2` over `[P_k]^2` with the vertex-average
/// pairing against rigid motions fixed.
pub fn eps_projection(v: &[P], k: usize, f: &dyn Fn(P) -> (P, [P; 2])) -> [OraclePoly; 2] {
    let center = vertex_average(v);
    let h = biotvem::polykernel::diameter(v);
    let e = exps(k);
    let n = e.len();
    let q = rule(v, k);
    // unknowns: (x-coeffs, y-coeffs), then 3 multipliers
    let mut kkt = DMatrix::zeros(2 * n + 3, 2 * n + 3);
    let mut rhs = DVector::zeros(2 * n + 3);
    let strain = |j: [P; 2]| [j[0][0], j[1][1], 0.5 * (j[0][1] + j[1][0])];
    let ddot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2];
    for (&p, &w) in q.points.iter().zip(&q.weights) {
        let (_, jf) = f(p);
        let sf = strain(jf);
        let basis: Vec<[f64; 3]> = (0..2 * n)
            .map(|i| {
                let g = mono(center, e[i % n], p).1;
                let mut j = [[0.0; 2]; 2];
                j[i / n] = g;
                strain(j)
            })
            .collect();
        for a in 0..2 * n {
            for b in 0..2 * n {
                kkt[(a, b)] += w * ddot(basis[a], basis[b]);
            }
            rhs[a] += w * ddot(basis[a], sf);
        }
    }
    let nv = v.len() as f64;
    for &p in v {
        let s = [(p[0] - center[0]) / h, (p[1] - center[1]) / h];
        let rig = [[1.0, 0.0], [0.0, 1.0], [-s[1], s[0]]];
        let fv = f(p).0;
        for (r, rv) in rig.iter().enumerate() {
            for i in 0..2 * n {
                let m = mono(center, e[i % n], p).0;
                let val = m * rv[i / n] / nv;
                kkt[(2 * n + r, i)] += val;
                kkt[(i, 2 * n + r)] += val;
            }
            rhs[2 * n + r] += (fv[0] * rv[0] + fv[1] * rv[1]) / nv;
        }
    }
    let x = kkt.lu().solve(&rhs).expect("oracle eps KKT");
    [
        OraclePoly { center, exps: e.clone(), coeffs: x.as_slice()[..n].to_vec() },
        OraclePoly { center, exps: e, coeffs: x.as_slice()[n..2 * n].to_vec() },
    ]
}

const TOL: f64 = 1e-9;

pub fn sample_points(v: &[P]) -> Vec<P> {
    polygon_quadrature(v, 3).points
}

pub fn assert_close(what: &str, vem: impl Fn(P) -> f64, orc: &OraclePoly, pts: &[P]) {
    let scale = pts.iter().map(|&p| orc.eval(p).abs()).fold(1e-3, f64::max);
    for &p in pts {
        let (a, b) = (vem(p), orc.eval(p));
        assert!((a - b).abs() <= TOL * scale, "{what} at {p:?}: {a} vs {b}");
    }
}

/// Compare every local projection of a smooth field with the oracle.
pub fn check_cell(v: &[P], k: usize, seed: u64) {
    let ops = LocalElementOperators::new(v, k).unwrap();
    let pts = sample_points(v);
    let nk = ops.n_poly();

    let f = smooth_scalar(v, k, seed);
    let q = ops.interpolate_scalar(|p| f(p).0);
    let c = ops.project_nabla_scalar(q.as_slice()).unwrap();
    let orc = energy_projection(v, k, &f);
    assert_close("scalar nabla", |p| ops.basis.eval_poly(c.as_slice(), p), &orc, &pts);

    let g = ops.project_grad_l2(q.as_slice()).unwrap();
    let low = ScaledMonomialBasis::new(k - 1, ops.poly.centroid, ops.diameter());
    let n1 = low.len();
    for d in 0..2 {
        let orc = l2_projection(v, k - 1, &|p| f(p).1[d]);
        assert_close("grad l2", |p| low.eval_poly(&g.as_slice()[d * n1..(d + 1) * n1], p), &orc, &pts);
    }

    let fv = smooth_vector(v, k, seed + 17);
    let u = ops.interpolate_vector(|p| fv(p).0);
    let e = ops.project_eps_vector(u.as_slice()).unwrap();
    let orc = eps_projection(v, k, &fv);
    for c in 0..2 {
        assert_close("eps", |p| ops.eval_vector(e.as_slice(), p)[c], &orc[c], &pts);
    }

    let nb = ops.nabla.clone() * &u;
    for c in 0..2 {
        let comp = |p: P| {
            let (val, jac) = fv(p);
            (val[c], jac[c])
        };
        let orc = energy_projection(v, k, &comp);
        assert_close("vector nabla", |p| ops.basis.eval_poly(&nb.as_slice()[c * nk..(c + 1) * nk], p), &orc, &pts);
    }

    let dv = ops.divergence(u.as_slice()).unwrap();
    let orc = l2_projection(v, k - 1, &|p| {
        let j = fv(p).1;
        j[0][0] + j[1][1]
    });
    assert_close("divergence", |p| low.eval_poly(dv.as_slice(), p), &orc, &pts);
}
