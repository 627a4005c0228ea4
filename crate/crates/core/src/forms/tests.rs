use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};

use super::*;
use crate::mesh::random_star_polygon;

const UNIT_SQUARE: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

fn params() -> MaterialParams {
    MaterialParams {
        poro: Lame { mu: 2.0, lambda: 5.0 },
        elastic: Lame { mu: 3.0, lambda: 7.0 },
        kappa: 0.3,
        eta: 1.5,
        alpha: 0.8,
        c0: 0.1,
    }
}

fn stab(kind: StabilizerKind, scope: EdgeStabScope) -> Stabilization {
    Stabilization { kind, scope }
}

fn all_stabs() -> [Stabilization; 3] {
    [
        Stabilization::default(),
        stab(StabilizerKind::TangentialEdge, EdgeStabScope::Displacement),
        stab(StabilizerKind::TangentialEdge, EdgeStabScope::All),
    ]
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= 1e-12 * m.amax()
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

#[test]
fn rigid_motions_are_in_the_kernel_of_a1() {
    let pts = random_star_polygon(3, 6, 1.0).unwrap();
    let ops = LocalElementOperators::new(&pts, 2).unwrap();
    let rigid = [
        ops.interpolate_vector(|_| [1.0, 0.0]),
        ops.interpolate_vector(|_| [0.0, 1.0]),
        ops.interpolate_vector(|p| [-p[1], p[0]]),
    ];
    for kind in [StabilizerKind::DofiDofi, StabilizerKind::TangentialEdge] {
        let (a1, _) = local_a1(&ops, 1.0, kind).unwrap();
        assert!(is_symmetric(&a1));
        for r in &rigid {
            assert!((&a1 * r).amax() < 1e-11 * a1.amax());
        }
        // exactly three zero eigenvalues
        let scale = a1.amax();
        let eig = a1.symmetric_eigenvalues();
        assert!(eig.min() > -1e-11 * scale);
        assert_eq!(eig.iter().filter(|e| e.abs() < 1e-10 * scale).count(), 3);
    }
}

#[test]
fn a1_consistency_on_polynomials() {
    let pts = random_star_polygon(11, 5, 1.0).unwrap();
    for k in 2..4 {
        let ops = LocalElementOperators::new(&pts, k).unwrap();
        let nk = ops.n_poly();
        let c = DVector::from_fn(2 * nk, |i, _| ((i * 5 + 1) % 7) as f64 - 3.0);
        let u = &ops.dofs_of_monomials * &c;
        let v = DVector::from_fn(ops.n_v(), |i, _| ((i * 3 + 2) % 11) as f64 / 11.0 - 0.5);
        let mu = 1.7;
        for kind in [StabilizerKind::DofiDofi, StabilizerKind::TangentialEdge] {
            let (a1, _) = local_a1(&ops, mu, kind).unwrap();
            let lhs = v.dot(&(&a1 * &u));
            let rhs = 2.0 * mu * c.dot(&(&ops.eps_rhs * &v));
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10, epsilon = 1e-10);
        }
    }
}

#[test]
fn a1_is_linear_in_mu() {
    let ops = LocalElementOperators::new(&UNIT_SQUARE, 2).unwrap();
    let (a, _) = local_a1(&ops, 1.0, StabilizerKind::DofiDofi).unwrap();
    let (b, _) = local_a1(&ops, 2.0, StabilizerKind::DofiDofi).unwrap();
    assert!((b - a * 2.0).amax() < 1e-13);
}

#[test]
fn pressure_forms() {
    let p = params();
    let pts = random_star_polygon(5, 7, 1.0).unwrap();
    for k in 2..4 {
        let ops = LocalElementOperators::new(&pts, k).unwrap();
        let one = ops.interpolate_scalar(|_| 1.0);
        for s in all_stabs() {
            let (a2, _) = local_a2(&ops, 0, Subdomain::Poro, &p, s).unwrap();
            assert!(is_symmetric(&a2));
            assert!((&a2 * &one).amax() < 1e-12 * a2.amax());
            assert!(min_eig(&a2) > -1e-12 * a2.amax());
            let (a2t, _) = local_a2_tilde(&ops, 0, Subdomain::Poro, &p, s).unwrap();
            assert!(is_symmetric(&a2t));
            assert!(min_eig(&a2t) > 0.0);
            assert_relative_eq!(one.dot(&(&a2t * &one)), p.storage() * ops.area(), max_relative = 1e-12);
        }
        let a3 = local_a3(&ops, 4.0);
        assert!(is_symmetric(&a3) && min_eig(&a3) > 0.0);
    }
}

#[test]
fn pressure_forms_reject_elastic_cells() {
    let ops = LocalElementOperators::new(&UNIT_SQUARE, 2).unwrap();
    let p = params();
    assert!(matches!(
        local_a2(&ops, 4, Subdomain::Elastic, &p, Stabilization::default()),
        Err(VemError::WrongSubdomain { cell: 4, .. })
    ));
    assert!(local_b2(&ops, 4, Subdomain::Elastic, &p).is_err());
    let f = LocalForms::build(&ops, 4, Subdomain::Elastic, &p, Stabilization::default()).unwrap();
    assert!(f.a2.is_none() && f.b2.is_none());
}

#[test]
fn coupling_forms_on_unit_square() {
    let ops = LocalElementOperators::new(&UNIT_SQUARE, 2).unwrap();
    let p = params();
    let v = ops.interpolate_vector(|x| [x[0], 0.0]);
    let one_z = ops.interpolate_z(|_| 1.0);
    let b1 = local_b1(&ops);
    assert_relative_eq!(one_z.dot(&(&b1 * &v)), -1.0, epsilon = 1e-13);

    let one_q = ops.interpolate_scalar(|_| 1.0);
    let b2 = local_b2(&ops, 0, Subdomain::Poro, &p).unwrap();
    assert_relative_eq!(one_q.dot(&(&b2 * &one_z)), p.alpha / p.poro.lambda, epsilon = 1e-13);

    // m_(1,0) = (x - 1/2) / sqrt(2), so int m^2 = 1/24
    let lambda = 3.0;
    let m10 = ops.interpolate_z(|x| (x[0] - 0.5) / 2f64.sqrt());
    let a3 = local_a3(&ops, lambda);
    assert_relative_eq!(m10.dot(&(&a3 * &m10)), 1.0 / (24.0 * lambda), epsilon = 1e-14);
}

#[test]
fn b2_representations_agree() {
    let p = params();
    for seed in 0..5 {
        let pts = random_star_polygon(seed, 4 + seed as usize, 1.0).unwrap();
        for k in 2..4 {
            let ops = LocalElementOperators::new(&pts, k).unwrap();
            let a = local_b2(&ops, 0, Subdomain::Poro, &p).unwrap();
            let b = local_b2_raw(&ops, 0, Subdomain::Poro, &p).unwrap();
            assert!((a - b).amax() < 1e-12);
        }
    }
}

#[test]
fn loads() {
    let pts = random_star_polygon(8, 6, 1.0).unwrap();
    let ops = LocalElementOperators::new(&pts, 2).unwrap();
    let (f, g) = local_loads(&ops, Subdomain::Poro, LoadProjection::Moments, |_| [1.0, 0.0], |_| 0.0);
    let want = ops.low_moments.row(0).transpose();
    assert!((&f - &want).amax() < 1e-13);
    // constants are reproduced by Pi^0_k, so both rules agree on them
    let (full, _) = local_loads(&ops, Subdomain::Poro, LoadProjection::Full, |_| [1.0, 0.0], |_| 0.0);
    assert!((full - want).amax() < 1e-12);
    assert_eq!(g.len(), ops.n_q());
    assert!(g.amax() == 0.0);
    let (_, g) = local_loads(&ops, Subdomain::Elastic, LoadProjection::Full, |_| [0.0, 0.0], |_| 1.0);
    assert!(g.is_empty());
}

#[test]
fn edge_stabilizer() {
    let pts = random_star_polygon(21, 5, 1.0).unwrap();
    let ops = LocalElementOperators::new(&pts, 2).unwrap();
    let s = local_edge_stabilizer(&ops);
    assert!(is_symmetric(&s) && min_eig(&s) > -1e-12);
    let c = ops.interpolate_vector(|_| [2.0, -1.0]);
    assert!((&s * &c).amax() < 1e-12);

    // linear field: d_t u = (grad u) t is constant on each edge
    let grad = [[0.3, -1.2], [0.7, 0.4]];
    let u = ops.interpolate_vector(|p| {
        [grad[0][0] * p[0] + grad[0][1] * p[1], grad[1][0] * p[0] + grad[1][1] * p[1]]
    });
    let mut want = 0.0;
    for i in 0..pts.len() {
        let (a, b) = ops.poly.edge(i);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let t = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        for row in grad {
            let d = row[0] * t[0] + row[1] * t[1];
            want += len * d * d;
        }
    }
    want *= ops.diameter();
    assert_relative_eq!(u.dot(&(&s * &u)), want, max_relative = 1e-12);

    // fixed DOFs on a dilated cell give the same matrix
    let big: Vec<[f64; 2]> = pts.iter().map(|p| [3.0 * p[0], 3.0 * p[1]]).collect();
    let s3 = local_edge_stabilizer(&LocalElementOperators::new(&big, 2).unwrap());
    assert!((s3 - &s).amax() < 1e-12 * s.amax());
}

#[test]
fn parse_stabilizers() {
    assert_eq!("dofi-dofi".parse::<StabilizerKind>().unwrap(), StabilizerKind::DofiDofi);
    assert_eq!("tangential-edge".parse::<StabilizerKind>().unwrap(), StabilizerKind::TangentialEdge);
    assert!(matches!("x".parse::<StabilizerKind>(), Err(VemError::Unknown { .. })));
    assert_eq!("all".parse::<EdgeStabScope>().unwrap(), EdgeStabScope::All);
}
