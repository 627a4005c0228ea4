use super::*;
use crate::assembly::build_dof_map;
use crate::manufactured::{EdgeBc, Jet, ProblemData};
use proptest::prelude::*;

fn row(h: f64, e: [f64; 5]) -> ErrorRow {
    let [e0_u, e1_u, e0_p, e1_p, e0_psi] = e;
    ErrorRow {
        level: 0,
        h,
        h_rate: h,
        dt: None,
        steps: 0,
        cells: 0,
        unknowns: 0,
        errors: FieldErrors { e0_u, e1_u, e0_p, e1_p, e0_psi },
        rates: [None; 5],
        max_residual: 0.0,
        wall_s: 1.5,
    }
}

#[test]
fn halving_error_with_halving_h_is_rate_one() {
    assert!((rate(0.2, 0.1, 0.5, 0.25).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn tabulated_rates_use_a_refinement_ratio_of_two() {
    let r = rate(0.07013, 0.01079, 2.0, 1.0).unwrap();
    assert!((r - 2.70).abs() < 5e-3, "{r}");
    let r = rate(0.02622, 3.29e-3, 2.0, 1.0).unwrap();
    assert!((r - 2.99).abs() < 5e-3, "{r}");
}

#[test]
fn undefined_rates() {
    assert_eq!(rate(0.0, 0.1, 0.5, 0.25), None);
    assert_eq!(rate(0.1, 0.0, 0.5, 0.25), None);
    assert_eq!(rate(-1.0, 0.1, 0.5, 0.25), None);
    assert_eq!(rate(0.2, 0.1, 0.25, 0.5), None);
    assert_eq!(rate(0.2, 0.1, 0.25, 0.25), None);
    assert_eq!(rate_above_floor(1e-12, 1e-13, 0.5, 0.25), None);
    assert!(rate_above_floor(1e-8, 1e-10, 0.5, 0.25).is_some());
}

proptest! {
    #[test]
    fn rates_are_scale_invariant(
        ec in 1e-6f64..1.0, ratio in 0.01f64..1.0, hc in 0.01f64..1.0, hr in 0.1f64..0.9, s in 1e-3f64..1e3,
    ) {
        let ef = ec * ratio;
        let hf = hc * hr;
        let a = rate(ec, ef, hc, hf).unwrap();
        let b = rate(s * ec, s * ef, hc, hf).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }
}

#[test]
fn report_rates_between_consecutive_rows_only() {
    let mut r = ErrorReport::new(CaseId::JumpInterface, 2, Stabilization::default());
    r.push(row(0.5, [0.8, 0.4, 0.8, 0.4, 0.4]));
    assert_eq!(r.finest_rates(), [None; 5]);
    r.push(row(0.25, [0.1, 0.1, 0.1, 0.1, 1e-12]));
    let rates = r.finest_rates();
    assert!((rates[0].unwrap() - 3.0).abs() < 1e-12);
    assert!((rates[1].unwrap() - 2.0).abs() < 1e-12);
    assert!(rates[4].unwrap() > 30.0);
    r.push(row(0.125, [0.0125, 0.025, 0.0125, 0.025, 1e-13]));
    assert_eq!(r.finest_rates()[4], None);
    assert!(r.rows[0].rates.iter().all(Option::is_none));
}

#[test]
fn csv_layout_and_timing_column() {
    let mut r = ErrorReport::new(CaseId::JumpInterface, 2, Stabilization::default());
    r.push(row(0.5, [0.8, 0.4, 0.8, 0.4, 0.4]));
    r.push(row(0.25, [0.1, 0.1, 0.1, 0.1, 0.1]));
    let csv = r.to_csv(false);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "h,E0_u,r0_u,E1_u,r1_u,E0_p,r0_p,E1_p,r1_p,E0_psi,r0_psi,wall_s");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",-"));
    assert_eq!(lines[1].split(',').filter(|f| *f == "-").count(), 6);
    assert_eq!(lines[2].split(',').nth(2), Some("3.0000"));
    assert!(r.to_csv(true).lines().nth(1).unwrap().ends_with(",1.500"));
    assert_eq!(csv, r.clone().to_csv(false));

    let mut t = ErrorReport::new(CaseId::Transient, 2, Stabilization::default());
    t.push(ErrorRow { dt: Some(0.078125), ..row(0.28, [1.0; 5]) });
    assert!(t.to_csv(false).starts_with("h,dt,E0_u"));
    assert!(t.to_table().contains("dt"));
}

fn two_by_two() -> (PolygonalMesh, DofMap, ManufacturedCase) {
    let case = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let mesh = case.mesh(1, 0).unwrap().mesh;
    let dofs = build_dof_map(&mesh, 2, |t, _| EdgeBc::standard(t)).unwrap();
    (mesh, dofs, case)
}

#[test]
fn interpolated_polynomials_have_no_error() {
    let (mesh, dofs, case) = two_by_two();
    // u in P2 and p in P1 make psi a P1 field
    let f = |x: Jet, y: Jet, _t: Jet| [x * y + x.powi(2) * 0.5 - 1.0, y.powi(2) - x * 3.0, x * 2.0 - y + 0.5];
    let exact = ExactFields::new(f, case.params, true);
    let s = interpolate_exact(&mesh, &dofs, &exact, 0.0).unwrap();
    let e = field_errors(&mesh, &dofs, &s, &exact, 0.0).unwrap();
    assert!(e.as_array().iter().all(|&v| v < 1e-9), "{e:?}");
}

#[test]
fn zero_fields_have_exactly_zero_error() {
    let (mesh, dofs, case) = two_by_two();
    let exact = ExactFields::new(|x, _, _| [x * 0.0, x * 0.0, x * 0.0], case.params, true);
    let e = field_errors(&mesh, &dofs, &Solution::zeros(&dofs, 0.0), &exact, 0.0).unwrap();
    assert_eq!(e.as_array(), [0.0; 5]);
}

#[test]
fn consolidation_case_has_no_errors() {
    let (mesh, dofs, _) = two_by_two();
    let mandel = ManufacturedCase::get(CaseId::Mandel).unwrap();
    let r = compute_errors(&mesh, &dofs, &Solution::zeros(&dofs, 0.0), &mandel, 0.0);
    assert!(matches!(r, Err(VemError::Unavailable(_))));
    let study = run_convergence_study(&mandel, 2, Stabilization::default(), &[1], DtRule::Fixed { dt: 50.0 }, 0);
    assert!(matches!(study, Err(StudyFailure { level: 1, source: VemError::Unavailable(_), .. })));
}

#[test]
fn interpolation_gradient_error_is_second_order() {
    let case = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let errs: Vec<(f64, FieldErrors)> = [3, 4]
        .iter()
        .map(|&l| {
            let mesh = case.mesh(l, 0).unwrap().mesh;
            let dofs = build_dof_map(&mesh, 2, |t, n| case.edge_bc(t, n)).unwrap();
            (mesh.h(), interpolation_errors(&mesh, &dofs, &case, 0.0).unwrap())
        })
        .collect();
    let r1u = rate(errs[0].1.e1_u, errs[1].1.e1_u, errs[0].0, errs[1].0).unwrap();
    let r1p = rate(errs[0].1.e1_p, errs[1].1.e1_p, errs[0].0, errs[1].0).unwrap();
    assert!((r1u - 2.0).abs() < 0.25, "{r1u}");
    assert!((r1p - 2.0).abs() < 0.25, "{r1p}");
}

#[test]
fn time_step_rule_must_fit_the_data() {
    let case = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let r = run_level(&case, 2, Stabilization::default(), 1, DtRule::HSquared, 0);
    assert!(matches!(r, Err(VemError::Config(_))));
    let case = ManufacturedCase::get(CaseId::Transient).unwrap();
    let r = run_level(&case, 2, Stabilization::default(), 1, DtRule::Stationary, 0);
    assert!(matches!(r, Err(VemError::Config(_))));
}

#[test]
fn single_level_study_has_no_rates() {
    let case = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let r = run_convergence_study(&case, 2, Stabilization::default(), &[1], DtRule::Stationary, 0).unwrap();
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.finest_rates(), [None; 5]);
    assert!(r.rows[0].max_residual <= crate::assembly::RESIDUAL_TOL);
    assert!(r.rows[0].errors.as_array().iter().all(|&e| e > 0.0 && e.is_finite()));
}
