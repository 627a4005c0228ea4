mod common;

use biotvem::forms::StabilizerKind;
use biotvem::manufactured::{CaseId, ManufacturedCase};
use biotvem::verify::run_convergence_study;
use common::criteria::{self, stab};

#[test]
fn patch_test_reproduces_polynomials_with_both_stabilizers() {
    for kind in [StabilizerKind::DofiDofi, StabilizerKind::TangentialEdge] {
        let o = criteria::patch_test(kind);
        assert!(o.pass, "{}", o.detail);
        assert!(o.max_residual <= biotvem::assembly::RESIDUAL_TOL);
    }
}

#[test]
fn patch_mesh_has_three_convex_cells_across_the_interface() {
    let mesh = criteria::patch_mesh();
    assert_eq!(mesh.num_cells(), 3);
    assert_eq!(mesh.interface_edges().len(), 2);
    assert!((mesh.total_area() - 2.0).abs() < 1e-14);
}

#[test]
fn inf_sup_constant_is_stable_under_refinement() {
    let case = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let betas: Vec<f64> = (1..=3).map(|l| criteria::inf_sup_constant(&case.mesh(l, 0).unwrap().mesh)).collect();
    let max = betas.iter().copied().fold(0.0, f64::max);
    let min = betas.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min > 0.05, "{betas:?}");
    assert!((max - min) / max <= 0.2, "{betas:?}");
}

#[test]
fn local_projection_suite_on_random_polygons() {
    let o = criteria::projector_suite(50);
    assert!(o.pass, "{}", o.detail);
}

#[test]
fn green_moments_and_projectors_match_oracles() {
    let o = criteria::oracle_equivalence();
    assert!(o.pass, "{}", o.detail);
}

#[test]
fn consolidation_run_is_stable_and_drains() {
    let o = criteria::consolidation(1);
    assert!(o.pass, "{}", o.detail);
    assert!(o.max_residual <= biotvem::assembly::RESIDUAL_TOL, "{}", o.max_residual);
}

#[test]
fn consolidation_energy_decays_after_release() {
    let run = criteria::run_consolidation(1, 10).unwrap();
    let e = &run.energies_after_release;
    assert!(e.len() > 10);
    assert!(e.last().unwrap() < &e[0]);
    assert_eq!(run.states, 10);
}

#[test]
fn pressure_errors_are_robust_in_the_incompressible_limit() {
    let levels = [1, 2, 3, 4];
    let base = ManufacturedCase::get(CaseId::JumpInterface).unwrap();
    let s = stab(StabilizerKind::DofiDofi);
    let baseline = run_convergence_study(&base, 2, s, &levels, base.dt_rule, 0).unwrap();
    let robust = criteria::nearly_incompressible_case();
    let robust = run_convergence_study(&robust, 2, s, &levels, robust.dt_rule, 0).unwrap();
    for (b, r) in baseline.rows.iter().zip(&robust.rows) {
        assert!(r.errors.e0_p <= 3.0 * b.errors.e0_p, "{} vs {}", r.errors.e0_p, b.errors.e0_p);
        assert!(r.errors.e1_p <= 3.0 * b.errors.e1_p, "{} vs {}", r.errors.e1_p, b.errors.e1_p);
        assert!(r.max_residual <= biotvem::assembly::RESIDUAL_TOL);
    }
}
