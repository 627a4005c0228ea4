//! Computable error proxies, observed convergence rates and the
//! convergence-study driver.
//!
//! For a discrete field `v_h` the proxies are `E0 = |v - Pi0_k v_h|` and
//! `E1 = |grad v - grad PiNabla_k v_h|` in `L2`, summed over cells with a
//! triangulated rule of degree `2k + 2`. The total pressure is already a
//! polynomial of degree `k - 1`, so only `E0` is measured for it.

#[cfg(test)]
mod tests;

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{
    assemble, interpolate_exact, set_initial_data, solve_stationary, BlockSystem, DofMap, Solution, TransientSolver,
};
use crate::error::{Result, VemError};
use crate::forms::{LoadProjection, Stabilization};
use crate::local_vem::LocalElementOperators;
use crate::manufactured::{CaseId, CaseMesh, DtRule, ExactFields, ManufacturedCase};
use crate::mesh::{PolygonalMesh, Subdomain};
use crate::polykernel::{dim, polygon_quadrature};

/// Errors below this are treated as exact; no rate is reported for them.
pub const RATE_FLOOR: f64 = 1e-9;

/// Column names of the five measured quantities, in table order.
pub const ERROR_NAMES: [&str; 5] = ["E0_u", "E1_u", "E0_p", "E1_p", "E0_psi"];
/// Column names of the matching rates.
pub const RATE_NAMES: [&str; 5] = ["r0_u", "r1_u", "r0_p", "r1_p", "r0_psi"];

/// Observed rate `log(E_c / E_f) / log(h_c / h_f)`; `None` (undefined) for
/// nonpositive errors or mesh sizes that do not decrease.
pub fn rate(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0 && h_fine > 0.0 && h_coarse > h_fine) {
        return None;
    }
    let r = (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln();
    r.is_finite().then_some(r)
}

/// As [`rate`] but undefined when both errors are below [`RATE_FLOOR`].
pub fn rate_above_floor(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    if e_coarse < RATE_FLOOR && e_fine < RATE_FLOOR {
        return None;
    }
    rate(e_coarse, e_fine, h_coarse, h_fine)
}

/// The five proxies of one discrete solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FieldErrors {
    pub e0_u: f64,
    pub e1_u: f64,
    pub e0_p: f64,
    pub e1_p: f64,
    pub e0_psi: f64,
}

impl FieldErrors {
    pub fn as_array(&self) -> [f64; 5] {
        [self.e0_u, self.e1_u, self.e0_p, self.e1_p, self.e0_psi]
    }
}

/// Squared proxies of one cell.
fn cell_errors(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    solution: &Solution,
    exact: &ExactFields,
    t: f64,
    c: usize,
) -> Result<[f64; 5]> {
    let sub = mesh.cell_tags()[c];
    let k = dofs.k;
    let ops = LocalElementOperators::new(&mesh.cell_points(c), k)?;
    let (v, q, z) = solution.cell_dofs(dofs, c);
    let v = DVector::from_vec(v);
    let u0 = &ops.l2 * &v;
    let u1 = &ops.nabla * &v;
    let poro = sub == Subdomain::Poro;
    let (p0, p1) = if poro {
        let q = DVector::from_vec(q);
        (&ops.q.l2 * &q, &ops.q.nabla * &q)
    } else {
        (DVector::zeros(0), DVector::zeros(0))
    };
    let psi = &ops.z_coeffs * DVector::from_vec(z);
    let nk1 = dim(k as isize - 1);
    let rule = polygon_quadrature(&ops.poly.vertices, 2 * k + 2);
    let mut acc = [0.0; 5];
    for (&x, &w) in rule.points.iter().zip(&rule.weights) {
        let s = exact.sample(x, t, sub);
        let uh = ops.eval_vector(u0.as_slice(), x);
        let gh = ops.eval_vector_grad(u1.as_slice(), x);
        acc[0] += w * ((s.u[0] - uh[0]).powi(2) + (s.u[1] - uh[1]).powi(2));
        acc[1] += w * (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (s.grad_u[i][j] - gh[i][j]).powi(2))
            .sum::<f64>();
        let m = ops.basis.eval(x);
        if poro {
            let ph: f64 = p0.iter().zip(&m).map(|(a, b)| a * b).sum();
            let g = ops.basis.eval_grad(x);
            let gp = p1.iter().zip(&g).fold([0.0; 2], |acc, (a, gm)| [acc[0] + a * gm[0], acc[1] + a * gm[1]]);
            acc[2] += w * (s.p - ph).powi(2);
            acc[3] += w * ((s.grad_p[0] - gp[0]).powi(2) + (s.grad_p[1] - gp[1]).powi(2));
        }
        let zh: f64 = psi.iter().zip(&m[..nk1]).map(|(a, b)| a * b).sum();
        acc[4] += w * (s.psi - zh).powi(2);
    }
    // cancellation in the sums can leave tiny negative values on exact cells
    Ok(acc.map(|e| e.max(0.0)))
}

/// Error proxies of `solution` against explicit exact fields at time `t`.
pub fn field_errors(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    solution: &Solution,
    exact: &ExactFields,
    t: f64,
) -> Result<FieldErrors> {
    let parts: Vec<Result<[f64; 5]>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| cell_errors(mesh, dofs, solution, exact, t, c))
        .collect();
    let mut sum = [0.0; 5];
    for p in parts {
        let p = p?;
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    let [e0_u, e1_u, e0_p, e1_p, e0_psi] = sum.map(f64::sqrt);
    Ok(FieldErrors { e0_u, e1_u, e0_p, e1_p, e0_psi })
}

/// Error proxies against the exact fields of `case`; unavailable for the
/// consolidation test.
pub fn compute_errors(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    solution: &Solution,
    case: &ManufacturedCase,
    t: f64,
) -> Result<FieldErrors> {
    field_errors(mesh, dofs, solution, case.exact_fields()?, t)
}

/// One mesh of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub level: usize,
    /// Largest cell diameter.
    pub h: f64,
    /// Square root of the mean cell area. Rates use this size: on Voronoi
    /// meshes the largest diameter follows a few outlier cells.
    pub h_rate: f64,
    /// Time step of transient runs.
    pub dt: Option<f64>,
    pub steps: usize,
    pub cells: usize,
    pub unknowns: usize,
    pub errors: FieldErrors,
    /// Rates against the previous row, in [`RATE_NAMES`] order.
    pub rates: [Option<f64>; 5],
    /// Largest relative residual over all linear solves.
    pub max_residual: f64,
    pub wall_s: f64,
}

/// Table of errors and rates over a mesh sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub case: CaseId,
    pub k: usize,
    pub stab: Stabilization,
    pub rows: Vec<ErrorRow>,
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

impl ErrorReport {
    pub fn new(case: CaseId, k: usize, stab: Stabilization) -> Self {
        Self { case, k, stab, rows: Vec::new() }
    }

    /// Append a row, filling its rates from the previous one.
    pub fn push(&mut self, mut row: ErrorRow) {
        row.rates = match self.rows.last() {
            Some(prev) => {
                let (ec, ef) = (prev.errors.as_array(), row.errors.as_array());
                std::array::from_fn(|i| rate_above_floor(ec[i], ef[i], prev.h_rate, row.h_rate))
            }
            None => [None; 5],
        };
        self.rows.push(row);
    }

    /// Rates of the last row.
    pub fn finest_rates(&self) -> [Option<f64>; 5] {
        self.rows.last().map_or([None; 5], |r| r.rates)
    }

    pub fn is_transient(&self) -> bool {
        self.rows.iter().any(|r| r.dt.is_some())
    }

    /// CSV in table column order. Wall times are written only with `timing`
    /// so that repeated runs produce identical files.
    pub fn to_csv(&self, timing: bool) -> String {
        let transient = self.is_transient();
        let mut out = String::from("h");
        if transient {
            out.push_str(",dt");
        }
        for (e, r) in ERROR_NAMES.iter().zip(RATE_NAMES) {
            let _ = write!(out, ",{e},{r}");
        }
        out.push_str(",wall_s\n");
        for row in &self.rows {
            let _ = write!(out, "{:.6e}", row.h);
            if transient {
                let _ = write!(out, ",{}", row.dt.map_or_else(|| "-".into(), |d| format!("{d:.6e}")));
            }
            for (e, r) in row.errors.as_array().iter().zip(row.rates) {
                let _ = write!(out, ",{e:.6e},{}", fmt_opt(r, 4));
            }
            let wall = if timing { format!("{:.3}", row.wall_s) } else { "-".into() };
            let _ = writeln!(out, ",{wall}");
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let transient = self.is_transient();
        let mut out = format!("{} k={} stabilizer={}\n", self.case, self.k, self.stab.kind);
        let _ = write!(out, "{:>9}", "h");
        if transient {
            let _ = write!(out, " {:>9}", "dt");
        }
        for (e, r) in ERROR_NAMES.iter().zip(RATE_NAMES) {
            let _ = write!(out, " {e:>10} {r:>6}");
        }
        let _ = writeln!(out, " {:>8}", "wall_s");
        for row in &self.rows {
            let _ = write!(out, "{:>9.3e}", row.h);
            if transient {
                let _ = write!(out, " {:>9}", row.dt.map_or_else(|| "-".into(), |d| format!("{d:.3e}")));
            }
            for (e, r) in row.errors.as_array().iter().zip(row.rates) {
                let _ = write!(out, " {e:>10.3e} {:>6}", fmt_opt(r, 2));
            }
            let _ = writeln!(out, " {:>8.2}", row.wall_s);
        }
        out
    }
}

/// Everything produced on one refinement level.
#[derive(Debug)]
pub struct LevelRun {
    pub mesh: CaseMesh,
    pub system: BlockSystem,
    pub solution: Solution,
    pub row: ErrorRow,
}

/// Time-stepping rules must match the exact data of the case: stationary
/// data has no time derivatives in its source.
fn check_dt_rule(case: &ManufacturedCase, dt_rule: DtRule) -> Result<()> {
    let stationary_data = case.exact.as_ref().is_some_and(|e| e.stationary);
    let stationary_rule = matches!(dt_rule, DtRule::Stationary);
    if stationary_data != stationary_rule {
        return Err(VemError::Config(format!(
            "time-step rule {dt_rule:?} does not fit the {} data of case {}",
            if stationary_data { "stationary" } else { "transient" },
            case.id
        )));
    }
    Ok(())
}

/// Discrete solution of one mesh, without error evaluation.
#[derive(Debug)]
pub struct Simulation {
    pub system: BlockSystem,
    pub solution: Solution,
    pub dt: Option<f64>,
    pub steps: usize,
    /// Largest relative residual over all linear solves.
    pub max_residual: f64,
}

/// Assemble and solve `case` on `mesh` up to its final time. `observe` sees
/// the stationary solution, or the initial state and every time step.
pub fn simulate(
    case: &ManufacturedCase,
    mesh: &PolygonalMesh,
    k: usize,
    stab: Stabilization,
    load_projection: LoadProjection,
    dt_rule: DtRule,
    mut observe: impl FnMut(&BlockSystem, &Solution, usize),
) -> Result<Simulation> {
    check_dt_rule(case, dt_rule)?;
    let mut system = assemble(mesh, k, case, stab)?;
    system.load_projection = load_projection;
    let t = case.t_final;
    let (solution, dt, steps, max_residual) = match dt_rule.steps(mesh.h(), t) {
        None => {
            let s = solve_stationary(mesh, &system, case, t)?;
            observe(&system, &s, 0);
            let r = s.residual;
            (s, None, 0, r)
        }
        Some((dt, n)) => {
            let initial = set_initial_data(mesh, &system.dofs, case, 0.0, dt)?;
            observe(&system, &initial.solution, 0);
            let solver = TransientSolver::new(mesh, &system, dt)?;
            let mut worst = 0.0f64;
            let end = solver.run(initial, n, case, |s| {
                worst = worst.max(s.solution.residual);
                observe(&system, &s.solution, s.step);
            })?;
            (end.solution, Some(dt), n, worst)
        }
    };
    Ok(Simulation { system, solution, dt, steps, max_residual })
}

/// Solve one mesh and measure its errors at the final time. `observe` is
/// passed on to [`simulate`].
#[allow(clippy::too_many_arguments)]
pub fn run_mesh_level(
    case: &ManufacturedCase,
    mesh: CaseMesh,
    level: usize,
    k: usize,
    stab: Stabilization,
    load_projection: LoadProjection,
    dt_rule: DtRule,
    observe: impl FnMut(&BlockSystem, &Solution, usize),
) -> Result<LevelRun> {
    let exact = case.exact_fields()?;
    let start = Instant::now();
    let m = &mesh.mesh;
    let sim = simulate(case, m, k, stab, load_projection, dt_rule, observe)?;
    let errors = field_errors(m, &sim.system.dofs, &sim.solution, exact, sim.solution.t)?;
    let row = ErrorRow {
        level,
        h: m.h(),
        h_rate: (m.total_area() / m.num_cells() as f64).sqrt(),
        dt: sim.dt,
        steps: sim.steps,
        cells: m.num_cells(),
        unknowns: sim.system.dofs.n_free(),
        errors,
        rates: [None; 5],
        max_residual: sim.max_residual,
        wall_s: start.elapsed().as_secs_f64(),
    };
    Ok(LevelRun { mesh, system: sim.system, solution: sim.solution, row })
}

/// Solve one refinement level of the case's mesh recipe and measure its
/// errors at the final time.
pub fn run_level(
    case: &ManufacturedCase,
    k: usize,
    stab: Stabilization,
    level: usize,
    dt_rule: DtRule,
    seed: u64,
) -> Result<LevelRun> {
    case.exact_fields()?;
    check_dt_rule(case, dt_rule)?;
    let mesh = case.mesh(level, seed)?;
    run_mesh_level(case, mesh, level, k, stab, LoadProjection::default(), dt_rule, |_, _, _| {})
}

/// A study that stopped on a failing level, with the rows finished so far.
#[derive(Debug, thiserror::Error)]
#[error("refinement level {level} failed: {source}")]
pub struct StudyFailure {
    pub level: usize,
    pub partial: ErrorReport,
    #[source]
    pub source: VemError,
}

/// Convergence study over `levels` (coarse to fine). Levels run one after
/// the other; assembly and error evaluation are parallel within a level.
pub fn run_convergence_study(
    case: &ManufacturedCase,
    k: usize,
    stab: Stabilization,
    levels: &[usize],
    dt_rule: DtRule,
    seed: u64,
) -> std::result::Result<ErrorReport, StudyFailure> {
    run_convergence_study_with(case, k, stab, levels, dt_rule, seed, |_| {})
}

/// As [`run_convergence_study`], calling `observe` after every level.
pub fn run_convergence_study_with(
    case: &ManufacturedCase,
    k: usize,
    stab: Stabilization,
    levels: &[usize],
    dt_rule: DtRule,
    seed: u64,
    mut observe: impl FnMut(&LevelRun),
) -> std::result::Result<ErrorReport, StudyFailure> {
    let mut report = ErrorReport::new(case.id, k, stab);
    for &level in levels {
        match run_level(case, k, stab, level, dt_rule, seed) {
            Ok(run) => {
                observe(&run);
                log::info!(
                    "{} level {level}: h = {:.3e}, {} unknowns, {:.2} s",
                    case.id,
                    run.row.h,
                    run.row.unknowns,
                    run.row.wall_s
                );
                report.push(run.row);
            }
            Err(source) => return Err(StudyFailure { level, partial: report, source }),
        }
    }
    Ok(report)
}

/// Interpolation errors of the exact fields of `case` at time `t` on one
/// level, used to check approximation orders independently of the solver.
pub fn interpolation_errors(mesh: &PolygonalMesh, dofs: &DofMap, case: &ManufacturedCase, t: f64) -> Result<FieldErrors> {
    let exact = case.exact_fields()?;
    let s = interpolate_exact(mesh, dofs, exact, t)?;
    field_errors(mesh, dofs, &s, exact, t)
}
