//! Global numbering, boundary conditions, assembly and the stationary and
//! backward-Euler solves of the coupled three-field system.
//!
//! The monolithic system in the `[u | p | psi]` numbering reads
//!
//! ```text
//! A1 U + B1^T Z                         = F
//! (s A2t + tau A2) P - s B2 Z           = tau G + s (A2t P_prev - B2 Z_prev)
//! B1 U + B2^T P - A3 Z                  = 0
//! ```
//!
//! with `(s, tau) = (0, 1)` for stationary problems and `(1, dt)` for a
//! backward-Euler step. Essential conditions are eliminated: constrained
//! unknowns take their prescribed values and their columns are moved to the
//! right-hand side.

mod dofmap;
mod solver;
mod system;

use rayon::prelude::*;
use serde::Serialize;

pub use dofmap::{build_dof_map, Constraint, ConstraintKind, DofCounts, DofMap};
pub use solver::{LinearSolver, SparseMatrix, RESIDUAL_TOL};
pub use system::{quad_form, BlockSystem, SigmaSummary};

use crate::error::{Result, VemError};
use crate::local_vem::LocalElementOperators;
use crate::manufactured::{ExactFields, ProblemData};
use crate::mesh::{PolygonalMesh, Subdomain};

/// Discrete fields `(U, P, Z)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub t: f64,
    /// Relative residual of the linear solve (zero for interpolated data).
    pub residual: f64,
}

impl Solution {
    pub fn zeros(dofs: &DofMap, t: f64) -> Self {
        Self { u: vec![0.0; dofs.n_v], p: vec![0.0; dofs.n_q], z: vec![0.0; dofs.n_z], t, residual: 0.0 }
    }

    pub fn from_full(dofs: &DofMap, x: &[f64], t: f64, residual: f64) -> Self {
        let (q0, z0) = (dofs.q_offset(), dofs.z_offset());
        Self { u: x[..q0].to_vec(), p: x[q0..z0].to_vec(), z: x[z0..].to_vec(), t, residual }
    }

    pub fn full(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.u.len() + self.p.len() + self.z.len());
        x.extend(&self.u);
        x.extend(&self.p);
        x.extend(&self.z);
        x
    }

    /// Local DOF vectors of one cell.
    pub fn cell_dofs(&self, dofs: &DofMap, c: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (q0, z0) = (dofs.q_offset(), dofs.z_offset());
        (
            dofs.cell_v[c].iter().map(|&d| self.u[d]).collect(),
            dofs.cell_q[c].iter().map(|&d| self.p[d - q0]).collect(),
            dofs.cell_z[c].iter().map(|&d| self.z[d - z0]).collect(),
        )
    }

    /// Largest absolute difference to another solution, per field.
    pub fn max_diff(&self, other: &Solution) -> [f64; 3] {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        [d(&self.u, &other.u), d(&self.p, &other.p), d(&self.z, &other.z)]
    }
}

/// State of the time-stepping loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientState {
    pub solution: Solution,
    pub step: usize,
    pub dt: f64,
}

impl TransientState {
    pub fn t(&self) -> f64 {
        self.solution.t
    }
}

/// Factorisations of the monolithic matrix for fixed pressure-row weights.
// one instance per solve, so variant sizes do not matter
#[allow(clippy::large_enum_variant)]
#[derive(Debug)]
enum Factors {
    /// Time step: with the pressure rows negated the matrix is symmetric
    /// quasi-definite.
    Coupled(LinearSolver),
    /// Stationary: the pressure equation decouples; it is solved first and
    /// the symmetric displacement and total-pressure system after it.
    Split { p: LinearSolver, p_free: Vec<usize>, uz: LinearSolver, uz_free: Vec<usize> },
}

#[derive(Debug)]
struct Stepper {
    full: SparseMatrix,
    factors: Factors,
}

fn norm(x: impl Iterator<Item = f64>) -> f64 {
    x.map(|v| v * v).sum::<f64>().sqrt()
}

impl Stepper {
    fn new(system: &BlockSystem, storage: f64, diffusion: f64) -> Result<Self> {
        let dofs = &system.dofs;
        let full = system.full_matrix(storage, diffusion)?;
        let factors = if storage != 0.0 {
            Factors::Coupled(LinearSolver::factorize_symmetric(system.restrict(&full, &dofs.free, true)?)?)
        } else {
            let pressure = dofs.q_offset()..dofs.z_offset();
            let (p_free, uz_free): (Vec<usize>, Vec<usize>) = dofs.free.iter().partition(|i| pressure.contains(i));
            let p = LinearSolver::factorize_symmetric(system.restrict(&full, &p_free, false)?)?;
            let uz = LinearSolver::factorize_symmetric(system.restrict(&full, &uz_free, false)?)?;
            Factors::Split { p, p_free, uz, uz_free }
        };
        Ok(Self { full, factors })
    }

    /// Solve with full right-hand side `rhs` and essential values in `x`.
    /// Returns the relative residual of the reduced monolithic system.
    fn solve(&self, dofs: &DofMap, rhs: &[f64], mut x: Vec<f64>) -> Result<(Vec<f64>, f64)> {
        let (q0, z0) = (dofs.q_offset(), dofs.z_offset());
        let lift = self.full.mul_vec(&x);
        let reduced_rhs = norm(dofs.free.iter().map(|&i| rhs[i] - lift[i]));
        let sub_solve = |solver: &LinearSolver, keep: &[usize], lift: &[f64], x: &mut Vec<f64>, negate: bool| {
            let b: Vec<f64> = keep
                .iter()
                .map(|&i| {
                    let sign = if negate && (q0..z0).contains(&i) { -1.0 } else { 1.0 };
                    sign * (rhs[i] - lift[i])
                })
                .collect();
            let (xr, _) = solver.solve(&b)?;
            for (r, &i) in keep.iter().enumerate() {
                x[i] = xr[r];
            }
            Ok::<_, VemError>(())
        };
        match &self.factors {
            Factors::Coupled(s) => sub_solve(s, &dofs.free, &lift, &mut x, true)?,
            Factors::Split { p, p_free, uz, uz_free } => {
                sub_solve(p, p_free, &lift, &mut x, false)?;
                let lift = self.full.mul_vec(&x);
                sub_solve(uz, uz_free, &lift, &mut x, false)?;
            }
        }
        let r = self.full.residual(rhs, &x);
        let res = norm(dofs.free.iter().map(|&i| r[i]));
        let rel = if reduced_rhs > 0.0 { res / reduced_rhs } else { res };
        if !(rel <= RESIDUAL_TOL) {
            return Err(VemError::Singular(format!("relative residual {rel:.3e} above {RESIDUAL_TOL:e}")));
        }
        Ok((x, rel))
    }
}

fn check_pressure_data(dofs: &DofMap) -> Result<()> {
    if dofs.n_q > 0 && dofs.counts().fixed_p == 0 {
        return Err(VemError::Singular(
            "stationary pressure problem without prescribed pressure (suspected missing Dirichlet data)".into(),
        ));
    }
    Ok(())
}

/// Degree of freedom map, global blocks and loads for one problem on one
/// mesh.
pub fn assemble(
    mesh: &PolygonalMesh,
    k: usize,
    problem: &dyn ProblemData,
    stab: crate::forms::Stabilization,
) -> Result<BlockSystem> {
    let dofs = build_dof_map(mesh, k, |tag, n| problem.edge_bc(tag, n))?;
    BlockSystem::assemble(mesh, dofs, problem.params(), stab)
}

/// Solve the stationary system (time derivatives dropped) with data at `t`.
pub fn solve_stationary(
    mesh: &PolygonalMesh,
    system: &BlockSystem,
    problem: &dyn ProblemData,
    t: f64,
) -> Result<Solution> {
    check_pressure_data(&system.dofs)?;
    let stepper = Stepper::new(system, 0.0, 1.0)?;
    let rhs = system.loads(mesh, problem, t);
    let (x, res) = stepper.solve(&system.dofs, &rhs, system.dirichlet_vector(problem, t))?;
    Ok(Solution::from_full(&system.dofs, &x, t, res))
}

/// Backward-Euler integrator with the monolithic matrix factorised once.
#[derive(Debug)]
pub struct TransientSolver<'a> {
    mesh: &'a PolygonalMesh,
    system: &'a BlockSystem,
    dt: f64,
    stepper: Stepper,
}

impl<'a> TransientSolver<'a> {
    pub fn new(mesh: &'a PolygonalMesh, system: &'a BlockSystem, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(VemError::InvalidArgument(format!("time step {dt}")));
        }
        Ok(Self { mesh, system, dt, stepper: Stepper::new(system, 1.0, dt)? })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step from `state`.
    pub fn step(&self, state: &TransientState, problem: &dyn ProblemData) -> Result<TransientState> {
        let sys = self.system;
        let dofs = &sys.dofs;
        let t = state.t() + self.dt;
        let mut rhs = sys.loads(self.mesh, problem, t);
        let prev = state.solution.full();
        let mass = sys.a2t.mul_vec(&prev);
        let coupling = sys.b2.mul_vec(&prev);
        for i in dofs.q_offset()..dofs.z_offset() {
            rhs[i] = self.dt * rhs[i] + mass[i] - coupling[i];
        }
        let (x, res) = self.stepper.solve(dofs, &rhs, sys.dirichlet_vector(problem, t))?;
        Ok(TransientState {
            solution: Solution::from_full(dofs, &x, t, res),
            step: state.step + 1,
            dt: self.dt,
        })
    }

    /// Run `n` steps from `initial`, calling `observe` after every step.
    pub fn run(
        &self,
        initial: TransientState,
        n: usize,
        problem: &dyn ProblemData,
        mut observe: impl FnMut(&TransientState),
    ) -> Result<TransientState> {
        let mut state = initial;
        for _ in 0..n {
            state = self.step(&state, problem)?;
            observe(&state);
        }
        Ok(state)
    }
}

/// One backward-Euler step with a fresh factorisation.
pub fn step_backward_euler(
    mesh: &PolygonalMesh,
    system: &BlockSystem,
    state: &TransientState,
    problem: &dyn ProblemData,
) -> Result<TransientState> {
    TransientSolver::new(mesh, system, state.dt)?.step(state, problem)
}

/// DOF interpolant of exact fields: `u` and `p` by DOF sampling, `psi` by
/// cellwise `L2` projection onto `P_(k-1)`.
pub fn interpolate_exact(mesh: &PolygonalMesh, dofs: &DofMap, exact: &ExactFields, t: f64) -> Result<Solution> {
    let locals: Vec<Result<_>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let sub = mesh.cell_tags()[c];
            let ops = LocalElementOperators::new(&mesh.cell_points(c), dofs.k)?;
            let u = ops.interpolate_vector(|x| exact.sample(x, t, sub).u);
            let p = if sub == Subdomain::Poro {
                Some(ops.interpolate_scalar(|x| exact.sample(x, t, sub).p))
            } else {
                None
            };
            let z = ops.interpolate_z(|x| exact.sample(x, t, sub).psi);
            Ok((u, p, z))
        })
        .collect();
    let mut x = vec![0.0; dofs.total()];
    for (c, r) in locals.into_iter().enumerate() {
        let (u, p, z) = r?;
        for (l, &d) in dofs.cell_v[c].iter().enumerate() {
            x[d] = u[l];
        }
        if let Some(p) = p {
            for (l, &d) in dofs.cell_q[c].iter().enumerate() {
                x[d] = p[l];
            }
        }
        for (l, &d) in dofs.cell_z[c].iter().enumerate() {
            x[d] = z[l];
        }
    }
    Ok(Solution::from_full(dofs, &x, t, 0.0))
}

/// Initial state: interpolant of the exact fields at `t0` when known,
/// zero otherwise.
pub fn set_initial_data(
    mesh: &PolygonalMesh,
    dofs: &DofMap,
    problem: &dyn ProblemData,
    t0: f64,
    dt: f64,
) -> Result<TransientState> {
    let solution = match problem.exact() {
        Some(e) => interpolate_exact(mesh, dofs, e, t0)?,
        None => Solution::zeros(dofs, t0),
    };
    Ok(TransientState { solution, step: 0, dt })
}

/// Discrete energy
/// `1/2 [a1(u, u) + a2t(p, p) - 2 b2(p, psi) + a3(psi, psi)]`, which is
/// non-increasing along backward-Euler steps without loads.
pub fn energy(system: &BlockSystem, s: &Solution) -> f64 {
    let x = s.full();
    0.5 * (quad_form(&system.a1, &x, &x) + quad_form(&system.a2t, &x, &x) - 2.0 * quad_form(&system.b2, &x, &x)
        + quad_form(&system.a3, &x, &x))
}
