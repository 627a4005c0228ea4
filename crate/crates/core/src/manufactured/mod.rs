//! Registry of the verification experiments: exact solutions, the forcing
//! and boundary data they induce, material parameters, mesh recipes and
//! time-step rules.
//!
//! Forcing terms are not written out by hand. Each case supplies `u` and
//! `p` as closed-form expressions over [`Jet`], a second-order forward-mode
//! automatic differentiation type, and every derived quantity (total
//! pressure, body force, fluid source, tractions, fluxes) is computed from
//! the exact derivatives.

mod exact;
mod jet;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::forms::{Lame, MaterialParams};
use crate::mesh::{
    build_polygonal_mesh, build_rect_grid, merge_at_interface, EdgeTag, GeneratorInfo, PolygonalMesh, Rect,
    Subdomain, SubdomainSpec,
};

pub use exact::{ExactFields, ExactSample, FieldFn};
pub use jet::Jet;

/// Essential conditions carried by one boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EdgeBc {
    /// Displacement components with prescribed values.
    pub fix_u: [bool; 2],
    /// Pressure prescribed (poroelastic edges only).
    pub fix_p: bool,
}

impl EdgeBc {
    /// Clamped displacement on `Gamma_D`, prescribed pressure on the
    /// poroelastic `Gamma_N`, natural conditions elsewhere.
    pub fn standard(tag: EdgeTag) -> Self {
        match tag {
            EdgeTag::DirichletElastic | EdgeTag::DirichletPoro => Self { fix_u: [true; 2], fix_p: false },
            EdgeTag::NeumannPoro => Self { fix_u: [false; 2], fix_p: true },
            _ => Self::default(),
        }
    }

    /// As [`EdgeBc::standard`] but `Gamma_D` only fixes the normal
    /// component of an axis-aligned edge (sliding).
    pub fn sliding(tag: EdgeTag, normal: [f64; 2]) -> Self {
        match tag {
            EdgeTag::DirichletElastic | EdgeTag::DirichletPoro => {
                let normal_axis = usize::from(normal[1].abs() > normal[0].abs());
                let mut fix_u = [false; 2];
                fix_u[normal_axis] = true;
                Self { fix_u, fix_p: false }
            }
            _ => Self::standard(tag),
        }
    }
}

/// Data of a boundary value problem as seen by the assembler.
///
/// Loads are evaluated pointwise; the assembler integrates them. Natural
/// data are applied wherever the corresponding essential condition is
/// absent: tractions on free displacement components of boundary edges,
/// the traction jump on interface edges and fluid fluxes on poroelastic
/// boundary and interface edges without prescribed pressure.
pub trait ProblemData: Sync {
    fn params(&self) -> &MaterialParams;
    /// Drop the time derivatives of the pressure equation.
    fn is_stationary(&self) -> bool;
    fn edge_bc(&self, tag: EdgeTag, normal: [f64; 2]) -> EdgeBc;
    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn pressure(&self, x: [f64; 2], t: f64) -> f64;
    fn body_force(&self, x: [f64; 2], t: f64, sub: Subdomain) -> [f64; 2];
    fn source(&self, x: [f64; 2], t: f64) -> f64;
    /// Total traction on a boundary edge with outward normal `n`.
    fn traction(&self, x: [f64; 2], t: f64, n: [f64; 2], sub: Subdomain) -> [f64; 2];
    /// `(sigma^P - sigma^E) n` on the interface, `n` out of the poroelastic side.
    fn traction_jump(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2];
    /// Outgoing fluid flux `(kappa / eta) grad p . n`.
    fn flux(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> f64;
    /// Exact solution, if known.
    fn exact(&self) -> Option<&ExactFields>;
}

impl ProblemData for ExactFields {
    fn params(&self) -> &MaterialParams {
        &self.params
    }
    fn is_stationary(&self) -> bool {
        self.stationary
    }
    fn edge_bc(&self, tag: EdgeTag, _normal: [f64; 2]) -> EdgeBc {
        EdgeBc::standard(tag)
    }
    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.sample(x, t, Subdomain::Poro).u
    }
    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.sample(x, t, Subdomain::Poro).p
    }
    fn body_force(&self, x: [f64; 2], t: f64, sub: Subdomain) -> [f64; 2] {
        ExactFields::body_force(self, x, t, sub)
    }
    fn source(&self, x: [f64; 2], t: f64) -> f64 {
        ExactFields::source(self, x, t)
    }
    fn traction(&self, x: [f64; 2], t: f64, n: [f64; 2], sub: Subdomain) -> [f64; 2] {
        ExactFields::traction(self, x, t, n, sub)
    }
    fn traction_jump(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2] {
        ExactFields::traction_jump(self, x, t, n)
    }
    fn flux(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> f64 {
        ExactFields::flux(self, x, t, n)
    }
    fn exact(&self) -> Option<&ExactFields> {
        Some(self)
    }
}

/// The five experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    JumpInterface,
    SmallEdges,
    Transient,
    CircleInterface,
    Mandel,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [
        CaseId::JumpInterface,
        CaseId::SmallEdges,
        CaseId::Transient,
        CaseId::CircleInterface,
        CaseId::Mandel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::JumpInterface => "jump-interface",
            CaseId::SmallEdges => "small-edges",
            CaseId::Transient => "transient",
            CaseId::CircleInterface => "circle-interface",
            CaseId::Mandel => "mandel",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| VemError::Unknown { kind: "case", name: s.to_string() })
    }
}

/// Engineering parameters as stated for each experiment; Lamé constants
/// are derived per subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub young_p: f64,
    pub poisson_p: f64,
    pub young_e: f64,
    pub poisson_e: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub c0: f64,
    pub eta: f64,
}

impl PhysicalParams {
    pub fn material(&self) -> Result<MaterialParams> {
        let m = MaterialParams {
            poro: Lame::from_young_poisson(self.young_p, self.poisson_p)?,
            elastic: Lame::from_young_poisson(self.young_e, self.poisson_e)?,
            kappa: self.kappa,
            eta: self.eta,
            alpha: self.alpha,
            c0: self.c0,
        };
        m.validate()?;
        Ok(m)
    }
}

/// How the domain is split and meshed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshRecipe {
    /// Two stacked rectangles meshed by non-matching structured grids.
    /// Level `j` uses `(2^j + 1)^2` poroelastic and `(2^j + 2)^2` elastic cells.
    StackedGrids { poro: Rect, elastic: Rect },
    /// Voronoi tilings of an inclusion and its complement; level `j` targets
    /// `h = h0 / 2^(j-1)`.
    Polygonal { spec: SubdomainSpec, h0: f64 },
    /// Stacked rectangles with square cells of side `cell / 2^(j-1)`.
    UniformSquares { poro: Rect, elastic: Rect, cell: f64 },
}

/// Time discretisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtRule {
    /// No time stepping.
    Stationary,
    /// `dt ~ h^2`, rounded so that it divides the final time.
    HSquared,
    Fixed { dt: f64 },
}

impl DtRule {
    /// Step size and number of steps reaching `t_final` on a mesh of size `h`.
    pub fn steps(&self, h: f64, t_final: f64) -> Option<(f64, usize)> {
        let target = match *self {
            DtRule::Stationary => return None,
            DtRule::HSquared => h * h,
            DtRule::Fixed { dt } => dt,
        };
        let n = ((t_final / target).round() as usize).max(1);
        Some((t_final / n as f64, n))
    }
}

impl FromStr for DtRule {
    type Err = VemError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stationary" => Ok(DtRule::Stationary),
            "h2" | "h^2" | "h-squared" => Ok(DtRule::HSquared),
            _ => s
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|dt| *dt > 0.0)
                .map(|dt| DtRule::Fixed { dt })
                .ok_or_else(|| VemError::Unknown { kind: "time-step rule", name: s.to_string() }),
        }
    }
}

/// Loading of the consolidation test: a downward traction on the top edge
/// that is removed at `release`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopLoad {
    pub magnitude: f64,
    pub top: f64,
    pub release: f64,
}

/// A mesh of one refinement level, boundary tags assigned.
#[derive(Debug, Clone)]
pub struct CaseMesh {
    pub mesh: PolygonalMesh,
    pub generator: Option<GeneratorInfo>,
}

/// One fully specified experiment.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub physical: PhysicalParams,
    pub params: MaterialParams,
    /// `None` for the consolidation test.
    pub exact: Option<ExactFields>,
    pub recipe: MeshRecipe,
    pub dt_rule: DtRule,
    pub t_final: f64,
    pub load: Option<TopLoad>,
}

fn jump_interface(x: Jet, y: Jet, _t: Jet) -> [Jet; 3] {
    let ux = x * (1.0 - x) * (x * PI).cos() * (y * PI).sin() * 0.1;
    let uy = (y * PI).sin() * (y * PI).cos() * y.powi(2) * (2.0 - y) * 0.1;
    let p = (x * PI).sin() * (y * PI).sin();
    [ux, uy, p]
}

fn small_edges(x: Jet, y: Jet, _t: Jet) -> [Jet; 3] {
    let ux = x * (1.0 - x) * (x * PI).cos() * (y * (2.0 * PI)).sin() * 0.1;
    let uy = (x * PI).sin() * (y * PI).cos() * y.powi(2) * (1.0 - y) * 0.1;
    let p = ((x - 0.25) * (2.0 * PI)).cos() * ((y - 0.25) * (2.0 * PI)).sin();
    [ux, uy, p]
}

fn time_dependent(x: Jet, y: Jet, t: Jet) -> [Jet; 3] {
    let r = t.sin() * (x.powi(2) + y.powi(2));
    [r, r, r]
}

/// Final time of the transient convergence study. With `dt = h^2` rounded
/// to divide it, the coarsest meshes get `dt = 5/64, 5/256, ...`.
pub const TRANSIENT_T_FINAL: f64 = 0.625;

impl ManufacturedCase {
    pub fn get(id: CaseId) -> Result<Self> {
        let unit = Rect::new(0.0, 0.0, 1.0, 1.0);
        let (physical, exact_fn, stationary, recipe, dt_rule, t_final, load): (
            PhysicalParams,
            Option<FieldFn>,
            bool,
            MeshRecipe,
            DtRule,
            f64,
            Option<TopLoad>,
        ) = match id {
            CaseId::JumpInterface => (
                PhysicalParams {
                    young_p: 100.0,
                    poisson_p: 0.3,
                    young_e: 1e4,
                    poisson_e: 0.45,
                    kappa: 1e-6,
                    alpha: 0.1,
                    c0: 1e-3,
                    eta: 0.01,
                },
                Some(jump_interface),
                true,
                MeshRecipe::StackedGrids { poro: unit, elastic: Rect::new(0.0, 1.0, 1.0, 2.0) },
                DtRule::Stationary,
                0.0,
                None,
            ),
            CaseId::SmallEdges => (
                PhysicalParams {
                    young_p: 10.0,
                    poisson_p: 0.3,
                    young_e: 100.0,
                    poisson_e: 0.4,
                    kappa: 1.0,
                    alpha: 1.0,
                    c0: 1.0,
                    eta: 1.0,
                },
                Some(small_edges),
                true,
                MeshRecipe::Polygonal { spec: SubdomainSpec::square_inclusion(), h0: 0.28 },
                DtRule::Stationary,
                0.0,
                None,
            ),
            CaseId::Transient => (
                PhysicalParams {
                    young_p: 1.0,
                    poisson_p: 0.3,
                    young_e: 1.0,
                    poisson_e: 0.4,
                    kappa: 1.0,
                    alpha: 1.0,
                    c0: 1.0,
                    eta: 1.0,
                },
                Some(time_dependent),
                false,
                MeshRecipe::Polygonal { spec: SubdomainSpec::square_inclusion(), h0: 0.28 },
                DtRule::HSquared,
                TRANSIENT_T_FINAL,
                None,
            ),
            CaseId::CircleInterface => (
                PhysicalParams {
                    young_p: 100.0,
                    poisson_p: 0.49999,
                    young_e: 3e4,
                    poisson_e: 0.499,
                    kappa: 1e-4,
                    alpha: 1.0,
                    c0: 1e-3,
                    eta: 1.0,
                },
                Some(time_dependent),
                false,
                MeshRecipe::Polygonal { spec: SubdomainSpec::circle_inclusion(), h0: 0.28 },
                DtRule::HSquared,
                TRANSIENT_T_FINAL,
                None,
            ),
            CaseId::Mandel => (
                PhysicalParams {
                    young_p: 2.4e5,
                    poisson_p: 0.4,
                    young_e: 4.8e5,
                    poisson_e: 0.499,
                    kappa: 1e-6,
                    alpha: 1.0,
                    c0: 2.5e-4,
                    eta: 1e-3,
                },
                None,
                false,
                MeshRecipe::UniformSquares {
                    poro: Rect::new(0.0, 0.0, 100.0, 20.0),
                    elastic: Rect::new(0.0, 20.0, 100.0, 40.0),
                    cell: 2.0,
                },
                DtRule::Fixed { dt: 50.0 },
                5000.0,
                Some(TopLoad { magnitude: 5e4, top: 40.0, release: 2500.0 }),
            ),
        };
        let params = physical.material()?;
        Ok(Self {
            id,
            physical,
            params,
            exact: exact_fn.map(|f| ExactFields::new(f, params, stationary)),
            recipe,
            dt_rule,
            t_final,
            load,
        })
    }

    /// Replace the engineering parameters (robustness sweeps, overrides).
    pub fn with_physical(mut self, physical: PhysicalParams) -> Result<Self> {
        self.params = physical.material()?;
        self.physical = physical;
        if let Some(e) = self.exact.as_mut() {
            e.params = self.params;
        }
        Ok(self)
    }

    pub fn is_stationary(&self) -> bool {
        matches!(self.dt_rule, DtRule::Stationary)
    }

    /// Exact fields; the consolidation test has none.
    pub fn exact_fields(&self) -> Result<&ExactFields> {
        self.exact.as_ref().ok_or_else(|| VemError::Unavailable(self.id.to_string()))
    }

    pub fn eval_exact(&self, x: [f64; 2], t: f64, sub: Subdomain) -> Result<ExactSample> {
        Ok(self.exact_fields()?.sample(x, t, sub))
    }

    /// Boundary label of an edge with midpoint `mid` and outward normal.
    pub fn tag_rule(&self, _mid: [f64; 2], normal: [f64; 2], sub: Subdomain) -> EdgeTag {
        let vertical = normal[0].abs() > normal[1].abs();
        let (dirichlet, neumann) = match sub {
            Subdomain::Poro => (EdgeTag::DirichletPoro, EdgeTag::NeumannPoro),
            Subdomain::Elastic => (EdgeTag::DirichletElastic, EdgeTag::NeumannElastic),
        };
        match self.id {
            // clamped top and bottom, tractions and pressure on the sides
            CaseId::JumpInterface | CaseId::SmallEdges | CaseId::Transient | CaseId::CircleInterface => {
                if vertical {
                    neumann
                } else {
                    dirichlet
                }
            }
            // sliding left and bottom, free right and top
            CaseId::Mandel => {
                if normal[0] < -0.5 || normal[1] < -0.5 {
                    dirichlet
                } else {
                    neumann
                }
            }
        }
    }

    /// Mesh of refinement level `level >= 1` with boundary tags.
    pub fn mesh(&self, level: usize, seed: u64) -> Result<CaseMesh> {
        if level == 0 {
            return Err(VemError::InvalidArgument("refinement levels start at 1".into()));
        }
        let (mesh, generator) = match self.recipe {
            MeshRecipe::StackedGrids { poro, elastic } => {
                let np = (1usize << level) + 1;
                let ne = np + 1;
                let mp = build_rect_grid(poro, np, np, Subdomain::Poro)?;
                let me = build_rect_grid(elastic, ne, ne, Subdomain::Elastic)?;
                (merge_at_interface(&mp, &me)?, None)
            }
            MeshRecipe::Polygonal { spec, h0 } => {
                let target = h0 / f64::powi(2.0, level as i32 - 1);
                let (m, info) = build_polygonal_mesh(&spec, target, seed)?;
                (m, Some(info))
            }
            MeshRecipe::UniformSquares { poro, elastic, cell } => {
                let c = cell / f64::powi(2.0, level as i32 - 1);
                let n = |r: Rect| (((r.x1 - r.x0) / c).round() as usize, ((r.y1 - r.y0) / c).round() as usize);
                let (px, py) = n(poro);
                let (ex, ey) = n(elastic);
                let mp = build_rect_grid(poro, px.max(1), py.max(1), Subdomain::Poro)?;
                let me = build_rect_grid(elastic, ex.max(1), ey.max(1), Subdomain::Elastic)?;
                (merge_at_interface(&mp, &me)?, None)
            }
        };
        let mesh = mesh.with_boundary_tags(|mid, n, sub| self.tag_rule(mid, n, sub));
        Ok(CaseMesh { mesh, generator })
    }

    /// Step size and count for a mesh of size `h`; `None` when stationary.
    pub fn time_steps(&self, h: f64) -> Option<(f64, usize)> {
        self.dt_rule.steps(h, self.t_final)
    }

    fn top_traction(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2] {
        match self.load {
            Some(l) if t <= l.release + 1e-9 * l.release.abs() && n[1] > 0.5 && (x[1] - l.top).abs() < 1e-9 * l.top.abs().max(1.0) => {
                [0.0, -l.magnitude]
            }
            _ => [0.0; 2],
        }
    }
}

impl ProblemData for ManufacturedCase {
    fn params(&self) -> &MaterialParams {
        &self.params
    }
    fn is_stationary(&self) -> bool {
        ManufacturedCase::is_stationary(self)
    }
    fn edge_bc(&self, tag: EdgeTag, normal: [f64; 2]) -> EdgeBc {
        if self.load.is_some() {
            EdgeBc::sliding(tag, normal)
        } else {
            EdgeBc::standard(tag)
        }
    }
    fn displacement(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.exact.as_ref().map_or([0.0; 2], |e| e.displacement(x, t))
    }
    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.exact.as_ref().map_or(0.0, |e| e.pressure(x, t))
    }
    fn body_force(&self, x: [f64; 2], t: f64, sub: Subdomain) -> [f64; 2] {
        self.exact.as_ref().map_or([0.0; 2], |e| e.body_force(x, t, sub))
    }
    fn source(&self, x: [f64; 2], t: f64) -> f64 {
        self.exact.as_ref().map_or(0.0, |e| e.source(x, t))
    }
    fn traction(&self, x: [f64; 2], t: f64, n: [f64; 2], sub: Subdomain) -> [f64; 2] {
        match &self.exact {
            Some(e) => e.traction(x, t, n, sub),
            None => self.top_traction(x, t, n),
        }
    }
    fn traction_jump(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2] {
        self.exact.as_ref().map_or([0.0; 2], |e| e.traction_jump(x, t, n))
    }
    fn flux(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> f64 {
        self.exact.as_ref().map_or(0.0, |e| e.flux(x, t, n))
    }
    fn exact(&self) -> Option<&ExactFields> {
        self.exact.as_ref()
    }
}
