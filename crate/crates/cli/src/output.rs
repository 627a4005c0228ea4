//! Files written by a run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use biotvem::assembly::{energy, SigmaSummary};
use biotvem::forms::{LoadProjection, MaterialParams, Stabilization};
use biotvem::manufactured::PhysicalParams;
use biotvem::mesh::GeneratorInfo;
use biotvem::mesh::vtk::{write_polydata, VtkFields};
use biotvem::{BlockSystem, CaseId, DofMap, PolygonalMesh, Solution, Subdomain};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_owned(), source })
}

/// Hex SHA-256 of the mesh in its JSON file layout.
pub fn mesh_hash(mesh: &PolygonalMesh) -> Result<String, CliError> {
    let json = mesh.to_json()?;
    Ok(Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Displacement and fluid pressure at the mesh vertices, cell means of the
/// total pressure and the subdomain of each cell.
pub fn vtk_fields(mesh: &PolygonalMesh, dofs: &DofMap, s: &Solution, warp: f64) -> VtkFields {
    let nv = mesh.num_vertices();
    let u: Vec<[f64; 2]> = (0..nv).map(|v| [s.u[DofMap::u_dof(v, 0)], s.u[DofMap::u_dof(v, 1)]]).collect();
    let p = (0..nv)
        .map(|v| dofs.node_q[v].map_or(0.0, |q| s.p[q - dofs.q_offset()]))
        .collect();
    let psi = dofs.cell_z.iter().map(|z| s.z[z[0] - dofs.z_offset()]).collect();
    let sub = mesh
        .cell_tags()
        .iter()
        .map(|t| match t {
            Subdomain::Poro => 0.0,
            Subdomain::Elastic => 1.0,
        })
        .collect();
    VtkFields {
        point_scalars: vec![("fluid_pressure".into(), p)],
        point_vectors: vec![("displacement".into(), u.clone())],
        cell_scalars: vec![("total_pressure_mean".into(), psi), ("subdomain".into(), sub)],
        deformation: Some(u.iter().map(|d| [warp * d[0], warp * d[1]]).collect()),
    }
}

pub fn write_vtk(path: &Path, mesh: &PolygonalMesh, fields: &VtkFields, title: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write { path: path.to_owned(), source };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    write_polydata(mesh, fields, title, &mut w)?;
    w.flush().map_err(err)
}

/// One time step of a run without exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub t: f64,
    pub energy: f64,
    /// Mean vertical displacement of the nodes on the top edge.
    pub top_uy: f64,
    pub max_abs_p: f64,
}

impl HistoryRow {
    pub fn new(system: &BlockSystem, s: &Solution, step: usize) -> Self {
        let d = &system.dofs;
        let ymax = d.node_points.iter().fold(f64::MIN, |m, p| m.max(p[1]));
        let tol = 1e-9 * ymax.abs().max(1.0);
        let (sum, n) = d
            .node_points
            .iter()
            .enumerate()
            .filter(|(_, p)| (p[1] - ymax).abs() <= tol)
            .fold((0.0, 0usize), |(s0, n), (i, _)| (s0 + s.u[DofMap::u_dof(i, 1)], n + 1));
        Self {
            step,
            t: s.t,
            energy: energy(system, s),
            top_uy: sum / n.max(1) as f64,
            max_abs_p: s.p.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("step,t,energy,top_uy_mean,max_abs_p\n");
    for r in rows {
        out.push_str(&format!("{},{:.6e},{:.6e},{:.6e},{:.6e}\n", r.step, r.t, r.energy, r.top_uy, r.max_abs_p));
    }
    out
}

/// Per-level record in `metadata.json`.
#[derive(Debug, Clone, Serialize)]
pub struct LevelMeta {
    pub level: usize,
    pub h: f64,
    pub h_rate: f64,
    pub cells: usize,
    pub unknowns: usize,
    pub dt: Option<f64>,
    pub steps: usize,
    pub mesh_sha256: String,
    pub generator: Option<GeneratorInfo>,
    pub sigma: SigmaSummary,
    pub max_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_s: Option<f64>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub case: CaseId,
    pub k: usize,
    pub stabilization: Stabilization,
    pub load_projection: LoadProjection,
    pub dt_rule: String,
    pub t_final: f64,
    pub seed: u64,
    pub mesh_file: Option<String>,
    pub physical: PhysicalParams,
    pub material: MaterialParams,
    pub residual_tol: f64,
    pub levels: Vec<LevelMeta>,
}
