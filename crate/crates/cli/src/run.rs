//! Execution of a validated configuration.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use biotvem::manufactured::CaseMesh;
use biotvem::verify::{run_mesh_level, simulate, ErrorReport};
use biotvem::{BlockSystem, PolygonalMesh, Solution};

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{history_csv, mesh_hash, vtk_fields, write_file, write_vtk, HistoryRow, LevelMeta, Metadata};

/// What a run produced.
#[derive(Debug)]
pub struct RunSummary {
    /// Error table; `None` for cases without exact solution.
    pub report: Option<ErrorReport>,
    pub history: Vec<HistoryRow>,
    pub files: Vec<PathBuf>,
}

/// Steps at which to write `count` snapshots out of `n`, evenly spaced and
/// ending at the last step.
pub fn snapshot_steps(count: usize, n: usize) -> BTreeSet<usize> {
    (1..=count).map(|i| (2 * i * n + count) / (2 * count)).filter(|&s| s >= 1).collect()
}

fn load_mesh(cfg: &Resolved, level: usize) -> Result<CaseMesh, CliError> {
    match &cfg.mesh_file {
        Some(path) => {
            let mesh = PolygonalMesh::read_json(path).map_err(|e| match e {
                biotvem::VemError::Io(source) => CliError::Read { path: path.clone(), source },
                other => CliError::Level { level, source: other },
            })?;
            Ok(CaseMesh { mesh, generator: None })
        }
        None => cfg.case.mesh(level, cfg.seed).map_err(|source| CliError::Level { level, source }),
    }
}

pub fn execute(cfg: &Resolved) -> Result<RunSummary, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|source| CliError::Write { path: cfg.out.clone(), source })?;
    let case = &cfg.case;
    let exact = case.exact.is_some();
    let finest = *cfg.levels.last().expect("validated levels are not empty");
    let mut report = ErrorReport::new(case.id, cfg.k, cfg.stab);
    let mut levels = Vec::new();
    let mut history = Vec::new();
    let mut files = Vec::new();

    for &level in &cfg.levels {
        let mesh = load_mesh(cfg, level)?;
        let mesh_sha256 = mesh_hash(&mesh.mesh)?;
        let generator = mesh.generator.clone();
        let vtk_mesh = mesh.mesh.clone();
        let plan = match cfg.dt_rule.steps(mesh.mesh.h(), case.t_final) {
            None if cfg.snapshots > 0 => BTreeSet::from([0]),
            Some((_, n)) if level == finest => snapshot_steps(cfg.snapshots, n),
            _ => BTreeSet::new(),
        };
        let mut snaps: Vec<(usize, Solution)> = Vec::new();
        let mut hist = Vec::new();
        let observe = |sys: &BlockSystem, s: &Solution, step: usize| {
            if plan.contains(&step) {
                snaps.push((step, s.clone()));
            }
            if !exact && level == finest {
                hist.push(HistoryRow::new(sys, s, step));
            }
        };
        let start = Instant::now();
        let at = |source| CliError::Level { level, source };
        let (system, meta) = if exact {
            let run = run_mesh_level(case, mesh, level, cfg.k, cfg.stab, cfg.load_projection, cfg.dt_rule, observe)
                .map_err(at)?;
            let r = &run.row;
            let meta = (r.h, r.h_rate, r.cells, r.unknowns, r.dt, r.steps, r.max_residual);
            report.push(run.row);
            (run.system, meta)
        } else {
            let m = &mesh.mesh;
            let sim = simulate(case, m, cfg.k, cfg.stab, cfg.load_projection, cfg.dt_rule, observe).map_err(at)?;
            let h_rate = (m.total_area() / m.num_cells() as f64).sqrt();
            let meta = (m.h(), h_rate, m.num_cells(), sim.system.dofs.n_free(), sim.dt, sim.steps, sim.max_residual);
            (sim.system, meta)
        };
        let wall_s = start.elapsed().as_secs_f64();
        let (h, h_rate, cells, unknowns, dt, steps, max_residual) = meta;
        log::info!("{} level {level}: h = {h:.3e}, {unknowns} unknowns, {wall_s:.2} s", case.id);
        if max_residual > cfg.residual_tol {
            return Err(CliError::Residual { level, residual: max_residual, tol: cfg.residual_tol });
        }
        for (step, s) in &snaps {
            let name = if dt.is_some() {
                format!("snapshot_l{level}_{step:05}.vtk")
            } else {
                format!("solution_l{level}.vtk")
            };
            let path = cfg.out.join(name);
            let title = format!("{} level {level} t = {:.6e}", case.id, s.t);
            write_vtk(&path, &vtk_mesh, &vtk_fields(&vtk_mesh, &system.dofs, s, cfg.warp), &title)?;
            files.push(path);
        }
        history.extend(hist);
        levels.push(LevelMeta {
            level,
            h,
            h_rate,
            cells,
            unknowns,
            dt,
            steps,
            mesh_sha256,
            generator,
            sigma: system.sigma,
            max_residual,
            wall_s: cfg.timing.then_some(wall_s),
        });
    }

    if exact {
        let path = cfg.out.join("errors.csv");
        write_file(&path, &report.to_csv(cfg.timing))?;
        files.push(path);
    }
    if !history.is_empty() {
        let path = cfg.out.join("history.csv");
        write_file(&path, &history_csv(&history))?;
        files.push(path);
    }
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        case: case.id,
        k: cfg.k,
        stabilization: cfg.stab,
        load_projection: cfg.load_projection,
        dt_rule: cfg.dt_rule_name(),
        t_final: case.t_final,
        seed: cfg.seed,
        mesh_file: cfg.mesh_file.as_ref().map(|p| p.display().to_string()),
        physical: case.physical,
        material: case.params,
        residual_tol: cfg.residual_tol,
        levels,
    };
    let path = cfg.out.join("metadata.json");
    write_file(&path, &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    files.push(path);
    Ok(RunSummary { report: exact.then_some(report), history, files })
}
