use std::path::PathBuf;
use std::process::ExitCode;

use biotvem_cli::config::{OutputConfig, ParamOverrides, SolverConfig, StabilizationConfig};
use biotvem_cli::{run, CliError, RunConfig};
use biotvem::{CaseId, ManufacturedCase};
use clap::{Args, Parser, Subcommand};

/// Environment variable holding the number of worker threads.
const THREADS_VAR: &str = "BIOTVEM_THREADS";

#[derive(Parser)]
#[command(name = "biotvem", version, about = "Virtual element solver for coupled Biot / elasticity problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study or a consolidation simulation.
    Run(RunArgs),
    /// Check a configuration and print the resolved settings.
    Validate(RunArgs),
    /// Write the mesh of one refinement level as JSON.
    Mesh(MeshArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// jump-interface, small-edges, transient, circle-interface or mandel.
    #[arg(long)]
    case: Option<String>,
    /// Polynomial degree (at least 2).
    #[arg(long)]
    k: Option<usize>,
    /// dofi-dofi or tangential-edge.
    #[arg(long)]
    stab: Option<String>,
    /// Forms using the edge stabiliser: displacement or all.
    #[arg(long)]
    scope: Option<String>,
    /// Refinement levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// stationary, h2 or fixed:DT.
    #[arg(long)]
    dt_rule: Option<String>,
    /// full or moments.
    #[arg(long)]
    load_projection: Option<String>,
    /// JSON mesh replacing the generated one.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Seed of the polygonal mesh generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of VTK snapshots.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Displacement scale of the snapshot geometry.
    #[arg(long)]
    warp: Option<f64>,
    /// Add wall-clock times to the outputs.
    #[arg(long)]
    timing: bool,
    /// Largest accepted relative residual.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Parameter overrides such as poisson_p=0.49999 (repeatable).
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long)]
    case: CaseId,
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination JSON file.
    #[arg(long)]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::read(path)?,
            None => RunConfig::default(),
        };
        let cli = RunConfig {
            case: self.case.clone(),
            k: self.k,
            levels: self.levels.clone(),
            seed: self.seed,
            dt_rule: self.dt_rule.clone(),
            load_projection: self.load_projection.clone(),
            mesh_file: self.mesh.clone(),
            stabilization: StabilizationConfig { kind: self.stab.clone(), scope: self.scope.clone() },
            params: parse_overrides(&self.set)?,
            solver: SolverConfig { residual_tol: self.residual_tol },
            output: OutputConfig {
                dir: self.out.clone(),
                snapshots: self.snapshots,
                timing: self.timing.then_some(true),
                warp: self.warp,
            },
        };
        Ok(base.merge(cli))
    }
}

fn parse_overrides(items: &[String]) -> Result<ParamOverrides, CliError> {
    let mut p = ParamOverrides::default();
    let mut issues = Vec::new();
    for item in items {
        let Some((name, value)) = item.split_once('=') else {
            issues.push(format!("--set expects NAME=VALUE (got `{item}`)"));
            continue;
        };
        let Ok(v) = value.trim().parse::<f64>() else {
            issues.push(format!("--set {name}: `{value}` is not a number"));
            continue;
        };
        let slot = match name.trim() {
            "young_p" => &mut p.young_p,
            "poisson_p" => &mut p.poisson_p,
            "young_e" => &mut p.young_e,
            "poisson_e" => &mut p.poisson_e,
            "kappa" => &mut p.kappa,
            "alpha" => &mut p.alpha,
            "c0" => &mut p.c0,
            "eta" => &mut p.eta,
            other => {
                issues.push(format!("--set: unknown parameter `{other}`"));
                continue;
            }
        };
        *slot = Some(v);
    }
    if issues.is_empty() {
        Ok(p)
    } else {
        Err(CliError::Invalid(issues))
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Invalid(vec![format!("{THREADS_VAR} must be a positive integer (got `{value}`)")]))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(vec![format!("cannot start {n} threads: {e}")]))
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Validate(args) => {
            let resolved = args.config()?.resolve()?;
            println!("{}", resolved.summary());
            println!("configuration OK");
        }
        Command::Run(args) => {
            let resolved = args.config()?.resolve()?;
            let summary = run::execute(&resolved)?;
            if let Some(report) = &summary.report {
                print!("{}", report.to_table());
            }
            if let (Some(first), Some(last)) = (summary.history.first(), summary.history.last()) {
                println!(
                    "{} steps to t = {:.4e}; top settlement {:.4e} -> {:.4e}; energy {:.4e} -> {:.4e}",
                    last.step, last.t, first.top_uy, last.top_uy, first.energy, last.energy
                );
            }
            for f in &summary.files {
                log::info!("wrote {}", f.display());
            }
            println!("wrote {} files to {}", summary.files.len(), resolved.out.display());
        }
        Command::Mesh(args) => {
            let case = ManufacturedCase::get(args.case)?;
            let mesh = case.mesh(args.level, args.seed)?.mesh;
            mesh.write_json(&args.out)?;
            println!("{} cells, h = {:.4e}", mesh.num_cells(), mesh.h());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
