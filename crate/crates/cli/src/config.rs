//! Run configuration: TOML file, command-line overrides and validation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use biotvem::assembly::RESIDUAL_TOL;
use biotvem::forms::{LoadProjection, Stabilization};
use biotvem::manufactured::{DtRule, PhysicalParams};
use biotvem::{CaseId, EdgeStabScope, ManufacturedCase, StabilizerKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Contents of a configuration file. Every field is optional so that the
/// command line can fill in or override any of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub case: Option<String>,
    pub k: Option<usize>,
    pub levels: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub dt_rule: Option<String>,
    pub load_projection: Option<String>,
    /// JSON mesh used instead of the case's generator; runs a single level.
    pub mesh_file: Option<PathBuf>,
    #[serde(default)]
    pub stabilization: StabilizationConfig,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationConfig {
    pub kind: Option<String>,
    pub scope: Option<String>,
}

/// Replacements for the case's engineering parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub young_p: Option<f64>,
    pub poisson_p: Option<f64>,
    pub young_e: Option<f64>,
    pub poisson_e: Option<f64>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub c0: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Largest accepted relative residual of any linear solve.
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Number of VTK snapshots; zero disables them.
    pub snapshots: Option<usize>,
    /// Add a wall-clock column to the error table.
    pub timing: Option<bool>,
    /// Scale of the displacement applied to snapshot coordinates.
    pub warp: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|source| CliError::Toml { path: path.to_owned(), source: Box::new(source) })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_owned(), source })?;
        Self::from_toml(&text, path)
    }

    /// Overwrite every field set in `other`.
    pub fn merge(mut self, other: RunConfig) -> Self {
        fn pick<T>(a: &mut Option<T>, b: Option<T>) {
            if b.is_some() {
                *a = b;
            }
        }
        pick(&mut self.case, other.case);
        pick(&mut self.k, other.k);
        pick(&mut self.levels, other.levels);
        pick(&mut self.seed, other.seed);
        pick(&mut self.dt_rule, other.dt_rule);
        pick(&mut self.load_projection, other.load_projection);
        pick(&mut self.mesh_file, other.mesh_file);
        pick(&mut self.stabilization.kind, other.stabilization.kind);
        pick(&mut self.stabilization.scope, other.stabilization.scope);
        let (p, q) = (&mut self.params, other.params);
        pick(&mut p.young_p, q.young_p);
        pick(&mut p.poisson_p, q.poisson_p);
        pick(&mut p.young_e, q.young_e);
        pick(&mut p.poisson_e, q.poisson_e);
        pick(&mut p.kappa, q.kappa);
        pick(&mut p.alpha, q.alpha);
        pick(&mut p.c0, q.c0);
        pick(&mut p.eta, q.eta);
        pick(&mut self.solver.residual_tol, other.solver.residual_tol);
        pick(&mut self.output.dir, other.output.dir);
        pick(&mut self.output.snapshots, other.output.snapshots);
        pick(&mut self.output.timing, other.output.timing);
        pick(&mut self.output.warp, other.output.warp);
        self
    }

    /// Check everything and collect all problems before giving up.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mut issues = Vec::new();
        let mut parse = |field: &str, value: Option<&String>| -> Option<String> {
            let v = value.cloned();
            if let Some(s) = &v {
                if s.trim().is_empty() {
                    issues.push(format!("{field} is empty"));
                    return None;
                }
            }
            v
        };
        let case_name = parse("case", self.case.as_ref());
        let dt_name = parse("dt_rule", self.dt_rule.as_ref());
        let proj_name = parse("load_projection", self.load_projection.as_ref());
        let kind_name = parse("stabilization.kind", self.stabilization.kind.as_ref());
        let scope_name = parse("stabilization.scope", self.stabilization.scope.as_ref());

        let case = match case_name.as_deref().map(CaseId::from_str) {
            None => {
                issues.push("case is required".into());
                None
            }
            Some(Err(e)) => {
                issues.push(e.to_string());
                None
            }
            Some(Ok(id)) => match ManufacturedCase::get(id) {
                Ok(c) => Some(c),
                Err(e) => {
                    issues.push(e.to_string());
                    None
                }
            },
        };
        let dt_rule = parse_opt::<DtRule>(dt_name.as_deref(), &mut issues);
        let load_projection = parse_opt::<LoadProjection>(proj_name.as_deref(), &mut issues);
        let kind = parse_opt::<StabilizerKind>(kind_name.as_deref(), &mut issues);
        let scope = parse_opt::<EdgeStabScope>(scope_name.as_deref(), &mut issues);

        let k = self.k.unwrap_or(2);
        if k < 2 {
            issues.push(format!("k must be at least 2 (got {k})"));
        }
        let default_levels = if self.mesh_file.is_some() { vec![1] } else { vec![1, 2, 3, 4] };
        let levels = self.levels.clone().unwrap_or(default_levels);
        if levels.is_empty() {
            issues.push("levels must not be empty".into());
        }
        if levels.contains(&0) {
            issues.push("refinement levels start at 1".into());
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            issues.push(format!("levels must be strictly increasing (got {levels:?})"));
        }
        if self.mesh_file.is_some() && levels.len() > 1 {
            issues.push("a mesh file runs a single level; give exactly one level".into());
        }
        let residual_tol = self.solver.residual_tol.unwrap_or(RESIDUAL_TOL);
        if !(residual_tol > 0.0 && residual_tol.is_finite()) {
            issues.push(format!("solver.residual_tol must be positive (got {residual_tol})"));
        }
        let warp = self.output.warp.unwrap_or(1.0);
        if !warp.is_finite() {
            issues.push(format!("output.warp must be finite (got {warp})"));
        }

        let physical = case.as_ref().map(|c| self.params.apply(c.physical));
        if let Some(p) = &physical {
            check_physical(p, &mut issues);
        }
        if let (Some(c), Some(rule)) = (&case, dt_rule) {
            if c.is_stationary() != matches!(rule, DtRule::Stationary) {
                let need = if c.is_stationary() { "stationary" } else { "h2 or fixed:DT" };
                issues.push(format!("case {} needs dt_rule {need}", c.id));
            }
        }

        if !issues.is_empty() {
            return Err(CliError::Invalid(issues));
        }
        let case = case.expect("checked above");
        let physical = physical.expect("checked above");
        let dt_rule = dt_rule.unwrap_or(case.dt_rule);
        let case = case.with_physical(physical)?;
        Ok(Resolved {
            case,
            k,
            stab: Stabilization { kind: kind.unwrap_or_default(), scope: scope.unwrap_or_default() },
            levels,
            seed: self.seed.unwrap_or(0),
            dt_rule,
            load_projection: load_projection.unwrap_or_default(),
            mesh_file: self.mesh_file.clone(),
            residual_tol,
            out: self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            snapshots: self.output.snapshots.unwrap_or(0),
            timing: self.output.timing.unwrap_or(false),
            warp,
        })
    }
}

impl ParamOverrides {
    pub fn apply(&self, base: PhysicalParams) -> PhysicalParams {
        PhysicalParams {
            young_p: self.young_p.unwrap_or(base.young_p),
            poisson_p: self.poisson_p.unwrap_or(base.poisson_p),
            young_e: self.young_e.unwrap_or(base.young_e),
            poisson_e: self.poisson_e.unwrap_or(base.poisson_e),
            kappa: self.kappa.unwrap_or(base.kappa),
            alpha: self.alpha.unwrap_or(base.alpha),
            c0: self.c0.unwrap_or(base.c0),
            eta: self.eta.unwrap_or(base.eta),
        }
    }
}

fn parse_opt<T: FromStr<Err = biotvem::VemError>>(s: Option<&str>, issues: &mut Vec<String>) -> Option<T> {
    s.map(T::from_str)?.map_err(|e| issues.push(e.to_string())).ok()
}

fn check_physical(p: &PhysicalParams, issues: &mut Vec<String>) {
    let mut need = |ok: bool, msg: String| {
        if !ok {
            issues.push(msg);
        }
    };
    for (name, e) in [("young_p", p.young_p), ("young_e", p.young_e)] {
        need(e > 0.0 && e.is_finite(), format!("{name} must be positive (got {e})"));
    }
    for (name, nu) in [("poisson_p", p.poisson_p), ("poisson_e", p.poisson_e)] {
        need(nu > -1.0 && nu < 0.5, format!("{name} must lie in (-1, 0.5) (got {nu})"));
    }
    need(p.kappa > 0.0 && p.kappa.is_finite(), format!("kappa must be positive (got {})", p.kappa));
    need(p.eta > 0.0 && p.eta.is_finite(), format!("eta must be positive (got {})", p.eta));
    need(p.alpha > 0.0 && p.alpha <= 1.0, format!("alpha must lie in (0, 1] (got {})", p.alpha));
    need(p.c0 >= 0.0 && p.c0.is_finite(), format!("c0 must be non-negative (got {})", p.c0));
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub case: ManufacturedCase,
    pub k: usize,
    pub stab: Stabilization,
    pub levels: Vec<usize>,
    pub seed: u64,
    pub dt_rule: DtRule,
    pub load_projection: LoadProjection,
    pub mesh_file: Option<PathBuf>,
    pub residual_tol: f64,
    pub out: PathBuf,
    pub snapshots: usize,
    pub timing: bool,
    pub warp: f64,
}

impl Resolved {
    pub fn dt_rule_name(&self) -> String {
        match self.dt_rule {
            DtRule::Stationary => "stationary".into(),
            DtRule::HSquared => "h2".into(),
            DtRule::Fixed { dt } => format!("fixed:{dt}"),
        }
    }

    /// Human-readable summary printed by `validate`.
    pub fn summary(&self) -> String {
        let p = &self.case.physical;
        let m = &self.case.params;
        format!(
            "case             {}\n\
             k                {}\n\
             stabilization    {} ({:?} scope)\n\
             levels           {:?}\n\
             dt rule          {}\n\
             load projection  {}\n\
             seed             {}\n\
             mesh file        {}\n\
             E, nu (poro)     {}, {}\n\
             E, nu (elastic)  {}, {}\n\
             lambda, mu       poro {:.6e}, {:.6e}; elastic {:.6e}, {:.6e}\n\
             kappa, eta       {}, {}\n\
             alpha, c0        {}, {}\n\
             residual tol     {:e}\n\
             output           {} (snapshots {}, timing {}, warp {})",
            self.case.id,
            self.k,
            self.stab.kind,
            self.stab.scope,
            self.levels,
            self.dt_rule_name(),
            self.load_projection,
            self.seed,
            self.mesh_file.as_ref().map_or("-".into(), |p| p.display().to_string()),
            p.young_p,
            p.poisson_p,
            p.young_e,
            p.poisson_e,
            m.poro.lambda,
            m.poro.mu,
            m.elastic.lambda,
            m.elastic.mu,
            p.kappa,
            p.eta,
            p.alpha,
            p.c0,
            self.residual_tol,
            self.out.display(),
            self.snapshots,
            self.timing,
            self.warp,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_toml(text, Path::new("test.toml"))
    }

    fn issues(c: &RunConfig) -> Vec<String> {
        match c.resolve() {
            Err(CliError::Invalid(v)) => v,
            other => panic!("expected invalid configuration, got {other:?}"),
        }
    }

    #[test]
    fn defaults_follow_the_case() {
        let r = config("case = \"transient\"").unwrap().resolve().unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.levels, vec![1, 2, 3, 4]);
        assert_eq!(r.dt_rule, DtRule::HSquared);
        assert_eq!(r.load_projection, LoadProjection::Full);
        assert_eq!(r.residual_tol, RESIDUAL_TOL);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(config("case = \"mandel\"\nfoo = 1"), Err(CliError::Toml { .. })));
        assert!(matches!(config("[params]\nnu = 0.3"), Err(CliError::Toml { .. })));
    }

    #[test]
    fn all_problems_are_reported_together() {
        let c = config(
            "case = \"jump-interface\"\nk = 1\nlevels = [2, 1]\n\
             [params]\npoisson_p = 0.5\nc0 = -1.0\nalpha = 0.0\n[solver]\nresidual_tol = 0.0",
        )
        .unwrap();
        let v = issues(&c);
        assert_eq!(v.len(), 6, "{v:?}");
        for key in ["k must", "strictly increasing", "poisson_p", "c0", "alpha", "residual_tol"] {
            assert!(v.iter().any(|i| i.contains(key)), "{key} missing from {v:?}");
        }
    }

    #[test]
    fn time_step_rule_must_match_the_case() {
        let c = config("case = \"jump-interface\"\ndt_rule = \"h2\"").unwrap();
        assert!(issues(&c)[0].contains("stationary"));
        let c = config("case = \"transient\"\ndt_rule = \"fixed:0\"").unwrap();
        assert!(issues(&c)[0].contains("time-step rule"));
    }

    #[test]
    fn command_line_overrides_the_file() {
        let file = config("case = \"mandel\"\nk = 3\n[params]\nkappa = 2.0").unwrap();
        let cli = RunConfig { k: Some(2), params: ParamOverrides { eta: Some(3.0), ..Default::default() }, ..Default::default() };
        let m = file.merge(cli);
        assert_eq!(m.case.as_deref(), Some("mandel"));
        assert_eq!(m.k, Some(2));
        assert_eq!(m.params.kappa, Some(2.0));
        assert_eq!(m.params.eta, Some(3.0));
    }

    #[test]
    fn shipped_configs_are_valid() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut n = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let r = RunConfig::read(&path).unwrap().resolve();
                assert!(r.is_ok(), "{}: {r:?}", path.display());
                n += 1;
            }
        }
        assert!(n >= 5);
    }
}
