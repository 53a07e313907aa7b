//! INI-style run configurations.
//!
//! ```text
//! [problem]
//! kind = sdof            # sdof | diffusion_1d | singular_1d | hemker |
//!                        # bimolecular_diffusion | bimolecular_advection | custom
//! case = d-continuity 3  # an entry of the problem's parameter tables
//!
//! [coupling]
//! method = baumgarte
//! alpha = 1
//! dt = 0.1
//! t_end = 1
//!
//! [subdomain.2]
//! theta = 0.5
//! dt = 0.01
//! formulation = supg
//! ```
//!
//! Sections `[newton]` and `[output]` tune the nonlinear solve and the
//! written artifacts; custom problems add `[coefficients]`, `[boundary]`,
//! `[initial]` and `[reference]`.

use crate::assembly::{BoundaryConditions, FormulationTag, Integrator, TransportCoefficients};
use crate::coupling::{CouplingConfig, CouplingError, CouplingMethod, DirectSolver, InitialLambda, NewtonSettings};
use crate::fields::{Expr, TensorField, VectorField};
use crate::mesh::{interval_mesh, read_mesh_file, read_partition_file, MeshError};
use crate::problems::{
    advective_bimolecular_problem, diffusion_1d_problem, diffusion_bimolecular_problem, hemker_2d_problem, sdof_problem,
    singular_1d_problem, BuiltProblem, CaseParams, HemkerPlan, ProblemDefinition, ProblemError, Stoichiometry, SubdomainSetup,
    ADVECTIVE_CASE, DIFFUSION_1D_CASE, DIFFUSION_CASE, HEMKER_GALERKIN_CASES, HEMKER_SPLIT_CASES, SDOF_BAUMGARTE_CASES,
    SDOF_DCONTINUITY_CASES, SINGULAR_BAUMGARTE_CASES, SINGULAR_DCONTINUITY_CASES,
};
use ini::Ini;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("[{section}]: unknown key `{key}`")]
    UnknownKey { section: String, key: String },
    #[error("[{section}]: missing key `{key}`")]
    Missing { section: String, key: String },
    #[error("[{section}] {key}: {message}")]
    Invalid { section: String, key: String, message: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Sdof,
    Diffusion1d,
    Singular1d,
    Hemker,
    BimolecularDiffusion,
    BimolecularAdvection,
    Custom,
}

impl ProblemKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "sdof" => Self::Sdof,
            "diffusion_1d" => Self::Diffusion1d,
            "singular_1d" => Self::Singular1d,
            "hemker" => Self::Hemker,
            "bimolecular_diffusion" => Self::BimolecularDiffusion,
            "bimolecular_advection" => Self::BimolecularAdvection,
            "custom" => Self::Custom,
            _ => return None,
        })
    }

    /// True when the problem reads shipped mesh fixtures.
    pub fn uses_fixtures(self) -> bool {
        matches!(self, Self::Hemker | Self::BimolecularDiffusion | Self::BimolecularAdvection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    DContinuity,
    Baumgarte,
}

impl MethodKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "d-continuity" | "dcontinuity" | "d_continuity" => Some(Self::DContinuity),
            "baumgarte" => Some(Self::Baumgarte),
            _ => None,
        }
    }
}

/// Coupling settings given explicitly in the file; unset fields keep the
/// problem's defaults.
#[derive(Debug, Clone, Default)]
pub struct CouplingOverrides {
    pub method: Option<MethodKind>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub steps: Option<usize>,
    pub solver: Option<DirectSolver>,
    pub initial_lambda: Option<InitialLambda>,
    pub clip_negative: Option<bool>,
}

#[derive(Debug, Clone, Default)]
pub struct SubdomainOverride {
    pub theta: Option<f64>,
    pub dt: Option<f64>,
    pub formulation: Option<FormulationTag>,
}

#[derive(Debug, Clone, Default)]
pub struct OutputSettings {
    /// Snapshot every this many system steps; 0 writes the first and last only.
    pub snapshots: usize,
    /// Output directory, relative to the working directory.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum MeshSource {
    Files { mesh: PathBuf, partition: PathBuf },
    /// Concatenated intervals, one subdomain each.
    Interval { lengths: Vec<f64>, cells: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct CustomSpec {
    pub mesh: MeshSource,
    pub velocity: [Expr; 2],
    pub diffusivity: [Expr; 3],
    pub decay: f64,
    pub source: Expr,
    pub dirichlet: Vec<(String, Expr)>,
    pub neumann: Vec<(String, Expr)>,
    pub initial: Expr,
    pub reference: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub kind: ProblemKind,
    /// `(method, 1-based index)` into the problem's parameter tables.
    pub case: Option<(MethodKind, usize)>,
    pub cells: Option<Vec<usize>>,
    pub plan: Option<HemkerPlan>,
    /// Use the system step in the GLS test operator.
    pub gls_system_step: bool,
    pub full_fixtures: bool,
    pub coupling: CouplingOverrides,
    pub newton: NewtonSettings,
    pub subdomains: BTreeMap<usize, SubdomainOverride>,
    pub output: OutputSettings,
    pub custom: Option<CustomSpec>,
}

/// One coupled solve ready to run.
pub struct PreparedRun {
    pub label: String,
    pub problem: BuiltProblem,
    pub coupling: CouplingConfig,
}

/// Everything a configuration asks to solve.
pub struct Prepared {
    pub name: String,
    pub kind: ProblemKind,
    pub runs: Vec<PreparedRun>,
    /// Set for the bimolecular scenarios, whose two runs are the invariants F and G.
    pub stoichiometry: Option<Stoichiometry>,
}

const SECTIONS: [(&str, &[&str]); 9] = [
    ("problem", &["kind", "name", "case", "cells", "plan", "gls_time_step", "full_fixtures", "mesh", "partition", "interval"]),
    ("coupling", &["method", "alpha", "dt", "t_end", "steps", "solver", "initial_lambda", "clip_negative"]),
    ("newton", &["max_iterations", "abs_tol", "rel_tol"]),
    ("output", &["snapshots", "dir"]),
    ("coefficients", &["velocity_x", "velocity_y", "diffusivity", "diffusivity_xx", "diffusivity_xy", "diffusivity_yy", "decay", "source"]),
    ("boundary", &[]),
    ("initial", &["value"]),
    ("reference", &["value"]),
    ("subdomain", &["theta", "dt", "formulation"]),
];

struct Section<'a> {
    name: String,
    props: Option<&'a ini::Properties>,
}

impl Section<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { section: self.name.clone(), key: key.into(), message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| v.parse::<T>().map_err(|e| self.invalid(key, format!("`{v}`: {e}")))).transpose()
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|p| p.trim().parse::<T>().map_err(|e| self.invalid(key, format!("`{}`: {e}", p.trim()))))
                    .collect()
            })
            .transpose()
    }

    fn expr(&self, key: &str) -> Result<Option<Expr>, ConfigError> {
        self.get(key).map(|v| Expr::parse(v).map_err(|e| self.invalid(key, e.to_string()))).transpose()
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        Self::parse(&text, base, stem)
    }

    /// Parse configuration text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, default_name: &str) -> Result<Self, ConfigError> {
        let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut subdomain_sections = Vec::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey { section: "(none)".into(), key: k.into() });
                }
                continue;
            };
            let (head, id) = match name.split_once('.') {
                Some((h, rest)) => (h, Some(rest)),
                None => (name, None),
            };
            let allowed = SECTIONS.iter().find(|(s, _)| *s == head).map(|(_, k)| *k);
            let allowed = match (head, id, allowed) {
                ("subdomain", Some(id), Some(keys)) => {
                    let n: usize = id.parse().map_err(|_| ConfigError::UnknownSection(name.into()))?;
                    if n == 0 {
                        return Err(ConfigError::UnknownSection(name.into()));
                    }
                    subdomain_sections.push((n, name.to_string()));
                    keys
                }
                ("subdomain", None, _) => return Err(ConfigError::UnknownSection(name.into())),
                (_, None, Some(keys)) => keys,
                _ => return Err(ConfigError::UnknownSection(name.into())),
            };
            for (k, _) in props.iter() {
                let ok = if head == "boundary" {
                    k.starts_with("dirichlet.") || k.starts_with("neumann.")
                } else {
                    allowed.contains(&k)
                };
                if !ok {
                    return Err(ConfigError::UnknownKey { section: name.into(), key: k.into() });
                }
            }
        }
        let sec = |name: &str| Section { name: name.to_string(), props: ini.section(Some(name)) };

        let problem = sec("problem");
        let kind_s = problem.get("kind").ok_or(ConfigError::Missing { section: "problem".into(), key: "kind".into() })?;
        let kind = ProblemKind::parse(kind_s).ok_or_else(|| problem.invalid("kind", format!("unknown problem `{kind_s}`")))?;
        let name = problem.get("name").unwrap_or(default_name).to_string();
        let case = problem
            .get("case")
            .map(|v| {
                let mut it = v.split_whitespace();
                let m = it.next().and_then(MethodKind::parse);
                let n = it.next().map(|s| s.parse::<usize>()).unwrap_or(Ok(1));
                match (m, n, it.next()) {
                    (Some(m), Ok(n), None) if n >= 1 => Ok((m, n)),
                    _ => Err(problem.invalid("case", format!("expected `<d-continuity|baumgarte> [index]`, got `{v}`"))),
                }
            })
            .transpose()?;
        let cells = problem.list::<usize>("cells")?;
        let plan = problem
            .get("plan")
            .map(|v| parse_plan(v).ok_or_else(|| problem.invalid("plan", format!("`{v}`: expected galerkin, split or three formulations"))))
            .transpose()?;
        let gls_system_step = match problem.get("gls_time_step") {
            None | Some("subdomain") => false,
            Some("system") => true,
            Some(v) => return Err(problem.invalid("gls_time_step", format!("`{v}`: expected subdomain or system"))),
        };
        let full_fixtures = problem.parse::<bool>("full_fixtures")?.unwrap_or(false);

        let c = sec("coupling");
        let method = c
            .get("method")
            .map(|v| MethodKind::parse(v).ok_or_else(|| c.invalid("method", format!("`{v}`: expected d-continuity or baumgarte"))))
            .transpose()?;
        let solver = match c.get("solver") {
            None => None,
            Some("structured") => Some(DirectSolver::Structured),
            Some("assembled") => Some(DirectSolver::Assembled),
            Some(v) => return Err(c.invalid("solver", format!("`{v}`: expected structured or assembled"))),
        };
        let initial_lambda = match c.get("initial_lambda") {
            None => None,
            Some("consistent") => Some(InitialLambda::Consistent),
            Some("zero") => Some(InitialLambda::Zero),
            Some(v) => return Err(c.invalid("initial_lambda", format!("`{v}`: expected consistent or zero"))),
        };
        let coupling = CouplingOverrides {
            method,
            alpha: c.parse("alpha")?,
            dt: c.parse("dt")?,
            t_end: c.parse("t_end")?,
            steps: c.parse("steps")?,
            solver,
            initial_lambda,
            clip_negative: c.parse("clip_negative")?,
        };

        let nw = sec("newton");
        let d = NewtonSettings::default();
        let newton = NewtonSettings {
            max_iterations: nw.parse("max_iterations")?.unwrap_or(d.max_iterations),
            abs_tol: nw.parse("abs_tol")?.unwrap_or(d.abs_tol),
            rel_tol: nw.parse("rel_tol")?.unwrap_or(d.rel_tol),
        };

        let o = sec("output");
        let output = OutputSettings { snapshots: o.parse("snapshots")?.unwrap_or(0), dir: o.get("dir").map(PathBuf::from) };

        let mut subdomains = BTreeMap::new();
        for (n, name) in subdomain_sections {
            let s = sec(&name);
            let formulation = s
                .get("formulation")
                .map(|v| FormulationTag::parse(v).ok_or_else(|| s.invalid("formulation", format!("`{v}`: expected galerkin, supg or gls"))))
                .transpose()?;
            subdomains.insert(n, SubdomainOverride { theta: s.parse("theta")?, dt: s.parse("dt")?, formulation });
        }

        let custom = if kind == ProblemKind::Custom { Some(parse_custom(&ini, base)?) } else { None };
        Ok(Self { name, kind, case, cells, plan, gls_system_step, full_fixtures, coupling, newton, subdomains, output, custom })
    }

    /// Build every subdomain system and the coupling settings.
    /// `fixture_dir = None` generates fixture meshes in memory.
    pub fn prepare(&self, fixture_dir: Option<&Path>) -> Result<Prepared, ConfigError> {
        let full = self.full_fixtures;
        let mut stoichiometry = None;
        let defs: Vec<ProblemDefinition> = match self.kind {
            ProblemKind::Sdof => return self.prepare_sdof(),
            ProblemKind::Diffusion1d => {
                let def = diffusion_1d_problem(self.cells3()?.unwrap_or([12, 16, 12]));
                vec![self.with_table_case(def, &[&DIFFUSION_1D_CASE], &[])?]
            }
            ProblemKind::Singular1d => {
                let def = singular_1d_problem(self.cells3()?.unwrap_or([20, 40, 20]));
                let d: Vec<&CaseParams> = SINGULAR_DCONTINUITY_CASES.iter().collect();
                let b: Vec<&CaseParams> = SINGULAR_BAUMGARTE_CASES.iter().collect();
                vec![self.with_table_case(def, &d, &b)?]
            }
            ProblemKind::Hemker => {
                let plan = self.plan.unwrap_or(HemkerPlan::GALERKIN);
                let table = if plan == HemkerPlan::GALERKIN { &HEMKER_GALERKIN_CASES } else { &HEMKER_SPLIT_CASES };
                let def = hemker_2d_problem(plan, full, fixture_dir)?;
                vec![self.with_table_case(def, &[&table[0]], &[&table[1]])?]
            }
            ProblemKind::BimolecularDiffusion | ProblemKind::BimolecularAdvection => {
                let (sc, case) = if self.kind == ProblemKind::BimolecularDiffusion {
                    (diffusion_bimolecular_problem(full, fixture_dir)?, &DIFFUSION_CASE)
                } else {
                    (advective_bimolecular_problem(full, fixture_dir)?, &ADVECTIVE_CASE)
                };
                stoichiometry = Some(sc.stoichiometry);
                let (d, b): (Vec<&CaseParams>, Vec<&CaseParams>) =
                    if case.alpha.is_some() { (vec![], vec![case]) } else { (vec![case], vec![]) };
                vec![self.with_table_case(sc.f, &d, &b)?, self.with_table_case(sc.g, &d, &b)?]
            }
            ProblemKind::Custom => vec![self.custom_definition()?],
        };
        let mut runs = Vec::with_capacity(defs.len());
        for def in defs {
            let def = self.apply_overrides(def)?;
            let def = if self.gls_system_step { def.with_system_step_gls() } else { def };
            let problem = def.build()?;
            let label = problem.name.clone();
            runs.push(PreparedRun { label, problem, coupling: def.coupling });
        }
        Ok(Prepared { name: self.name.clone(), kind: self.kind, runs, stoichiometry })
    }

    fn cells3(&self) -> Result<Option<[usize; 3]>, ConfigError> {
        self.cells
            .as_ref()
            .map(|c| {
                <[usize; 3]>::try_from(c.as_slice())
                    .ok()
                    .filter(|c| c.iter().all(|&n| n > 0))
                    .ok_or_else(|| invalid("problem", "cells", "expected three positive counts"))
            })
            .transpose()
    }

    fn table_case<'a>(&self, d: &[&'a CaseParams], b: &[&'a CaseParams]) -> Result<Option<&'a CaseParams>, ConfigError> {
        let Some((m, n)) = self.case else { return Ok(None) };
        let table = if m == MethodKind::DContinuity { d } else { b };
        table.get(n - 1).copied().map(Some).ok_or_else(|| {
            invalid("problem", "case", format!("this problem has {} {} case(s)", table.len(), method_name(m)))
        })
    }

    fn with_table_case(&self, def: ProblemDefinition, d: &[&CaseParams], b: &[&CaseParams]) -> Result<ProblemDefinition, ConfigError> {
        Ok(match self.table_case(d, b)? {
            Some(case) => {
                let t_end = def.coupling.dt * def.coupling.steps as f64;
                def.with_case(case, t_end)
            }
            None => def,
        })
    }

    fn prepare_sdof(&self) -> Result<Prepared, ConfigError> {
        let d: Vec<&CaseParams> = SDOF_DCONTINUITY_CASES.iter().collect();
        let b: Vec<&CaseParams> = SDOF_BAUMGARTE_CASES.iter().collect();
        let case = self.table_case(&d, &b)?.unwrap_or(&SDOF_DCONTINUITY_CASES[2]);
        let ig = case.integrators();
        // stand-in definition so the overrides apply uniformly
        let mut coupling = case.coupling(1.0);
        let mut integrators = [ig[0], ig[1]];
        let mut formulations = [FormulationTag::Galerkin; 2];
        self.override_coupling(&mut coupling)?;
        for (&n, o) in &self.subdomains {
            if n > 2 {
                return Err(invalid(&format!("subdomain.{n}"), "theta", "the split single-dof problem has two subdomains"));
            }
            let g = &mut integrators[n - 1];
            g.theta = o.theta.unwrap_or(g.theta);
            g.dt_sub = o.dt.unwrap_or(g.dt_sub);
            formulations[n - 1] = o.formulation.unwrap_or(formulations[n - 1]);
        }
        if formulations.iter().any(|&f| f != FormulationTag::Galerkin) {
            return Err(invalid("subdomain", "formulation", "the split single-dof problem has no spatial discretization"));
        }
        coupling.validate(&integrators)?;
        let problem = sdof_problem(integrators);
        Ok(Prepared {
            name: self.name.clone(),
            kind: self.kind,
            runs: vec![PreparedRun { label: problem.name.clone(), problem, coupling }],
            stoichiometry: None,
        })
    }

    fn override_coupling(&self, c: &mut CouplingConfig) -> Result<(), ConfigError> {
        let o = &self.coupling;
        let t_end = o.t_end.unwrap_or(c.dt * c.steps as f64);
        if let Some(dt) = o.dt {
            c.dt = dt;
        }
        let method = o.method.unwrap_or(match c.method {
            CouplingMethod::DContinuity => MethodKind::DContinuity,
            CouplingMethod::Baumgarte { .. } => MethodKind::Baumgarte,
        });
        c.method = match method {
            MethodKind::DContinuity => {
                if o.alpha.is_some() && o.method == Some(MethodKind::DContinuity) {
                    return Err(invalid("coupling", "alpha", "alpha only applies to the Baumgarte method"));
                }
                CouplingMethod::DContinuity
            }
            MethodKind::Baumgarte => {
                let prev = match c.method {
                    CouplingMethod::Baumgarte { alpha } => Some(alpha),
                    CouplingMethod::DContinuity => None,
                };
                let alpha = o.alpha.or(prev).ok_or_else(|| missing("coupling", "alpha"))?;
                CouplingMethod::Baumgarte { alpha }
            }
        };
        c.steps = match o.steps {
            Some(s) => s,
            None => {
                let s = t_end / c.dt;
                let r = s.round();
                if !(s.is_finite() && (s - r).abs() <= 1e-9 * r.max(1.0)) {
                    return Err(invalid("coupling", "t_end", format!("t_end = {t_end} is not a multiple of dt = {}", c.dt)));
                }
                r as usize
            }
        };
        if c.steps == 0 {
            return Err(invalid("coupling", "steps", "the run has zero system steps"));
        }
        if let Some(s) = o.solver {
            c.solver = s;
        }
        if let Some(l) = o.initial_lambda {
            c.initial_lambda = l;
        }
        if let Some(b) = o.clip_negative {
            c.clip_negative = b;
        }
        c.newton = self.newton;
        Ok(())
    }

    fn apply_overrides(&self, mut def: ProblemDefinition) -> Result<ProblemDefinition, ConfigError> {
        self.override_coupling(&mut def.coupling)?;
        let n = def.subdomains.len();
        for (&id, o) in &self.subdomains {
            let s = def.subdomains.get_mut(id - 1).ok_or_else(|| {
                invalid(&format!("subdomain.{id}"), "theta", format!("the problem has {n} subdomains"))
            })?;
            s.integrator.theta = o.theta.unwrap_or(s.integrator.theta);
            s.integrator.dt_sub = o.dt.unwrap_or(s.integrator.dt_sub);
            s.formulation = o.formulation.unwrap_or(s.formulation);
        }
        let integrators: Vec<Integrator> = def.subdomains.iter().map(|s| s.integrator).collect();
        def.coupling.validate(&integrators)?;
        Ok(def)
    }

    fn custom_definition(&self) -> Result<ProblemDefinition, ConfigError> {
        let spec = self.custom.as_ref().expect("custom spec parsed with the kind");
        let (mesh, partition) = match &spec.mesh {
            MeshSource::Files { mesh, partition } => {
                let m = read_mesh_file(mesh)?;
                let p = read_partition_file(partition, m.element_count())?;
                (m, p)
            }
            MeshSource::Interval { lengths, cells } => interval_mesh(lengths, cells)?,
        };
        let [vx, vy] = spec.velocity.clone();
        let [dxx, dxy, dyy] = spec.diffusivity.clone();
        let coefficients = TransportCoefficients {
            velocity: VectorField::from_components(vx.to_field(), vy.to_field()),
            velocity_divergence: None,
            diffusivity: TensorField::from_components(dxx.to_field(), dxy.to_field(), dyy.to_field()),
            decay: spec.decay,
            source: spec.source.to_field(),
            gls_time_step: None,
        };
        let dt = self.coupling.dt.ok_or_else(|| missing("coupling", "dt"))?;
        let method = match self.coupling.method.ok_or_else(|| missing("coupling", "method"))? {
            MethodKind::DContinuity => CouplingMethod::DContinuity,
            MethodKind::Baumgarte => CouplingMethod::Baumgarte { alpha: self.coupling.alpha.ok_or_else(|| missing("coupling", "alpha"))? },
        };
        if self.coupling.t_end.is_none() && self.coupling.steps.is_none() {
            return Err(missing("coupling", "t_end"));
        }
        let subdomains = (0..partition.subdomain_count())
            .map(|_| SubdomainSetup {
                formulation: FormulationTag::Galerkin,
                integrator: Integrator { theta: 1.0, dt_sub: dt },
                coefficients: coefficients.clone(),
            })
            .collect();
        Ok(ProblemDefinition {
            name: self.name.clone(),
            mesh: Arc::new(mesh),
            partition,
            subdomains,
            bc: BoundaryConditions {
                dirichlet: spec.dirichlet.iter().map(|(n, e)| (n.clone(), e.to_field())).collect(),
                neumann: spec.neumann.iter().map(|(n, e)| (n.clone(), e.to_field())).collect(),
            },
            initial: spec.initial.to_field(),
            // overridden from [coupling]; steps fixed up there
            coupling: CouplingConfig::new(dt, 1, method),
            reference: spec.reference.as_ref().map(Expr::to_field),
        })
    }
}

fn parse_custom(ini: &Ini, base: &Path) -> Result<CustomSpec, ConfigError> {
    let sec = |name: &str| Section { name: name.to_string(), props: ini.section(Some(name)) };
    let p = sec("problem");
    let mesh = match (p.get("mesh"), p.get("partition"), p.list::<f64>("interval")?) {
        (Some(m), Some(part), None) => MeshSource::Files { mesh: base.join(m), partition: base.join(part) },
        (None, None, Some(lengths)) => {
            let cells = p.list::<usize>("cells")?.ok_or_else(|| missing("problem", "cells"))?;
            if cells.len() != lengths.len() {
                return Err(p.invalid("cells", "one cell count per interval"));
            }
            MeshSource::Interval { lengths, cells }
        }
        _ => return Err(p.invalid("mesh", "give either `mesh` and `partition` files or `interval` lengths with `cells`")),
    };
    let c = sec("coefficients");
    let zero = || Expr::parse("0").expect("literal");
    let iso = c.expr("diffusivity")?;
    let comps = (c.expr("diffusivity_xx")?, c.expr("diffusivity_xy")?, c.expr("diffusivity_yy")?);
    let diffusivity = match (iso, comps) {
        (Some(d), (None, None, None)) => [d.clone(), zero(), d],
        (None, (Some(xx), xy, Some(yy))) => [xx, xy.unwrap_or_else(zero), yy],
        (None, (None, None, None)) => return Err(missing("coefficients", "diffusivity")),
        _ => return Err(c.invalid("diffusivity", "give `diffusivity` or `diffusivity_xx`/`_xy`/`_yy`, not both")),
    };
    let mut dirichlet = Vec::new();
    let mut neumann = Vec::new();
    if let Some(props) = ini.section(Some("boundary")) {
        let b = sec("boundary");
        for (k, _) in props.iter() {
            let e = b.expr(k)?.expect("key present");
            match k.split_once('.') {
                Some(("dirichlet", set)) => dirichlet.push((set.to_string(), e)),
                Some(("neumann", set)) => neumann.push((set.to_string(), e)),
                _ => unreachable!("boundary keys checked while scanning sections"),
            }
        }
    }
    Ok(CustomSpec {
        mesh,
        velocity: [c.expr("velocity_x")?.unwrap_or_else(zero), c.expr("velocity_y")?.unwrap_or_else(zero)],
        diffusivity,
        decay: c.parse("decay")?.unwrap_or(0.0),
        source: c.expr("source")?.unwrap_or_else(zero),
        dirichlet,
        neumann,
        initial: sec("initial").expr("value")?.unwrap_or_else(zero),
        reference: sec("reference").expr("value")?,
    })
}

fn parse_plan(v: &str) -> Option<HemkerPlan> {
    match v {
        "galerkin" => Some(HemkerPlan::GALERKIN),
        "split" => Some(HemkerPlan::SPLIT),
        _ => {
            let tags: Option<Vec<FormulationTag>> = v.split(',').map(|s| FormulationTag::parse(s.trim())).collect();
            Some(HemkerPlan(<[FormulationTag; 3]>::try_from(tags?).ok()?))
        }
    }
}

fn method_name(m: MethodKind) -> &'static str {
    match m {
        MethodKind::DContinuity => "d-continuity",
        MethodKind::Baumgarte => "baumgarte",
    }
}

fn invalid(section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { section: section.into(), key: key.into(), message: message.into() }
}

fn missing(section: &str, key: &str) -> ConfigError {
    ConfigError::Missing { section: section.into(), key: key.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("."), "test")
    }

    #[test]
    fn sdof_case_table_and_overrides() {
        let cfg = parse("[problem]\nkind = sdof\ncase = baumgarte 3\n[subdomain.2]\ndt = 0.01\n").unwrap();
        let p = cfg.prepare(None).unwrap();
        let run = &p.runs[0];
        assert_eq!(run.coupling.method, CouplingMethod::Baumgarte { alpha: 25.0 });
        assert_eq!(run.coupling.steps, 2);
        assert_eq!(run.problem.subs[1].integrator, Integrator { theta: 0.0, dt_sub: 0.01 });
        assert_eq!(run.problem.subs[0].integrator, Integrator { theta: 0.5, dt_sub: 0.1 });
    }

    #[test]
    fn non_integer_subcycling_names_the_subdomain() {
        let cfg = parse("[problem]\nkind = sdof\n[subdomain.2]\ndt = 0.03\n").unwrap();
        let err = cfg.prepare(None).err().unwrap().to_string();
        assert!(err.contains("subdomain 2"), "{err}");
    }

    #[test]
    fn zero_steps_is_a_config_error() {
        let cfg = parse("[problem]\nkind = sdof\n[coupling]\nsteps = 0\n").unwrap();
        assert!(matches!(cfg.prepare(None), Err(ConfigError::Invalid { .. })));
        let cfg = parse("[problem]\nkind = sdof\n[coupling]\nt_end = 0.25\ndt = 0.1\n").unwrap();
        assert!(cfg.prepare(None).is_err());
    }

    #[test]
    fn unknown_keys_and_sections_rejected() {
        assert!(matches!(parse("[problem]\nkind = sdof\nfoo = 1\n"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(parse("[problem]\nkind = sdof\n[extra]\na = 1\n"), Err(ConfigError::UnknownSection(_))));
        assert!(matches!(parse("[problem]\nkind = sdof\n[subdomain.x]\ntheta = 1\n"), Err(ConfigError::UnknownSection(_))));
        assert!(matches!(parse("[problem]\nkind = nope\n"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(parse("[coupling]\ndt = 1\n"), Err(ConfigError::Missing { .. })));
    }

    #[test]
    fn custom_interval_problem() {
        let text = "[problem]\nkind = custom\ninterval = 0.5, 0.5\ncells = 8, 8\n\
                    [coupling]\nmethod = d-continuity\ndt = 0.1\nt_end = 0.5\n\
                    [coefficients]\nvelocity_x = 1\ndiffusivity = 0.01\nsource = sin(pi*x)\n\
                    [boundary]\ndirichlet.left = 0\n\
                    [initial]\nvalue = x*(1-x)\n\
                    [subdomain.2]\ntheta = 0.5\ndt = 0.05\nformulation = supg\n";
        let cfg = parse(text).unwrap();
        let p = cfg.prepare(None).unwrap();
        let run = &p.runs[0];
        assert_eq!(run.coupling.steps, 5);
        assert_eq!(run.problem.subs.len(), 2);
        assert_eq!(run.problem.subs[1].formulation, FormulationTag::Supg);
        assert_eq!(run.problem.subs[1].integrator, Integrator { theta: 0.5, dt_sub: 0.05 });
        assert_eq!(run.problem.constraints.row_count(), 1);
    }

    #[test]
    fn hemker_plan_and_case() {
        let cfg = parse("[problem]\nkind = hemker\nplan = gls, supg, galerkin\ncase = baumgarte\n").unwrap();
        assert_eq!(cfg.plan, Some(HemkerPlan::SPLIT));
        let p = cfg.prepare(None).unwrap();
        assert_eq!(p.runs[0].coupling.method, CouplingMethod::Baumgarte { alpha: 1.0 });
        assert_eq!(p.runs[0].coupling.steps, 25);
        assert!(parse("[problem]\nkind = hemker\nplan = gls\n").is_err());
    }

    #[test]
    fn bimolecular_has_two_runs() {
        let cfg = parse("[problem]\nkind = bimolecular_diffusion\n[coupling]\nt_end = 0.004\n").unwrap();
        let p = cfg.prepare(None).unwrap();
        assert_eq!(p.runs.len(), 2);
        assert!(p.runs.iter().all(|r| r.coupling.clip_negative && r.coupling.steps == 4));
        assert!(p.stoichiometry.is_some());
    }
}
