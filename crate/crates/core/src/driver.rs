//! End-to-end commands: run a configuration and write its artifacts, report
//! stability limits, sweep the system step, and summarize meshes.

use crate::analysis::{first_increase, measure_drift, stability_report, AnalysisError, EnergyFunctional, StabilityReport, Verdict};
use crate::config::{ConfigError, PreparedRun, ProblemKind, RunConfig};
use crate::coupling::{run, CouplingError, CouplingMethod, DirectSolver, RunOutput, SubdomainModel, SystemState};
use crate::linalg::norm_inf;
use crate::mesh::{read_mesh_file, read_partition_file, Mesh, MeshError};
use crate::output::{write_json, write_profile_csv, write_state_csv, write_timeseries, write_vtk, TimeSeriesRow};
use crate::problems::{node_weights, recover_species, relative_l2, BuiltProblem, Stoichiometry};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{label}: {source}")]
    Coupling {
        label: String,
        #[source]
        source: CouplingError,
    },
    #[error("{label}: solution is not finite at step {step} (t = {time})")]
    NonFinite { label: String, step: usize, time: f64 },
    #[error("{0}")]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Mesh(#[from] MeshError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

impl DriverError {
    /// 2 for configuration problems, 1 for numerical or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) | DriverError::Usage(_) | DriverError::Mesh(_) => 2,
            DriverError::Coupling { source, .. } => match source {
                CouplingError::Config(_) | CouplingError::NonIntegerSubcycling { .. } => 2,
                _ => 1,
            },
            DriverError::Analysis(AnalysisError::Coupling(CouplingError::Config(_)))
            | DriverError::Analysis(AnalysisError::Coupling(CouplingError::NonIntegerSubcycling { .. })) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DriverError {
    DriverError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory; the configuration's `[output] dir` or `out/<name>` when absent.
    pub out_dir: Option<PathBuf>,
    /// Snapshot cadence overriding the configuration.
    pub snapshots: Option<usize>,
    /// Force the full-resolution fixtures.
    pub full_fixtures: bool,
    /// Where fixture meshes live; generated in memory when absent.
    pub fixture_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubdomainInfo {
    pub id: usize,
    pub formulation: String,
    pub theta: f64,
    pub dt_sub: f64,
    pub eta: usize,
    pub dofs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotInfo {
    pub step: usize,
    pub time: f64,
    pub file: String,
    pub min_value: f64,
    pub max_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub method: String,
    pub alpha: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub solver: String,
    pub subdomains: Vec<SubdomainInfo>,
    pub constraint_rows: usize,
    pub newton_iterations: usize,
    pub max_constraint_residual: f64,
    pub max_drift_d_inf: f64,
    pub max_drift_v_inf: f64,
    pub final_drift_d_inf: f64,
    pub final_drift_v_inf: f64,
    pub energy_q_first_increase: Option<usize>,
    pub energy_u_first_increase: Option<usize>,
    pub clipped_values: usize,
    pub final_min_value: f64,
    pub final_max_value: f64,
    /// Largest pointwise error against the reference over all system levels.
    pub max_abs_error: Option<f64>,
    /// Error at the final level: relative L2 on meshes, max abs otherwise.
    pub final_error: Option<f64>,
    pub snapshots: Vec<SnapshotInfo>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeciesSummary {
    pub stoichiometry: [f64; 3],
    /// Minimum of A, B and C over all snapshots.
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Largest `c_A c_B` over all snapshots.
    pub max_ab_product: f64,
    pub snapshots: Vec<SnapshotInfo>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub problem: String,
    pub runs: Vec<RunSummary>,
    pub species: Option<SpeciesSummary>,
}

fn problem_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Sdof => "sdof",
        ProblemKind::Diffusion1d => "diffusion_1d",
        ProblemKind::Singular1d => "singular_1d",
        ProblemKind::Hemker => "hemker",
        ProblemKind::BimolecularDiffusion => "bimolecular_diffusion",
        ProblemKind::BimolecularAdvection => "bimolecular_advection",
        ProblemKind::Custom => "custom",
    }
}

/// Flat values of a level: nodal field on meshes, all subdomain values otherwise.
fn level_values(p: &BuiltProblem, s: &SystemState) -> Vec<f64> {
    p.nodal_field(s).unwrap_or_else(|| s.d.iter().flatten().copied().collect())
}

/// `(max abs error, level error)` against the reference at the level's time.
fn level_error(p: &BuiltProblem, weights: Option<&[f64]>, s: &SystemState, values: &[f64]) -> Option<(f64, f64)> {
    let reference = p.reference.as_ref()?;
    match (&p.mesh, weights) {
        (Some(mesh), Some(w)) => {
            let exact: Vec<f64> = mesh.nodes().iter().map(|&x| reference.eval(x, s.time)).collect();
            let max = values.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Some((max, relative_l2(w, values, &exact, 0..mesh.node_count())))
        }
        _ => {
            let exact = reference.eval([0.0, 0.0], s.time);
            let max = values.iter().map(|a| (a - exact).abs()).fold(0.0, f64::max);
            Some((max, max))
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Solve one prepared run, rejecting non-finite states.
pub fn solve(run_: &PreparedRun) -> Result<RunOutput, DriverError> {
    let p = &run_.problem;
    let out = run(&p.subs, &p.constraints, p.d0.clone(), &run_.coupling, &mut [])
        .map_err(|source| DriverError::Coupling { label: run_.label.clone(), source })?;
    if let Some(s) = out.trajectory.iter().find(|s| s.d.iter().chain(&s.v).flatten().any(|x| !x.is_finite())) {
        return Err(DriverError::NonFinite { label: run_.label.clone(), step: s.step, time: s.time });
    }
    Ok(out)
}

/// Stability warnings for runs whose step sizes could violate the bounds.
fn stability_warnings(run_: &PreparedRun) -> Result<Vec<String>, DriverError> {
    if run_.problem.subs.iter().all(|s| s.integrator().theta >= 0.5) {
        return Ok(Vec::new());
    }
    let r = stability_report(&run_.problem.subs, &run_.coupling)?;
    Ok(if r.verdict == Verdict::Violated { r.notes.iter().map(|n| format!("stability bound violated: {n}")).collect() } else { Vec::new() })
}

fn snapshot_steps(steps: usize, cadence: usize) -> Vec<usize> {
    let mut out: Vec<usize> = if cadence == 0 { vec![0] } else { (0..=steps).step_by(cadence).collect() };
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

fn write_snapshot(
    dir: &Path,
    stem: &str,
    mesh: Option<&Mesh>,
    fields: &[(&str, &[f64])],
    state: &SystemState,
) -> Result<String, DriverError> {
    let name = match mesh {
        Some(m) if m.dimension() == 2 => {
            let name = format!("{stem}.vtk");
            let path = dir.join(&name);
            let f = File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = BufWriter::new(f);
            write_vtk(&mut w, &format!("{stem} t={}", state.time), m, fields).map_err(|e| io_err(&path, e))?;
            name
        }
        Some(m) => {
            let name = format!("{stem}.csv");
            let path = dir.join(&name);
            let f = File::create(&path).map_err(|e| io_err(&path, e))?;
            write_profile_csv(BufWriter::new(f), m, fields).map_err(|e| io_err(&path, e))?;
            name
        }
        None => {
            let name = format!("{stem}.csv");
            let path = dir.join(&name);
            let f = File::create(&path).map_err(|e| io_err(&path, e))?;
            write_state_csv(BufWriter::new(f), &state.d, &state.v, &state.lambda).map_err(|e| io_err(&path, e))?;
            name
        }
    };
    Ok(format!("snapshots/{name}"))
}

/// Run every solve of a configuration and write
/// `timeseries_<label>.csv`, `snapshots/` and `summary.json` under the output directory.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<Summary, DriverError> {
    let mut cfg = cfg.clone();
    cfg.full_fixtures |= opts.full_fixtures;
    let prepared = cfg.prepare(opts.fixture_dir.as_deref())?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let snap_dir = out_dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
    let cadence = opts.snapshots.unwrap_or(cfg.output.snapshots);

    let mut summaries = Vec::new();
    let mut nodal_at_snapshots: Vec<Vec<(usize, Vec<f64>)>> = Vec::new();
    for pr in &prepared.runs {
        let warnings = stability_warnings(pr)?;
        let out = solve(pr)?;
        let (summary, nodal) = record_run(pr, &out, cadence, &out_dir, warnings)?;
        summaries.push(summary);
        nodal_at_snapshots.push(nodal);
    }

    let species = match (prepared.stoichiometry, prepared.runs.first()) {
        (Some(st), Some(first)) if nodal_at_snapshots.len() == 2 => {
            Some(write_species(st, first, &nodal_at_snapshots[0], &nodal_at_snapshots[1], &snap_dir)?)
        }
        _ => None,
    };
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        problem: problem_name(cfg.kind).into(),
        runs: summaries,
        species,
    };
    let path = out_dir.join("summary.json");
    write_json(&path, &summary).map_err(|e| io_err(&path, e))?;
    Ok(summary)
}

fn record_run(
    pr: &PreparedRun,
    out: &RunOutput,
    cadence: usize,
    out_dir: &Path,
    warnings: Vec<String>,
) -> Result<(RunSummary, Vec<(usize, Vec<f64>)>), DriverError> {
    let p = &pr.problem;
    let c = &pr.coupling;
    let etas = c.validate(&p.subs.iter().map(|s| s.integrator()).collect::<Vec<_>>()).map_err(|source| DriverError::Coupling {
        label: pr.label.clone(),
        source,
    })?;
    let drift = measure_drift(&out.trajectory, &p.constraints);
    let q = EnergyFunctional::q(&p.subs)?.series(&out.trajectory);
    let (alpha, u) = match c.method {
        CouplingMethod::Baumgarte { alpha } => (Some(alpha), Some(EnergyFunctional::u(&p.subs, c, alpha)?.series(&out.trajectory))),
        CouplingMethod::DContinuity => (None, None),
    };
    let weights = p.mesh.as_ref().map(|m| node_weights(m));
    let snaps = snapshot_steps(c.steps, cadence);
    let mut rows = Vec::with_capacity(out.trajectory.len());
    let mut max_abs_error: Option<f64> = None;
    let mut final_error = None;
    let mut snapshots = Vec::new();
    let mut nodal_snaps = Vec::new();
    let (mut lo, mut hi) = (0.0, 0.0);
    for (k, s) in out.trajectory.iter().enumerate() {
        let values = level_values(p, s);
        (lo, hi) = min_max(&values);
        let err = level_error(p, weights.as_deref(), s, &values);
        if let Some((m, e)) = err {
            max_abs_error = Some(max_abs_error.unwrap_or(0.0).max(m));
            final_error = Some(e);
        }
        let diag = k.checked_sub(1).map(|i| &out.diagnostics[i]);
        rows.push(TimeSeriesRow {
            step: s.step,
            time: s.time,
            newton_iterations: diag.map_or(0, |d| d.newton_iterations),
            constraint_residual: diag.map_or_else(|| norm_inf(&drift.records[k].d_drift), |d| d.constraint_residual),
            drift_d_inf: drift.records[k].d_norm_inf,
            drift_v_inf: drift.records[k].v_norm_inf,
            energy_q: Some(q[k]),
            energy_u: u.as_ref().map(|u| u[k]),
            min_value: lo,
            max_value: hi,
            error: err.map(|e| e.1),
        });
        if snaps.binary_search(&s.step).is_ok() {
            let stem = format!("{}_{:06}", pr.label, s.step);
            let mut fields: Vec<(&str, &[f64])> = vec![("c", &values)];
            let exact: Vec<f64>;
            if let (Some(m), Some(r)) = (&p.mesh, &p.reference) {
                exact = m.nodes().iter().map(|&x| r.eval(x, s.time)).collect();
                fields.push(("reference", &exact));
            }
            let file = write_snapshot(&out_dir.join("snapshots"), &stem, p.mesh.as_deref(), &fields, s)?;
            snapshots.push(SnapshotInfo { step: s.step, time: s.time, file, min_value: lo, max_value: hi });
            nodal_snaps.push((s.step, values));
        }
    }
    let path = out_dir.join(format!("timeseries_{}.csv", pr.label));
    let f = File::create(&path).map_err(|e| io_err(&path, e))?;
    write_timeseries(BufWriter::new(f), &rows).map_err(|e| io_err(&path, e))?;

    let last = drift.records.last().expect("trajectory holds the initial state");
    let summary = RunSummary {
        label: pr.label.clone(),
        method: c.method.name().into(),
        alpha,
        dt: c.dt,
        steps: c.steps,
        t_end: out.trajectory.last().map_or(0.0, |s| s.time),
        solver: match c.solver {
            DirectSolver::Structured if out.structured => "structured",
            DirectSolver::Structured => "structured (assembled fallback)",
            DirectSolver::Assembled => "assembled",
        }
        .into(),
        subdomains: p
            .subs
            .iter()
            .zip(&etas)
            .map(|(s, &eta)| SubdomainInfo {
                id: s.id,
                formulation: s.formulation.name().into(),
                theta: s.integrator.theta,
                dt_sub: s.integrator.dt_sub,
                eta,
                dofs: s.dof_count(),
            })
            .collect(),
        constraint_rows: p.constraints.row_count(),
        newton_iterations: out.diagnostics.iter().map(|d| d.newton_iterations).sum(),
        max_constraint_residual: out.diagnostics.iter().map(|d| d.constraint_residual).fold(0.0, f64::max),
        max_drift_d_inf: drift.max_d_inf(),
        max_drift_v_inf: drift.max_v_inf(),
        final_drift_d_inf: last.d_norm_inf,
        final_drift_v_inf: last.v_norm_inf,
        energy_q_first_increase: first_increase(&q, 1e-10),
        energy_u_first_increase: u.as_deref().and_then(|u| first_increase(u, 1e-10)),
        clipped_values: out.diagnostics.iter().map(|d| d.clipped).sum(),
        final_min_value: lo,
        final_max_value: hi,
        max_abs_error,
        final_error,
        snapshots,
        warnings,
    };
    Ok((summary, nodal_snaps))
}

fn write_species(
    st: Stoichiometry,
    run_: &PreparedRun,
    f: &[(usize, Vec<f64>)],
    g: &[(usize, Vec<f64>)],
    snap_dir: &Path,
) -> Result<SpeciesSummary, DriverError> {
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    let mut max_ab_product: f64 = 0.0;
    let mut snapshots = Vec::new();
    let dt = run_.coupling.dt;
    for ((step, cf), (step_g, cg)) in f.iter().zip(g) {
        debug_assert_eq!(step, step_g);
        let mut species: [Vec<f64>; 3] = Default::default();
        for (&a, &b) in cf.iter().zip(cg) {
            let s = recover_species(&st, a, b);
            for k in 0..3 {
                species[k].push(s[k]);
                min[k] = min[k].min(s[k]);
                max[k] = max[k].max(s[k]);
            }
            max_ab_product = max_ab_product.max(s[0] * s[1]);
        }
        let time = *step as f64 * dt;
        let state = SystemState { step: *step, time, d: Vec::new(), v: Vec::new(), lambda: Vec::new() };
        let stem = format!("species_{step:06}");
        let fields: Vec<(&str, &[f64])> =
            vec![("c_A", &species[0]), ("c_B", &species[1]), ("c_C", &species[2]), ("c_F", cf), ("c_G", cg)];
        let file = write_snapshot(snap_dir, &stem, run_.problem.mesh.as_deref(), &fields, &state)?;
        let (lo, hi) = min_max(&species[2]);
        snapshots.push(SnapshotInfo { step: *step, time, file, min_value: lo, max_value: hi });
    }
    Ok(SpeciesSummary { stoichiometry: [st.a, st.b, st.c], min, max, max_ab_product, snapshots })
}

/// Stability reports of every run of a configuration.
pub fn analyze(cfg: &RunConfig, fixture_dir: Option<&Path>) -> Result<Vec<(String, StabilityReport)>, DriverError> {
    let prepared = cfg.prepare(fixture_dir)?;
    prepared.runs.iter().map(|r| Ok((r.label.clone(), stability_report(&r.problem.subs, &r.coupling)?))).collect()
}

fn fmt_limit(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.6e}")
    }
}

pub fn format_report(label: &str, r: &StabilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{label}: method {}{}", r.method, r.alpha.map(|a| format!(", alpha = {a}")).unwrap_or_default());
    let _ = writeln!(s, "  {:>3} {:>6} {:>12} {:>5} {:>14} {:>9} {:>14}", "id", "theta", "dt_sub", "eta", "omega", "symmetric", "dt_critical");
    for d in &r.subdomains {
        let _ = writeln!(
            s,
            "  {:>3} {:>6} {:>12} {:>5} {:>14.6e} {:>9} {:>14}",
            d.id,
            d.theta,
            d.dt_sub,
            d.eta,
            d.omega,
            if d.symmetric { "yes" } else { "no" },
            fmt_limit(d.dt_critical)
        );
    }
    let _ = writeln!(s, "  alpha_max = {}", fmt_limit(r.alpha_max));
    let _ = writeln!(
        s,
        "  verdict: {}",
        match r.verdict {
            Verdict::Stable => "stable",
            Verdict::Unproven => "unproven",
            Verdict::Violated => "violated",
        }
    );
    for n in &r.notes {
        let _ = writeln!(s, "  note: {n}");
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub dt: f64,
    pub steps: usize,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub label: String,
    /// `reference`, or `richardson` for the difference to the next finer level.
    pub measure: String,
    pub levels: Vec<ConvergenceLevel>,
    /// Least-squares slope of log error against log dt.
    pub order: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn observed_order(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Halve the system step `levels - 1` times at fixed final time. Subdomain
/// steps stay fixed unless `scale_subdomains`, which halves them too.
pub fn convergence(
    cfg: &RunConfig,
    levels: usize,
    scale_subdomains: bool,
    fixture_dir: Option<&Path>,
) -> Result<Vec<ConvergenceTable>, DriverError> {
    if levels < 3 {
        return Err(DriverError::Usage(format!("convergence needs at least 3 levels, got {levels}")));
    }
    let base = cfg.prepare(fixture_dir)?;
    let dt0 = base.runs[0].coupling.dt;
    let steps0 = base.runs[0].coupling.steps;
    let configs: Vec<RunConfig> = (0..levels)
        .map(|l| {
            let f = (1usize << l) as f64;
            let mut c = cfg.clone();
            c.coupling.dt = Some(dt0 / f);
            c.coupling.t_end = None;
            c.coupling.steps = Some(steps0 << l);
            if scale_subdomains {
                for (i, r) in base.runs[0].problem.subs.iter().enumerate() {
                    c.subdomains.entry(i + 1).or_default().dt = Some(r.integrator.dt_sub / f);
                }
            }
            c
        })
        .collect();
    // levels are independent; results are collected in level order
    let results: Vec<Result<Vec<(f64, usize, Vec<f64>, Option<f64>)>, DriverError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                scope.spawn(move || {
                    let prepared = c.prepare(fixture_dir)?;
                    prepared
                        .runs
                        .iter()
                        .map(|r| {
                            let out = solve(r)?;
                            let last = out.trajectory.last().expect("initial state");
                            let values = level_values(&r.problem, last);
                            let weights = r.problem.mesh.as_ref().map(|m| node_weights(m));
                            let err = level_error(&r.problem, weights.as_deref(), last, &values).map(|e| e.1);
                            Ok((r.coupling.dt, r.coupling.steps, values, err))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("convergence level panicked")).collect()
    });
    let results: Vec<_> = results.into_iter().collect::<Result<_, _>>()?;
    let mut tables = Vec::new();
    for (ri, pr) in base.runs.iter().enumerate() {
        let rows: Vec<&(f64, usize, Vec<f64>, Option<f64>)> = results.iter().map(|lv| &lv[ri]).collect();
        let with_reference = rows.iter().all(|r| r.3.is_some());
        let (measure, levels): (&str, Vec<ConvergenceLevel>) = if with_reference {
            ("reference", rows.iter().map(|r| ConvergenceLevel { dt: r.0, steps: r.1, error: r.3 }).collect())
        } else {
            let weights = pr.problem.mesh.as_ref().map(|m| node_weights(m));
            let lv = rows
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let error = rows.get(k + 1).map(|finer| match &weights {
                        Some(w) => relative_l2(w, &r.2, &finer.2, 0..r.2.len()),
                        None => r.2.iter().zip(&finer.2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                    });
                    ConvergenceLevel { dt: r.0, steps: r.1, error }
                })
                .collect();
            ("richardson", lv)
        };
        let (x, y): (Vec<f64>, Vec<f64>) = levels.iter().filter_map(|l| l.error.map(|e| (l.dt, e))).unzip();
        tables.push(ConvergenceTable { label: pr.label.clone(), measure: measure.into(), levels, order: observed_order(&x, &y) });
    }
    Ok(tables)
}

pub fn format_convergence(t: &ConvergenceTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} ({} error)", t.label, t.measure);
    let _ = writeln!(s, "  {:>14} {:>8} {:>14}", "dt", "steps", "error");
    for l in &t.levels {
        let e = l.error.map_or_else(|| "-".to_string(), |e| format!("{e:.6e}"));
        let _ = writeln!(s, "  {:>14} {:>8} {:>14}", l.dt, l.steps, e);
    }
    let _ = writeln!(s, "  observed order = {:.4}", t.order);
    s
}

/// Counts, boundary sets, bounding box, measure and element sizes.
pub fn mesh_info(mesh_path: &Path, partition: Option<&Path>) -> Result<String, DriverError> {
    let mesh = read_mesh_file(mesh_path)?;
    let mut s = String::new();
    let _ = writeln!(s, "mesh: {}", mesh_path.display());
    let _ = writeln!(s, "dimension: {}", mesh.dimension());
    let _ = writeln!(s, "nodes: {}", mesh.node_count());
    let mut kinds = std::collections::BTreeMap::new();
    for e in mesh.elements() {
        *kinds.entry(e.kind.name()).or_insert(0usize) += 1;
    }
    let kinds: Vec<String> = kinds.iter().map(|(k, n)| format!("{n} {k}")).collect();
    let _ = writeln!(s, "elements: {} ({})", mesh.element_count(), kinds.join(", "));
    let (lo, hi) = mesh.nodes().iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let _ = writeln!(s, "bounding box: [{}, {}] x [{}, {}]", lo[0], hi[0], lo[1], hi[1]);
    let measure: f64 = (0..mesh.element_count()).map(|e| mesh.element_measure(e)).sum();
    let _ = writeln!(s, "measure: {measure:.12}");
    let (hmin, hmax) = min_max(&(0..mesh.element_count()).map(|e| mesh.element_size(e)).collect::<Vec<_>>());
    let _ = writeln!(s, "element size: min {hmin:.6e}, max {hmax:.6e}");
    for (name, nodes) in mesh.boundary_sets() {
        let _ = writeln!(s, "boundary set {name}: {} nodes", nodes.len());
    }
    if let Some(pp) = partition {
        let part = read_partition_file(pp, mesh.element_count())?;
        let _ = writeln!(s, "partition: {} ({} subdomains)", pp.display(), part.subdomain_count());
        for sd in 1..=part.subdomain_count() {
            let els = part.elements_of(sd);
            let m: f64 = els.iter().map(|&e| mesh.element_measure(e)).sum();
            let _ = writeln!(s, "  subdomain {sd}: {} elements, measure {m:.12}", els.len());
        }
    }
    Ok(s)
}
