//! Monolithic multi-time-step coupling of subdomain systems through
//! Lagrange multipliers, with subcycling and per-subdomain trapezoidal
//! integrators.
//!
//! Each system step of size `dt` advances subdomain `i` through
//! `eta_i = dt / dt_i` sublevels. Multipliers are interpolated linearly
//! between system levels, and the interface constraint is enforced only at
//! system levels, either on the primary variable (d-continuity) or on the
//! stabilized combination `v + (alpha/dt) d` (Baumgarte).

mod assembled;
mod init;
mod structured;

pub use assembled::monolithic_system;

use crate::assembly::{AssemblyError, Integrator, SubdomainSystem};
use crate::decomposition::ConstraintMap;
use crate::linalg::{CsrMatrix, LinalgError};
use std::borrow::Cow;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("subdomain {subdomain}: system time-step {dt} is not an integer multiple of the subdomain time-step {dt_sub}")]
    NonIntegerSubcycling { subdomain: usize, dt: f64, dt_sub: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear solve failed{}: {source}", subdomain.map(|s| format!(" in subdomain {s}")).unwrap_or_default())]
    Linear {
        subdomain: Option<usize>,
        #[source]
        source: LinalgError,
    },
    #[error("Newton iteration did not converge in {iterations} iterations (last correction {correction:e})")]
    NewtonDiverged { iterations: usize, correction: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingMethod {
    /// `sum_i C_i d_i = 0` at system levels.
    DContinuity,
    /// `sum_i C_i (v_i + alpha/dt d_i) = 0` at system levels.
    Baumgarte { alpha: f64 },
}

impl CouplingMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DContinuity => "d-continuity",
            Self::Baumgarte { .. } => "baumgarte",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { max_iterations: 50, abs_tol: 1e-12, rel_tol: 1e-10 }
    }
}

/// Both choices are direct solves of the same monolithic system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectSolver {
    /// Sparse LU of each subdomain's level matrix plus a dense Schur
    /// complement on the multiplier increment. Requires constant Jacobians;
    /// otherwise falls back to `Assembled`.
    #[default]
    Structured,
    /// Sparse LU of the fully assembled block system.
    Assembled,
}

/// How the initial multiplier is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialLambda {
    /// Multiplier and rates consistent with the constraint at t = 0.
    #[default]
    Consistent,
    /// Zero multiplier; rates from the uncoupled equations.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub dt: f64,
    pub steps: usize,
    pub method: CouplingMethod,
    pub newton: NewtonSettings,
    pub solver: DirectSolver,
    pub initial_lambda: InitialLambda,
    /// Replace negative primary values by zero after every system step.
    pub clip_negative: bool,
}

impl CouplingConfig {
    pub fn new(dt: f64, steps: usize, method: CouplingMethod) -> Self {
        Self {
            dt,
            steps,
            method,
            newton: NewtonSettings::default(),
            solver: DirectSolver::default(),
            initial_lambda: InitialLambda::default(),
            clip_negative: false,
        }
    }

    /// Check parameters and return the subcycling ratio of every subdomain.
    pub fn validate(&self, integrators: &[Integrator]) -> Result<Vec<usize>, CouplingError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CouplingError::Config(format!("system time-step must be positive, got {}", self.dt)));
        }
        if let CouplingMethod::Baumgarte { alpha } = self.method {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(CouplingError::Config(format!("Baumgarte alpha must be positive, got {alpha}")));
            }
        }
        integrators
            .iter()
            .enumerate()
            .map(|(i, g)| {
                if !(0.0..=1.0).contains(&g.theta) {
                    return Err(CouplingError::Config(format!("subdomain {}: theta {} outside [0, 1]", i + 1, g.theta)));
                }
                subcycling_ratio(self.dt, g.dt_sub)
                    .ok_or(CouplingError::NonIntegerSubcycling { subdomain: i + 1, dt: self.dt, dt_sub: g.dt_sub })
            })
            .collect()
    }
}

/// Time of the level after `state`, as `t0 + (n + 1) dt` so that long runs do
/// not accumulate rounding.
pub(crate) fn next_time(state: &SystemState, dt: f64) -> f64 {
    let t0 = state.time - state.step as f64 * dt;
    t0 + (state.step + 1) as f64 * dt
}

/// `dt / dt_sub` when it is a positive integer up to a relative 1e-9.
pub fn subcycling_ratio(dt: f64, dt_sub: f64) -> Option<usize> {
    if !(dt_sub > 0.0) || !(dt > 0.0) {
        return None;
    }
    let r = dt / dt_sub;
    let n = r.round();
    if n >= 1.0 && (n * dt_sub - dt).abs() <= 1e-9 * dt {
        Some(n as usize)
    } else {
        None
    }
}

/// A subdomain semi-discrete system `M v + M_s v_s = h(d, t) + C^T lambda`.
pub trait SubdomainModel {
    fn dof_count(&self) -> usize;
    fn integrator(&self) -> Integrator;
    fn mass(&self) -> &CsrMatrix;
    fn mass_stab(&self) -> Option<&CsrMatrix>;
    /// Rate function `h(d, t)`.
    fn rate(&self, d: &[f64], t: f64) -> Result<Vec<f64>, CouplingError>;
    /// `J = -dh/dd`.
    fn jacobian(&self, d: &[f64], t: f64) -> Result<Cow<'_, CsrMatrix>, CouplingError>;
    /// `h` is affine in `d` (Newton converges in one iteration).
    fn is_linear(&self) -> bool;
    /// `J` does not depend on `d` or `t`.
    fn constant_jacobian(&self) -> bool;
}

impl SubdomainModel for SubdomainSystem {
    fn dof_count(&self) -> usize {
        self.mass.nrows()
    }

    fn integrator(&self) -> Integrator {
        self.integrator
    }

    fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    fn mass_stab(&self) -> Option<&CsrMatrix> {
        self.mass_stab.as_ref()
    }

    fn rate(&self, d: &[f64], t: f64) -> Result<Vec<f64>, CouplingError> {
        let mut h = self.forcing_at(t)?;
        self.stiffness_at(t)?.mul_vec_add(-1.0, d, &mut h);
        Ok(h)
    }

    fn jacobian(&self, _d: &[f64], t: f64) -> Result<Cow<'_, CsrMatrix>, CouplingError> {
        Ok(self.stiffness_at(t)?)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn constant_jacobian(&self) -> bool {
        !self.operator_time_dependent()
    }
}

/// Primary values, rates and multipliers at one system level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub step: usize,
    pub time: f64,
    pub d: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

/// Perturbations of one step: `eps_d` enters every trapezoidal update as
/// `dt_i * eps_d`, `delta_lambda` shifts every interpolated multiplier by
/// `dt * delta_lambda`, and `eps_lambda` is the constraint right-hand side
/// (divided by `dt` for Baumgarte).
#[derive(Debug, Clone, PartialEq)]
pub struct StepPerturbation {
    pub eps_d: Vec<Vec<f64>>,
    pub delta_lambda: Vec<f64>,
    pub eps_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub newton_iterations: usize,
    /// Infinity norm of the last Newton correction (zero for one-shot solves).
    pub last_correction: f64,
    /// Infinity norm of the enforced constraint at the new level.
    pub constraint_residual: f64,
    /// Number of primary values changed by clipping.
    pub clipped: usize,
}

/// Steps a coupled problem. Factorizations are cached across steps.
pub struct Stepper<'a, S: SubdomainModel> {
    subs: &'a [S],
    constraints: &'a ConstraintMap,
    config: CouplingConfig,
    etas: Vec<usize>,
    structured: Option<structured::StructuredSolver>,
}

impl<'a, S: SubdomainModel> Stepper<'a, S> {
    pub fn new(subs: &'a [S], constraints: &'a ConstraintMap, config: CouplingConfig) -> Result<Self, CouplingError> {
        if constraints.subdomain_count() != subs.len()
            || subs.iter().zip(constraints.dof_counts()).any(|(s, &n)| s.dof_count() != n)
        {
            return Err(CouplingError::Config("constraint map does not match the subdomain systems".into()));
        }
        let integrators: Vec<_> = subs.iter().map(|s| s.integrator()).collect();
        let etas = config.validate(&integrators)?;
        let structured = if config.solver == DirectSolver::Structured && subs.iter().all(|s| s.constant_jacobian()) {
            Some(structured::StructuredSolver::new(subs, constraints, &config, &etas)?)
        } else {
            None
        };
        Ok(Self { subs, constraints, config, etas, structured })
    }

    pub fn config(&self) -> &CouplingConfig {
        &self.config
    }

    pub fn etas(&self) -> &[usize] {
        &self.etas
    }

    /// Whether the structured elimination is in use.
    pub fn is_structured(&self) -> bool {
        self.structured.is_some()
    }

    /// Initial rates and multipliers for primary values `d0` at time `t0`.
    pub fn initial_state(&self, d0: Vec<Vec<f64>>, t0: f64) -> Result<SystemState, CouplingError> {
        init::initial_state(self.subs, self.constraints, d0, t0, self.config.initial_lambda)
    }

    pub fn step(
        &mut self,
        state: &SystemState,
        perturbation: Option<&StepPerturbation>,
    ) -> Result<(SystemState, StepDiagnostics), CouplingError> {
        let (mut next, mut diag) = match &self.structured {
            Some(s) => s.step(self.subs, self.constraints, &self.config, state, perturbation)?,
            None => assembled::newton_step(self.subs, self.constraints, &self.config, &self.etas, state, perturbation)?,
        };
        if self.config.clip_negative {
            for d in &mut next.d {
                for x in d.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                        diag.clipped += 1;
                    }
                }
            }
        }
        Ok((next, diag))
    }
}

/// Enforced constraint quantity at a system level.
pub fn constraint_value(constraints: &ConstraintMap, method: CouplingMethod, dt: f64, state: &SystemState) -> Vec<f64> {
    let mut g = constraints.apply(&state.d);
    if let CouplingMethod::Baumgarte { alpha } = method {
        g.iter_mut().for_each(|x| *x *= alpha / dt);
        for (i, v) in state.v.iter().enumerate() {
            constraints.apply_sub_add(i, v, 1.0, &mut g);
        }
    }
    g
}

/// Observer notified after every accepted system step.
pub trait StepObserver {
    fn on_step(&mut self, state: &SystemState, diagnostics: &StepDiagnostics);
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Initial state followed by every accepted step.
    pub trajectory: Vec<SystemState>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub structured: bool,
}

/// Initialize and advance `config.steps` system steps.
pub fn run<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    d0: Vec<Vec<f64>>,
    config: &CouplingConfig,
    observers: &mut [&mut dyn StepObserver],
) -> Result<RunOutput, CouplingError> {
    let mut stepper = Stepper::new(subs, constraints, config.clone())?;
    let mut state = stepper.initial_state(d0, 0.0)?;
    let mut trajectory = vec![state.clone()];
    let mut diagnostics = Vec::with_capacity(config.steps);
    for _ in 0..config.steps {
        let (next, diag) = stepper.step(&state, None)?;
        for o in observers.iter_mut() {
            o.on_step(&next, &diag);
        }
        trajectory.push(next.clone());
        diagnostics.push(diag);
        state = next;
    }
    Ok(RunOutput { trajectory, diagnostics, structured: stepper.is_structured() })
}

#[cfg(test)]
mod tests;
