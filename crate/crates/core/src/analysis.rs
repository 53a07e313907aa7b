//! Stability limits, energy functionals, drift recursions and perturbation
//! probes for coupled runs.

use crate::coupling::{
    CouplingConfig, CouplingError, CouplingMethod, StepPerturbation, Stepper, SubdomainModel, SystemState,
};
use crate::decomposition::ConstraintMap;
use crate::linalg::{dot, norm2, norm_inf, CsrMatrix, LinalgError, SparseLu};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("capacity matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("{0}")]
    Invalid(String),
}

/// Largest size handled by a dense eigensolve.
pub const DENSE_EIGEN_LIMIT: usize = 1500;

/// Maximum real part of the eigenvalues of `M^-1 K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub omega: f64,
    /// `K` was symmetric, so `omega` is a generalized symmetric eigenvalue.
    pub symmetric: bool,
    /// Computed by power iteration instead of a dense eigensolve.
    pub iterative: bool,
}

pub fn omega(m: &CsrMatrix, k: &CsrMatrix) -> Result<SpectralEstimate, AnalysisError> {
    if m.nrows() != k.nrows() || m.ncols() != k.ncols() || m.nrows() != m.ncols() {
        return Err(AnalysisError::Invalid("mass and stiffness sizes differ".into()));
    }
    let n = m.nrows();
    let symmetric = k.is_symmetric(1e-12 * k.norm_inf().max(f64::MIN_POSITIVE));
    if n == 0 {
        return Ok(SpectralEstimate { omega: 0.0, symmetric, iterative: false });
    }
    if n > DENSE_EIGEN_LIMIT {
        return power_omega(m, k, symmetric);
    }
    let md = m.to_dense();
    let kd = k.to_dense();
    let omega = if symmetric {
        let chol = md.clone().cholesky().ok_or(AnalysisError::NotPositiveDefinite)?;
        let l = chol.l();
        // L^-1 K L^-T
        let y = l.solve_lower_triangular(&kd).ok_or(AnalysisError::NotPositiveDefinite)?;
        let a = l.solve_lower_triangular(&y.transpose()).ok_or(AnalysisError::NotPositiveDefinite)?;
        let a = (&a + a.transpose()) * 0.5;
        a.symmetric_eigenvalues().max()
    } else {
        let lu = md.lu();
        let a = lu.solve(&kd).ok_or(LinalgError::Singular)?;
        a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    };
    Ok(SpectralEstimate { omega: omega.max(0.0), symmetric, iterative: false })
}

fn power_omega(m: &CsrMatrix, k: &CsrMatrix, symmetric: bool) -> Result<SpectralEstimate, AnalysisError> {
    let lu = SparseLu::new(m)?;
    let n = m.nrows();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let mut prev = f64::NAN;
    let mut est = 0.0;
    for _ in 0..20_000 {
        let kx = k.mul_vec(&x);
        let mx = m.mul_vec(&x);
        est = dot(&x, &kx) / dot(&x, &mx);
        let mut y = lu.solve(&kx);
        let s = norm2(&y);
        if s == 0.0 {
            return Ok(SpectralEstimate { omega: 0.0, symmetric, iterative: true });
        }
        y.iter_mut().for_each(|v| *v /= s);
        x = y;
        if (est - prev).abs() <= 1e-8 * est.abs() {
            break;
        }
        prev = est;
    }
    Ok(SpectralEstimate { omega: est.max(0.0), symmetric, iterative: true })
}

/// `2 / ((1 - 2 theta) omega)` for `theta < 1/2`, infinite otherwise or when `omega = 0`.
pub fn critical_dt_from_omega(omega: f64, theta: f64) -> f64 {
    if theta >= 0.5 || omega <= 0.0 {
        f64::INFINITY
    } else {
        2.0 / ((1.0 - 2.0 * theta) * omega)
    }
}

pub fn critical_dt(m: &CsrMatrix, k: &CsrMatrix, theta: f64) -> Result<f64, AnalysisError> {
    if theta >= 0.5 {
        // still reject a singular capacity
        SparseLu::new(m)?;
        return Ok(f64::INFINITY);
    }
    Ok(critical_dt_from_omega(omega(m, k)?.omega, theta))
}

/// Minimum of `2 eta / (1 - 2 theta)` over subdomains with `theta < 1/2`.
pub fn alpha_max(params: &[(f64, usize)]) -> f64 {
    params
        .iter()
        .filter(|(th, _)| *th < 0.5)
        .map(|&(th, eta)| 2.0 * eta as f64 / (1.0 - 2.0 * th))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Hypotheses of the stability theorem hold.
    Stable,
    /// Hypotheses on the step sizes hold but `K` is nonsymmetric, which the theorem does not cover.
    Unproven,
    Violated,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubdomainStability {
    pub id: usize,
    pub theta: f64,
    pub dt_sub: f64,
    pub eta: usize,
    pub omega: f64,
    pub symmetric: bool,
    pub dt_critical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub subdomains: Vec<SubdomainStability>,
    pub alpha_max: f64,
    pub method: String,
    pub alpha: Option<f64>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

fn capacity<S: SubdomainModel>(s: &S) -> CsrMatrix {
    match s.mass_stab() {
        Some(ms) => s.mass().add_scaled(1.0, ms),
        None => s.mass().clone(),
    }
}

/// Spectral limits of every subdomain and the verdict for the configured method.
pub fn stability_report<S: SubdomainModel>(subs: &[S], config: &CouplingConfig) -> Result<StabilityReport, AnalysisError> {
    let etas = config.validate(&subs.iter().map(|s| s.integrator()).collect::<Vec<_>>())?;
    let mut rows = Vec::with_capacity(subs.len());
    let mut notes = Vec::new();
    for (i, s) in subs.iter().enumerate() {
        let g = s.integrator();
        let zeros = vec![0.0; s.dof_count()];
        let k = s.jacobian(&zeros, 0.0)?;
        let est = omega(&capacity(s), &k)?;
        if !s.constant_jacobian() {
            notes.push(format!("subdomain {}: operator varies in time, omega taken at t = 0", i + 1));
        }
        rows.push(SubdomainStability {
            id: i + 1,
            theta: g.theta,
            dt_sub: g.dt_sub,
            eta: etas[i],
            omega: est.omega,
            symmetric: est.symmetric,
            dt_critical: critical_dt_from_omega(est.omega, g.theta),
        });
    }
    let amax = alpha_max(&rows.iter().map(|r| (r.theta, r.eta)).collect::<Vec<_>>());
    let symmetric = rows.iter().all(|r| r.symmetric);
    let (method, alpha, ok) = match config.method {
        CouplingMethod::DContinuity => {
            let ok = rows.iter().all(|r| r.theta >= 0.5);
            if !ok {
                notes.push("d-continuity requires theta >= 1/2 in every subdomain".into());
            }
            ("d-continuity".to_string(), None, ok)
        }
        CouplingMethod::Baumgarte { alpha } => {
            let mut ok = alpha <= amax;
            if !ok {
                notes.push(format!("alpha = {alpha} exceeds alpha_max = {amax}"));
            }
            for r in &rows {
                if r.dt_sub > r.dt_critical {
                    ok = false;
                    notes.push(format!("subdomain {}: dt_sub = {} exceeds critical {}", r.id, r.dt_sub, r.dt_critical));
                }
            }
            ("baumgarte".to_string(), Some(alpha), ok)
        }
    };
    if !symmetric {
        notes.push("theorem scope: symmetric K only; omega is the largest real part of the spectrum".into());
    }
    let verdict = match (ok, symmetric, config.method) {
        (false, _, _) => Verdict::Violated,
        (true, false, CouplingMethod::Baumgarte { .. }) => Verdict::Unproven,
        _ => Verdict::Stable,
    };
    Ok(StabilityReport { subdomains: rows, alpha_max: amax, method, alpha, verdict, notes })
}

/// Quadratic energy `sum_i v_i^T A_i v_i` with one symmetric matrix per subdomain.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    matrices: Vec<CsrMatrix>,
}

fn sym(k: &CsrMatrix) -> CsrMatrix {
    k.add_scaled(1.0, &k.transpose()).scaled(0.5)
}

impl EnergyFunctional {
    /// `Q_i = M_i + 2 (theta_i - 1/2) dt_i sym(K_i)`.
    pub fn q<S: SubdomainModel>(subs: &[S]) -> Result<Self, AnalysisError> {
        let matrices = subs
            .iter()
            .map(|s| {
                let g = s.integrator();
                let k = s.jacobian(&vec![0.0; s.dof_count()], 0.0)?;
                Ok(capacity(s).add_scaled(2.0 * (g.theta - 0.5) * g.dt_sub, &sym(&k)))
            })
            .collect::<Result<_, CouplingError>>()?;
        Ok(Self { matrices })
    }

    /// `U_i = alpha M_i + dt_i (eta_i + 2 alpha (theta_i - 1/2)) K_i`.
    pub fn u<S: SubdomainModel>(subs: &[S], config: &CouplingConfig, alpha: f64) -> Result<Self, AnalysisError> {
        let etas = config.validate(&subs.iter().map(|s| s.integrator()).collect::<Vec<_>>())?;
        let matrices = subs
            .iter()
            .zip(&etas)
            .map(|(s, &eta)| {
                let g = s.integrator();
                let k = s.jacobian(&vec![0.0; s.dof_count()], 0.0)?;
                let c = g.dt_sub * (eta as f64 + 2.0 * alpha * (g.theta - 0.5));
                Ok(capacity(s).scaled(alpha).add_scaled(c, &sym(&k)))
            })
            .collect::<Result<_, CouplingError>>()?;
        Ok(Self { matrices })
    }

    pub fn matrices(&self) -> &[CsrMatrix] {
        &self.matrices
    }

    pub fn evaluate(&self, state: &SystemState) -> f64 {
        self.matrices.iter().zip(&state.v).map(|(a, v)| dot(v, &a.mul_vec(v))).sum()
    }

    pub fn series(&self, trajectory: &[SystemState]) -> Vec<f64> {
        trajectory.iter().map(|s| self.evaluate(s)).collect()
    }
}

/// First step index where `series` increases by more than `rel_tol` relative
/// to the previous value, if any.
pub fn first_increase(series: &[f64], rel_tol: f64) -> Option<usize> {
    series.windows(2).position(|w| w[1] > w[0] + rel_tol * w[0].abs()).map(|p| p + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRecord {
    pub step: usize,
    pub time: f64,
    pub d_drift: Vec<f64>,
    pub v_drift: Vec<f64>,
    pub d_norm2: f64,
    pub d_norm_inf: f64,
    pub v_norm2: f64,
    pub v_norm_inf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub records: Vec<DriftRecord>,
}

impl DriftReport {
    pub fn max_d_inf(&self) -> f64 {
        self.records.iter().map(|r| r.d_norm_inf).fold(0.0, f64::max)
    }

    pub fn max_v_inf(&self) -> f64 {
        self.records.iter().map(|r| r.v_norm_inf).fold(0.0, f64::max)
    }
}

/// `d_drift = sum_i C_i d_i` and `v_drift = sum_i C_i v_i` at every level.
pub fn measure_drift(trajectory: &[SystemState], constraints: &ConstraintMap) -> DriftReport {
    let records = trajectory
        .iter()
        .map(|s| {
            let d = constraints.apply(&s.d);
            let v = constraints.apply(&s.v);
            DriftRecord {
                step: s.step,
                time: s.time,
                d_norm2: norm2(&d),
                d_norm_inf: norm_inf(&d),
                v_norm2: norm2(&v),
                v_norm_inf: norm_inf(&v),
                d_drift: d,
                v_drift: v,
            }
        })
        .collect();
    DriftReport { records }
}

/// `v_drift^{n+1} = (1 - 1/theta) v_drift^n`.
pub fn predict_drift_dcontinuity(v_drift: &[f64], theta: f64) -> Result<Vec<f64>, AnalysisError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(AnalysisError::Invalid(format!("drift recursion needs theta in (0, 1], got {theta}")));
    }
    let f = 1.0 - 1.0 / theta;
    Ok(v_drift.iter().map(|v| f * v).collect())
}

/// Baumgarte drift recursion for one system step.
pub fn predict_drift_baumgarte(d: &[f64], v: &[f64], theta: f64, alpha: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
    let s = 1.0 + alpha * theta;
    let dn: Vec<f64> = d.iter().zip(v).map(|(d, v)| (d + dt * (1.0 - theta) * v) / s).collect();
    let vn: Vec<f64> = d.iter().zip(v).map(|(d, v)| -alpha * d / (dt * s) - alpha * (1.0 - theta) * v / s).collect();
    (dn, vn)
}

/// Per-step mismatch between measured drift and the recursion, each relative
/// to the largest drift involved in that step; entry `n` covers step `n -> n+1`.
/// `floor` is an absolute level below which differences count as zero.
pub fn drift_recursion_errors(
    report: &DriftReport,
    method: CouplingMethod,
    theta: f64,
    dt: f64,
    floor: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let mut out = Vec::new();
    for w in report.records.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (pairs, scale) = match method {
            CouplingMethod::DContinuity => {
                let p = predict_drift_dcontinuity(&a.v_drift, theta)?;
                let scale = a.v_norm_inf.max(b.v_norm_inf).max(norm_inf(&p));
                (vec![(p, b.v_drift.clone())], scale)
            }
            CouplingMethod::Baumgarte { alpha } => {
                let (pd, pv) = predict_drift_baumgarte(&a.d_drift, &a.v_drift, theta, alpha, dt);
                // d and v drifts compared on the common scale v ~ d / dt
                let scale = [a.d_norm_inf / dt, a.v_norm_inf, b.d_norm_inf / dt, b.v_norm_inf, norm_inf(&pv)]
                    .into_iter()
                    .fold(0.0, f64::max);
                let pd_scaled: Vec<f64> = pd.iter().map(|x| x / dt).collect();
                let md_scaled: Vec<f64> = b.d_drift.iter().map(|x| x / dt).collect();
                (vec![(pd_scaled, md_scaled), (pv, b.v_drift.clone())], scale)
            }
        };
        let diff = pairs
            .iter()
            .flat_map(|(p, m)| p.iter().zip(m).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        out.push(if diff <= floor { 0.0 } else { diff / scale.max(floor) });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Largest perturbation entry.
    pub input: f64,
    pub delta_d: f64,
    pub delta_v: f64,
    pub delta_lambda: f64,
}

impl ProbeReport {
    /// Output change per unit input for `(d, v, lambda)`; zero when the input is zero.
    pub fn ratios(&self) -> (f64, f64, f64) {
        if self.input == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            (self.delta_d / self.input, self.delta_v / self.input, self.delta_lambda / self.input)
        }
    }

    pub fn bounded(&self, cap: f64) -> bool {
        let (a, b, c) = self.ratios();
        [a, b, c].iter().all(|r| r.is_finite() && *r <= cap)
    }
}

/// One clean and one perturbed step from the same state.
pub fn perturbation_probe<S: SubdomainModel>(
    subs: &[S],
    constraints: &ConstraintMap,
    config: &CouplingConfig,
    state: &SystemState,
    perturbation: &StepPerturbation,
) -> Result<ProbeReport, AnalysisError> {
    let mut stepper = Stepper::new(subs, constraints, config.clone())?;
    let (clean, _) = stepper.step(state, None)?;
    let (pert, _) = stepper.step(state, Some(perturbation))?;
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let input = norm_inf(&perturbation.eps_d.iter().flatten().copied().collect::<Vec<_>>())
        .max(norm_inf(&perturbation.delta_lambda))
        .max(norm_inf(&perturbation.eps_lambda));
    Ok(ProbeReport {
        input,
        delta_d: diff(&clean.d, &pert.d),
        delta_v: diff(&clean.v, &pert.v),
        delta_lambda: clean.lambda.iter().zip(&pert.lambda).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
    })
}
