use super::{CaseParams, ProblemDefinition, SubdomainSetup};
use crate::assembly::{BoundaryConditions, FormulationTag, TransportCoefficients};
use crate::fields::ScalarField;
use crate::mesh::interval_mesh;
use std::f64::consts::PI;
use std::sync::Arc;

pub const SINGULAR_DCONTINUITY_CASES: [CaseParams; 3] = [
    CaseParams { dt: 0.25, alpha: None, dt_sub: &[0.05, 0.25, 0.05], theta: &[0.5, 1.0, 0.5] },
    CaseParams { dt: 0.25, alpha: None, dt_sub: &[0.05, 0.01, 0.05], theta: &[0.5, 1.0, 0.5] },
    CaseParams { dt: 0.1, alpha: None, dt_sub: &[0.1, 0.1, 0.1], theta: &[0.5, 0.5, 0.5] },
];

pub const SINGULAR_BAUMGARTE_CASES: [CaseParams; 5] = [
    CaseParams { dt: 0.25, alpha: Some(1.0), dt_sub: &[0.125, 0.25, 0.125], theta: &[0.5, 0.0, 0.5] },
    CaseParams { dt: 0.25, alpha: Some(5.0), dt_sub: &[0.125, 0.05, 0.125], theta: &[0.5, 0.0, 0.5] },
    CaseParams { dt: 0.25, alpha: Some(5.0), dt_sub: &[0.00125, 0.25, 0.00125], theta: &[0.0, 1.0, 0.0] },
    CaseParams { dt: 0.25, alpha: Some(1.0), dt_sub: &[0.0025, 0.25, 0.0025], theta: &[0.0, 1.0, 0.0] },
    CaseParams { dt: 0.1, alpha: Some(1.0), dt_sub: &[0.1, 0.1, 0.1], theta: &[0.5, 0.5, 0.5] },
];

/// Steady limit of `c_t + c - eps^2 c_xx = 1` on (0, 1) with `c(0) = c(1) = 0`.
pub fn singular_steady(eps: f64, x: f64) -> f64 {
    1.0 - ((-x / eps).exp() + (-(1.0 - x) / eps).exp()) / (1.0 + (-1.0 / eps).exp())
}

/// Eigenfunction series of the transient problem from `c(x, 0) = 0`:
/// `c = c_inf - sum_{k odd} b_k exp(-(1 + eps^2 k^2 pi^2) t) sin(k pi x)`,
/// `b_k = 4 / (k pi (1 + eps^2 k^2 pi^2))`.
pub fn singular_transient(eps: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut k = 1usize;
    loop {
        let kp = k as f64 * PI;
        let s = 1.0 + eps * eps * kp * kp;
        let term = 4.0 / (kp * s) * (-s * t).exp();
        sum += term * (kp * x).sin();
        if term < 1e-17 || k > 2_000_001 {
            break;
        }
        k += 2;
    }
    singular_steady(eps, x) - sum
}

pub const SINGULAR_EPS: f64 = 0.01;

/// Three subdomains of widths 0.1, 0.8, 0.1 with `cells` linear elements each,
/// integrated with d-continuity case 2 up to `t = 1`.
pub fn singular_1d_problem(cells: [usize; 3]) -> ProblemDefinition {
    let eps = SINGULAR_EPS;
    let (mesh, partition) = interval_mesh(&[0.1, 0.8, 0.1], &cells).expect("valid interval");
    let coefficients = TransportCoefficients::constant([0.0, 0.0], eps * eps, 1.0, 1.0);
    let case = &SINGULAR_DCONTINUITY_CASES[1];
    let subdomains = case
        .integrators()
        .into_iter()
        .map(|integrator| SubdomainSetup { formulation: FormulationTag::Galerkin, integrator, coefficients: coefficients.clone() })
        .collect();
    ProblemDefinition {
        name: "singular_1d".into(),
        mesh: Arc::new(mesh),
        partition,
        subdomains,
        bc: BoundaryConditions {
            dirichlet: vec![("left".into(), ScalarField::constant(0.0)), ("right".into(), ScalarField::constant(0.0))],
            neumann: vec![],
        },
        initial: ScalarField::constant(0.0),
        coupling: case.coupling(1.0),
        reference: Some(ScalarField::space_time(move |x, t| singular_transient(eps, x[0], t))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_values() {
        assert!((singular_steady(0.01, 0.5) - 1.0).abs() < 1e-20);
        assert!(singular_steady(0.01, 0.0).abs() < 1e-15);
        assert!(singular_steady(0.01, 1.0).abs() < 1e-15);
        // residual of c - eps^2 c'' = 1 by central differences
        let (e, h) = (0.01, 1e-4);
        for &x in &[0.003, 0.02, 0.5, 0.97] {
            let c = |x: f64| singular_steady(e, x);
            let cxx = (c(x + h) - 2.0 * c(x) + c(x - h)) / (h * h);
            assert!((c(x) - e * e * cxx - 1.0).abs() < 1e-5, "x = {x}");
        }
    }

    #[test]
    fn transient_series_solves_the_pde() {
        let e = SINGULAR_EPS;
        // boundary values and the long-time limit
        assert!(singular_transient(e, 0.0, 0.3).abs() < 1e-12);
        assert!((singular_transient(e, 0.5, 40.0) - singular_steady(e, 0.5)).abs() < 1e-12);
        // mid-domain the solution is 1 - exp(-t) away from the layers
        assert!((singular_transient(e, 0.5, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        // residual c_t + c - eps^2 c_xx - 1 by finite differences
        let (h, k) = (1e-3, 1e-5);
        for &(x, t) in &[(0.01, 0.5), (0.05, 1.0), (0.3, 0.2)] {
            let c = |x: f64, t: f64| singular_transient(e, x, t);
            let ct = (c(x, t + k) - c(x, t - k)) / (2.0 * k);
            let cxx = (c(x + h, t) - 2.0 * c(x, t) + c(x - h, t)) / (h * h);
            let r = ct + c(x, t) - e * e * cxx - 1.0;
            assert!(r.abs() < 1e-3, "x = {x}, t = {t}, residual {r}");
        }
    }

    #[test]
    fn problem_layout() {
        let def = singular_1d_problem([20, 8, 20]);
        assert_eq!(def.coupling.steps, 4);
        let p = def.build().unwrap();
        assert_eq!(p.subs.len(), 3);
        assert_eq!(p.constraints.row_count(), 2);
    }
}
