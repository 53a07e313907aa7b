use super::{CaseParams, ProblemDefinition, SubdomainSetup};
use crate::assembly::{BoundaryConditions, FormulationTag, TransportCoefficients};
use crate::fields::ScalarField;
use crate::mesh::interval_mesh;
use std::f64::consts::PI;
use std::sync::Arc;

pub const DIFFUSION_1D_D: f64 = 0.01;

/// Mixed implicit subdomains; a d-continuity case that is stable for any step.
pub const DIFFUSION_1D_CASE: CaseParams = CaseParams { dt: 0.05, alpha: None, dt_sub: &[0.01, 0.05, 0.025], theta: &[0.5, 1.0, 0.5] };

/// `c_t - D c_xx = 0` on (0, 1) with zero ends and `c(x, 0) = sin(pi x)`, split
/// into subdomains of widths 0.3, 0.4, 0.3.
pub fn diffusion_1d_problem(cells: [usize; 3]) -> ProblemDefinition {
    let (mesh, partition) = interval_mesh(&[0.3, 0.4, 0.3], &cells).expect("valid interval");
    let coefficients = TransportCoefficients::constant([0.0, 0.0], DIFFUSION_1D_D, 0.0, 0.0);
    let case = &DIFFUSION_1D_CASE;
    let subdomains = case
        .integrators()
        .into_iter()
        .map(|integrator| SubdomainSetup { formulation: FormulationTag::Galerkin, integrator, coefficients: coefficients.clone() })
        .collect();
    ProblemDefinition {
        name: "diffusion_1d".into(),
        mesh: Arc::new(mesh),
        partition,
        subdomains,
        bc: BoundaryConditions {
            dirichlet: vec![("left".into(), ScalarField::constant(0.0)), ("right".into(), ScalarField::constant(0.0))],
            neumann: vec![],
        },
        initial: ScalarField::space(|x| (PI * x[0]).sin()),
        coupling: case.coupling(25.0),
        reference: Some(ScalarField::space_time(|x, t| (-DIFFUSION_1D_D * PI * PI * t).exp() * (PI * x[0]).sin())),
    }
}
