use super::{CaseParams, FixtureKind, ProblemDefinition, ProblemError, SubdomainSetup};
use crate::assembly::{BoundaryConditions, FormulationTag, TransportCoefficients};
use crate::fields::ScalarField;
use std::path::Path;
use std::sync::Arc;

/// Galerkin everywhere: d-continuity and Baumgarte parameters.
pub const HEMKER_GALERKIN_CASES: [CaseParams; 2] = [
    CaseParams { dt: 0.1, alpha: None, dt_sub: &[0.001, 0.01, 0.1], theta: &[0.5, 1.0, 1.0] },
    CaseParams { dt: 0.2, alpha: Some(1.0), dt_sub: &[0.01, 0.05, 0.02], theta: &[0.5, 1.0, 0.0] },
];

/// GLS in the ring, SUPG in the wake, Galerkin in the far field.
pub const HEMKER_SPLIT_CASES: [CaseParams; 2] = [
    CaseParams { dt: 0.2, alpha: None, dt_sub: &[0.001, 0.005, 0.2], theta: &[0.5, 1.0, 1.0] },
    CaseParams { dt: 0.2, alpha: Some(1.0), dt_sub: &[0.001, 0.005, 0.02], theta: &[1.0, 0.5, 0.0] },
];

pub const HEMKER_EPS: f64 = 0.01;

/// Formulation assignment for the ring, wake and far-field subdomains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HemkerPlan(pub [FormulationTag; 3]);

impl HemkerPlan {
    pub const GALERKIN: HemkerPlan = HemkerPlan([FormulationTag::Galerkin; 3]);
    pub const SPLIT: HemkerPlan = HemkerPlan([FormulationTag::Gls, FormulationTag::Supg, FormulationTag::Galerkin]);

    /// The d-continuity case matching this plan (split parameters for any stabilized plan).
    pub fn default_case(self) -> &'static CaseParams {
        if self == Self::GALERKIN {
            &HEMKER_GALERKIN_CASES[0]
        } else {
            &HEMKER_SPLIT_CASES[0]
        }
    }
}

/// `c_t + c_x - eps lap c = 0`, `c = 1` on the circle, `c = 0` on the inflow
/// edge, zero flux elsewhere, zero initial value; runs to `t = 5`.
pub fn hemker_2d_problem(plan: HemkerPlan, full: bool, fixture_dir: Option<&Path>) -> Result<ProblemDefinition, ProblemError> {
    let (mesh, partition) = FixtureKind::Hemker.load(full, fixture_dir)?;
    if partition.subdomain_count() != 3 {
        return Err(ProblemError::Invalid("hemker partition must have three subdomains".into()));
    }
    for set in ["circle", "left"] {
        if mesh.boundary_set(set).is_none() {
            return Err(ProblemError::Invalid(format!("hemker mesh has no `{set}` set")));
        }
    }
    let coefficients = TransportCoefficients::constant([1.0, 0.0], HEMKER_EPS, 0.0, 0.0);
    let case = plan.default_case();
    let subdomains = plan
        .0
        .iter()
        .zip(case.integrators())
        .map(|(&formulation, integrator)| SubdomainSetup { formulation, integrator, coefficients: coefficients.clone() })
        .collect();
    Ok(ProblemDefinition {
        name: "hemker_2d".into(),
        mesh: Arc::new(mesh),
        partition,
        subdomains,
        bc: BoundaryConditions {
            // the circle wins where both sets meet (they do not in the shipped meshes)
            dirichlet: vec![("left".into(), ScalarField::constant(0.0)), ("circle".into(), ScalarField::constant(1.0))],
            neumann: vec![],
        },
        initial: ScalarField::constant(0.0),
        coupling: case.coupling(5.0),
        reference: None,
    })
}
